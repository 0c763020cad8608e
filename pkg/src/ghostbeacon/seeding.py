"""Labeled RNG substreams derived from one master seed.

Every stochastic stage of the pipeline draws from its own substream keyed
by (master_seed, label, *extra), so e.g. changing the autoencoder epoch
count never perturbs the simulation randomness.
"""

from __future__ import annotations

import numpy as np

# substream labels; extra key components (vehicle id, timestep, band index)
# are appended after the label
PLACEMENT = 1
MOBILITY = 2
CHANNEL = 3
INJECT = 4
POOL = 5
SPLIT = 6
DAE = 7
OCSVM = 8
LOSSCMP = 9


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the substream (master_seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


def clone_rng(rng: np.random.Generator) -> np.random.Generator:
    """Copy a generator so the original stream position is preserved."""
    fresh = np.random.Generator(type(rng.bit_generator)())
    fresh.bit_generator.state = rng.bit_generator.state
    return fresh
