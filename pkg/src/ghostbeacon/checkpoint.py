"""Versioned npz checkpoint container shared by all persisted models.

load(save(m)) reproduces every array bit-exactly (float64 all the way).
"""

from __future__ import annotations

import json

import numpy as np

from .dae import Architecture, DaeModel
from .ocsvm import OcsvmModel
from .tracelog import Scaler

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _save(path, kind: str, arrays: dict, meta: dict) -> None:
    header = json.dumps({"version": FORMAT_VERSION, "kind": kind, **meta}, sort_keys=True)
    np.savez(path, __meta__=np.frombuffer(header.encode(), dtype=np.uint8), **arrays)


def _load(path) -> tuple[str, dict, dict]:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise CheckpointError(f"{path}: not a checkpoint file")
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    return meta.pop("kind", ""), arrays, meta


def save_dae(model: DaeModel, path) -> None:
    arrays = {}
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    _save(path, "dae", arrays, {"layer_widths": list(model.arch.layer_widths)})


def save_ocsvm(model: OcsvmModel, path) -> None:
    _save(path, "ocsvm", {"w": model.w, "rho": np.float64(model.rho)}, {"nu": model.nu})


def save_scaler(scaler: Scaler, path) -> None:
    _save(path, "scaler", {"mins": scaler.mins, "maxs": scaler.maxs}, {})


def load(path):
    """Load any checkpoint; returns the reconstructed model object."""
    kind, arrays, meta = _load(path)
    if kind == "dae":
        arch = Architecture(layer_widths=tuple(meta["layer_widths"]))
        n = len(arch.layer_widths) - 1
        weights = [arrays[f"w{i}"] for i in range(n)]
        biases = [arrays[f"b{i}"] for i in range(n)]
        return DaeModel(arch=arch, weights=weights, biases=biases)
    if kind == "ocsvm":
        return OcsvmModel(w=arrays["w"], rho=float(arrays["rho"]), nu=float(meta["nu"]))
    if kind == "scaler":
        return Scaler(mins=arrays["mins"], maxs=arrays["maxs"])
    raise CheckpointError(f"{path}: unknown checkpoint kind {kind!r}")
