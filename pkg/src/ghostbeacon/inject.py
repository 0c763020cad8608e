"""Ghost-transmitter injection under distance-band constraints.

A ghost location replaces the reported transmitter position of a real
delivered packet.  Ghosts are drawn uniformly over the accessible region
(the street network, excluding buildings and out-of-bounds space) by
rejection sampling against the band predicate: a range of ghost-to-true
distances, optionally combined with an annulus constraint on how much the
apparent transmitter-receiver distance may change (direction anomalies).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import ObstacleSet, Scenario
from .tracelog import LABEL_ANOMALOUS, FeatureSet, LinkedPackets

REJECTION_CAP = 100_000
_CHUNK = 4096


class InfeasibleBandError(RuntimeError):
    """Rejection sampling hit the attempt cap for one sample."""


@dataclass(frozen=True)
class BandSpec:
    """Distance band for ghost placement.

    d_tt is the ghost-to-true-transmitter distance, accepted on
    [d_tt_lo, d_tt_hi).  An optional annulus (lo, hi) additionally bounds
    the gap |d(T, R) - d(T', R)| to [lo, hi), turning the band into a
    direction anomaly at nearly unchanged transmission distance.
    """

    name: str
    d_tt_lo: float
    d_tt_hi: float
    sample_count: int = 1000
    annulus: tuple[float, float] | None = None

    def validate(self) -> None:
        if not self.d_tt_lo < self.d_tt_hi:
            raise ValueError(f"{self.name}: empty d_tt range")
        if self.sample_count <= 0:
            raise ValueError(f"{self.name}: sample_count must be > 0")
        if self.annulus is not None and not self.annulus[0] < self.annulus[1]:
            raise ValueError(f"{self.name}: empty annulus range")

    def contains_dtt(self, d) -> np.ndarray:
        return (np.asarray(d) >= self.d_tt_lo) & (np.asarray(d) < self.d_tt_hi)

    def contains_gap(self, gap) -> np.ndarray:
        lo, hi = self.annulus
        return (np.asarray(gap) >= lo) & (np.asarray(gap) < hi)


def default_bands() -> list[BandSpec]:
    """The ten stock anomaly bands."""
    edges = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 100.0, 500.0, math.inf]
    bands = [
        BandSpec(name=f"AD{i + 1}", d_tt_lo=edges[i], d_tt_hi=edges[i + 1])
        for i in range(8)
    ]
    bands.append(BandSpec(name="AD9", d_tt_lo=30.0, d_tt_hi=math.inf, annulus=(0.0, 1.0)))
    bands.append(BandSpec(name="AD10", d_tt_lo=30.0, d_tt_hi=math.inf, annulus=(10.0, 20.0)))
    return bands


@dataclass
class AccessibleRegion:
    """Street-network membership and uniform sampling support."""

    xs: np.ndarray  # vertical street center lines
    ys: np.ndarray  # horizontal street center lines
    half_width: float
    width: float
    height: float
    obstacles: ObstacleSet
    _rects: np.ndarray = field(init=False, repr=False)
    _cum_area: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._rects = self._disjoint_rects()
        areas = (self._rects[:, 2] - self._rects[:, 0]) * (self._rects[:, 3] - self._rects[:, 1])
        total = areas.sum()
        if total <= 0:
            raise ValueError("accessible region has zero area")
        self._cum_area = np.cumsum(areas) / total

    @classmethod
    def from_scenario(cls, scn: Scenario) -> "AccessibleRegion":
        return cls(
            xs=scn.xs,
            ys=scn.ys,
            half_width=scn.config.street_width_m / 2.0,
            width=scn.config.area_width_m,
            height=scn.config.area_height_m,
            obstacles=scn.obstacles,
        )

    def _disjoint_rects(self) -> np.ndarray:
        """Cover the street union with non-overlapping rectangles: full
        vertical bands plus horizontal bands split at the vertical ones."""
        hw = self.half_width
        rects = []
        vx = [(max(x - hw, 0.0), min(x + hw, self.width)) for x in self.xs]
        for x0, x1 in vx:
            if x1 > x0:
                rects.append((x0, 0.0, x1, self.height))
        gaps = []
        cursor = 0.0
        for x0, x1 in sorted(vx):
            if x0 > cursor:
                gaps.append((cursor, x0))
            cursor = max(cursor, x1)
        if cursor < self.width:
            gaps.append((cursor, self.width))
        for y in self.ys:
            y0 = max(y - hw, 0.0)
            y1 = min(y + hw, self.height)
            if y1 <= y0:
                continue
            for g0, g1 in gaps:
                rects.append((g0, y0, g1, y1))
        return np.asarray(rects, dtype=np.float64).reshape(-1, 4)

    def contains(self, points) -> np.ndarray:
        """True where a point lies on the street network, in bounds and
        outside every obstacle interior."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        x = p[:, 0]
        y = p[:, 1]
        in_bounds = (x >= 0) & (x <= self.width) & (y >= 0) & (y <= self.height)
        on_v = np.min(np.abs(x[:, None] - self.xs[None, :]), axis=1) <= self.half_width
        on_h = np.min(np.abs(y[:, None] - self.ys[None, :]), axis=1) <= self.half_width
        ok = in_bounds & (on_v | on_h)
        blocked = self.obstacles.contains(p)
        return ok & ~blocked

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Uniform points over the accessible region."""
        out = np.empty((size, 2))
        filled = 0
        while filled < size:
            need = size - filled
            ridx = np.searchsorted(self._cum_area, rng.random(need), side="right")
            r = self._rects[ridx]
            pts = np.column_stack(
                [
                    r[:, 0] + rng.random(need) * (r[:, 2] - r[:, 0]),
                    r[:, 1] + rng.random(need) * (r[:, 3] - r[:, 1]),
                ]
            )
            # street rectangles normally avoid obstacles; the check guards
            # custom obstacle layouts that overlap streets
            keep = ~self.obstacles.contains(pts)
            kept = pts[keep]
            out[filled : filled + kept.shape[0]] = kept[: size - filled]
            filled += min(kept.shape[0], size - filled)
        return out


def accessible(p, region: AccessibleRegion) -> bool:
    """Membership test for a single point."""
    return bool(region.contains(np.asarray(p, dtype=np.float64).reshape(1, 2))[0])


def _rejection_sample(predicate, region, rng, max_attempts):
    attempts = 0
    while attempts < max_attempts:
        chunk = min(_CHUNK, max_attempts - attempts)
        cand = region.sample(rng, chunk)
        hit = np.flatnonzero(predicate(cand))
        if hit.size:
            return cand[hit[0]]
        attempts += chunk
    return None


def sample_ghost(
    l_t,
    band: BandSpec,
    region: AccessibleRegion,
    rng: np.random.Generator,
    max_attempts: int = REJECTION_CAP,
) -> np.ndarray:
    """Accessible ghost position with d(T, T') inside the band range."""
    if band.annulus is not None:
        raise ValueError(f"{band.name}: band has an annulus constraint, use sample_ghost_directional")
    l_t = np.asarray(l_t, dtype=np.float64)

    def pred(cand):
        d = np.hypot(cand[:, 0] - l_t[0], cand[:, 1] - l_t[1])
        return band.contains_dtt(d)

    ghost = _rejection_sample(pred, region, rng, max_attempts)
    if ghost is None:
        raise InfeasibleBandError(
            f"{band.name}: no accessible ghost for transmitter at {tuple(l_t)} "
            f"within {max_attempts} attempts"
        )
    return ghost


def sample_ghost_directional(
    l_t,
    l_r,
    band: BandSpec,
    region: AccessibleRegion,
    rng: np.random.Generator,
    max_attempts: int = REJECTION_CAP,
) -> np.ndarray:
    """Accessible ghost with banded d(T, T') and banded distance gap
    |d(T, R) - d(T', R)| (direction anomaly)."""
    if band.annulus is None:
        raise ValueError(f"{band.name}: band has no annulus constraint, use sample_ghost")
    l_t = np.asarray(l_t, dtype=np.float64)
    l_r = np.asarray(l_r, dtype=np.float64)
    d_tr = float(np.hypot(l_t[0] - l_r[0], l_t[1] - l_r[1]))

    def pred(cand):
        d_tt = np.hypot(cand[:, 0] - l_t[0], cand[:, 1] - l_t[1])
        d_gr = np.hypot(cand[:, 0] - l_r[0], cand[:, 1] - l_r[1])
        return band.contains_dtt(d_tt) & band.contains_gap(np.abs(d_tr - d_gr))

    ghost = _rejection_sample(pred, region, rng, max_attempts)
    if ghost is None:
        raise InfeasibleBandError(
            f"{band.name}: no accessible ghost for T={tuple(l_t)}, R={tuple(l_r)} "
            f"within {max_attempts} attempts"
        )
    return ghost


@dataclass
class AnomalyDataset:
    band: BandSpec
    features: FeatureSet
    d_tt: np.ndarray  # ghost-to-true-transmitter distances
    gap: np.ndarray  # |d(T,R) - d(T',R)|, NaN when the band has no annulus
    failures: int = 0


def build_anomaly_dataset(
    linked: LinkedPackets,
    band: BandSpec,
    region: AccessibleRegion,
    rng: np.random.Generator,
    max_attempts: int = REJECTION_CAP,
) -> AnomalyDataset:
    """Falsify the reported transmitter position of sampled packets.

    Packets are drawn without replacement in a seeded order; a packet
    whose geometry makes the band infeasible is skipped and counted.  The
    receiver position and the RSSI stay untouched.
    """
    band.validate()
    n = len(linked)
    if n < band.sample_count:
        raise ValueError(f"{band.name}: need {band.sample_count} packets, have {n}")
    order = rng.permutation(n)
    rows = np.empty((band.sample_count, 5))
    d_true = np.empty(band.sample_count)
    d_tt = np.empty(band.sample_count)
    gap = np.full(band.sample_count, np.nan)
    failures = 0
    got = 0
    tx_pos = linked.tx_pos
    rx_pos = linked.rx_pos
    rssi = linked.rssi
    for idx in order:
        if got == band.sample_count:
            break
        l_t = tx_pos[idx]
        l_r = rx_pos[idx]
        try:
            if band.annulus is None:
                ghost = sample_ghost(l_t, band, region, rng, max_attempts)
            else:
                ghost = sample_ghost_directional(l_t, l_r, band, region, rng, max_attempts)
        except InfeasibleBandError:
            failures += 1
            continue
        rows[got] = (l_r[0], l_r[1], rssi[idx], ghost[0], ghost[1])
        d_true[got] = np.hypot(l_t[0] - l_r[0], l_t[1] - l_r[1])
        d_tt[got] = np.hypot(ghost[0] - l_t[0], ghost[1] - l_t[1])
        if band.annulus is not None:
            gap[got] = abs(d_true[got] - np.hypot(ghost[0] - l_r[0], ghost[1] - l_r[1]))
        got += 1
    if got < band.sample_count:
        raise InfeasibleBandError(
            f"{band.name}: only {got} of {band.sample_count} samples feasible "
            f"({failures} packets failed the band geometry)"
        )
    features = FeatureSet(
        x=rows,
        label=np.full(band.sample_count, LABEL_ANOMALOUS, dtype=np.int8),
        d_true=d_true,
    )
    return AnomalyDataset(band=band, features=features, d_tt=d_tt, gap=gap, failures=failures)
