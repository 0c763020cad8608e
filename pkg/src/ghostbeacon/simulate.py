"""Beacon-exchange simulation producing the packet log.

Every vehicle broadcasts one beacon per beacon interval; every ordered
(TX, RX) pair is evaluated through the link budget and the three-stage
delivery cascade.  All TX events and all delivered RX events are logged.

Randomness is organized as one substream per beacon round keyed by
(seed, CHANNEL, round index), inside which full fleet-sized matrices are
drawn in a fixed order (fading normals, noise, PER uniforms).  The log is
therefore a pure function of (config, params) regardless of how the pair
evaluations would be scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .channel import (
    BELOW_SENSITIVITY,
    BELOW_SNIR,
    C_LIGHT,
    DELIVERED,
    PER_DROP,
    ChannelParams,
    VERDICT_NAMES,
    delivery_verdicts,
    path_loss_det,
    rician_gain_from_normals,
)
from .kernels import geometry
from .scenario import (
    ObstacleSet,
    Scenario,
    ScenarioConfig,
    ScenarioError,
    VehicleTrace,
    build_scenario,
    movement_axes,
    simulate_mobility,
    traces_to_positions,
    vehicle_body_rects,
)
from .tracelog import RX, TX, PacketLog


@dataclass
class RoundResult:
    """All ordered-pair link evaluations for one beacon time."""

    rssi: np.ndarray  # (n, n), [tx, rx]
    verdict: np.ndarray  # (n, n) int8 codes
    snir: np.ndarray
    per: np.ndarray
    dist: np.ndarray
    clamped: np.ndarray  # (n, n) bool, distance fell below d0


@dataclass
class SimStats:
    n_beacons: int = 0
    n_tx: int = 0
    n_rx: int = 0
    n_evaluated: int = 0
    n_clamped: int = 0
    verdict_counts: dict = field(default_factory=dict)


def beacon_times(config: ScenarioConfig) -> np.ndarray:
    n = int(np.floor(config.sim_duration_s / config.beacon_interval_s))
    return np.arange(n) * config.beacon_interval_s


def pair_loss_matrix(
    positions: np.ndarray,
    obstacles: ObstacleSet,
    vehicle_rects: np.ndarray | None = None,
    vehicle_wall_db: float = 0.0,
    vehicle_beta: float = 0.0,
) -> np.ndarray:
    """Symmetric shadowing-loss matrix over all unordered position pairs:
    static obstacles plus (optionally) the other vehicles' bodies, each
    link ignoring its own two endpoints' bodies."""
    n = positions.shape[0]
    out = np.zeros((n, n))
    if n < 2:
        return out
    iu, ju = np.triu_indices(n, k=1)
    losses = np.zeros(iu.size)
    if obstacles is not None and len(obstacles) > 0:
        losses += geometry.pair_obstacle_losses(
            positions[iu], positions[ju], obstacles.rects, obstacles.wall_db, obstacles.beta
        )
    if vehicle_rects is not None and vehicle_rects.shape[0] == n:
        losses += geometry.pair_obstacle_losses_excluding(
            positions[iu],
            positions[ju],
            iu,
            ju,
            vehicle_rects,
            np.full(n, vehicle_wall_db),
            np.full(n, vehicle_beta),
        )
    out[iu, ju] = losses
    out[ju, iu] = losses
    return out


def evaluate_beacon_round(
    positions: np.ndarray,
    params: ChannelParams,
    obstacles: ObstacleSet,
    rng: np.random.Generator,
    packet_bits: int,
    vehicle_rects: np.ndarray | None = None,
    vehicle_wall_db: float = 0.0,
    vehicle_beta: float = 0.0,
) -> RoundResult:
    """Evaluate every ordered pair once; the diagonal is meaningless and
    must be masked by callers."""
    n = positions.shape[0]
    dx = positions[:, 0][None, :] - positions[:, 0][:, None]
    dy = positions[:, 1][None, :] - positions[:, 1][:, None]
    dist = np.hypot(dx, dy)
    loss, clamped = path_loss_det(dist, params, return_clamped=True)
    obs = pair_loss_matrix(positions, obstacles, vehicle_rects, vehicle_wall_db, vehicle_beta)
    # fixed draw order: fading normals, then noise, then PER uniforms
    z1 = rng.standard_normal((n, n))
    z2 = rng.standard_normal((n, n))
    noise = rng.normal(params.noise_mean_dbm, params.noise_std_db, size=(n, n))
    u = rng.random((n, n))
    gain = rician_gain_from_normals(params.rician_k_db, z1, z2)
    rssi = params.budget_dbm - loss - obs + 10.0 * np.log10(gain)
    verdict, snir, per = delivery_verdicts(rssi, noise, u, params, packet_bits)
    return RoundResult(rssi=rssi, verdict=verdict, snir=snir, per=per, dist=dist, clamped=clamped)


def run_simulation(
    config: ScenarioConfig,
    params: ChannelParams,
    traces: list[VehicleTrace] | None = None,
) -> PacketLog:
    """Simulate the configured scenario and return the packet log.

    When external mobility traces are passed they replace the built-in
    grid mobility; everything else (channel draws, logging) is unchanged.
    The returned log carries a SimStats object as ``log.stats``.
    """
    config.validate()
    params.validate()
    times = beacon_times(config)
    scn = build_scenario(config)
    if traces is None:
        mobility = simulate_mobility(config, scn)
    else:
        if len(traces) != config.fleet_size:
            raise ScenarioError(
                f"external traces carry {len(traces)} vehicles but fleet_size is {config.fleet_size}"
            )
        mobility = traces
    positions = traces_to_positions(mobility, times)
    w, h = scn.bounds
    if np.any(positions < -1e-9) or np.any(positions[:, :, 0] > w + 1e-9) or np.any(
        positions[:, :, 1] > h + 1e-9
    ):
        raise ScenarioError("mobility positions fall outside the scenario area")

    n = config.fleet_size
    packet_bits = config.packet_length_bytes * 8
    tx_dur = packet_bits / config.data_rate_bps
    offdiag = ~np.eye(n, dtype=bool)

    stats = SimStats(n_beacons=len(times))
    counts = {name: 0 for name in VERDICT_NAMES}

    side_parts = []
    iface_parts = []
    node_parts = []
    seq_parts = []
    t0_parts = []
    p0_parts = []
    t1_parts = []
    p1_parts = []
    rssi_parts = []

    axes = movement_axes(positions) if config.vehicle_obstruction else None

    node_ids = np.arange(n, dtype=np.int64)
    for k, t in enumerate(times):
        pos = positions[k]
        rng = seeding.substream(config.seed, seeding.CHANNEL, k)
        rects = (
            vehicle_body_rects(pos, axes[k], config.vehicle_length_m, config.vehicle_width_m)
            if axes is not None
            else None
        )
        res = evaluate_beacon_round(
            pos,
            params,
            scn.obstacles,
            rng,
            packet_bits,
            vehicle_rects=rects,
            vehicle_wall_db=config.vehicle_wall_loss_db,
            vehicle_beta=config.vehicle_interior_loss_db_per_m,
        )
        stats.n_evaluated += int(offdiag.sum())
        stats.n_clamped += int(np.sum(res.clamped & offdiag))
        for code, name in enumerate(VERDICT_NAMES):
            counts[name] += int(np.sum((res.verdict == code) & offdiag))

        # TX block: one record per vehicle, node order
        side_parts.append(np.full(n, TX, dtype=np.int8))
        iface_parts.append(node_ids)
        node_parts.append(node_ids)
        seq_parts.append(k * n + node_ids)
        t0_parts.append(np.full(n, t))
        p0_parts.append(pos)
        t1_parts.append(np.full(n, t + tx_dur))
        p1_parts.append(pos)
        rssi_parts.append(np.full(n, np.nan))

        # RX block: delivered pairs in (tx, rx) order
        deliv = (res.verdict == DELIVERED) & offdiag
        ti, rj = np.nonzero(deliv)
        if ti.size:
            prop = res.dist[ti, rj] / C_LIGHT
            side_parts.append(np.full(ti.size, RX, dtype=np.int8))
            iface_parts.append(rj.astype(np.int64))
            node_parts.append(rj.astype(np.int64))
            seq_parts.append(k * n + ti)
            t0_parts.append(t + prop)
            p0_parts.append(pos[rj])
            t1_parts.append(t + prop + tx_dur)
            p1_parts.append(pos[rj])
            rssi_parts.append(res.rssi[ti, rj])
            stats.n_rx += int(ti.size)
        stats.n_tx += n

    stats.verdict_counts = counts
    iface_names = [f"GridScenario.node[{i}].wlan[0].radio" for i in range(n)]
    sig_name = f"UDPData-{config.packet_length_bytes}"
    log = PacketLog(
        side=np.concatenate(side_parts),
        iface_code=np.concatenate(iface_parts),
        iface_names=iface_names,
        node=np.concatenate(node_parts),
        sig_code=np.zeros(stats.n_tx + stats.n_rx, dtype=np.int32),
        sig_names=[sig_name],
        seq=np.concatenate(seq_parts),
        t0=np.concatenate(t0_parts),
        p0=np.concatenate(p0_parts),
        t1=np.concatenate(t1_parts),
        p1=np.concatenate(p1_parts),
        rssi=np.concatenate(rssi_parts),
    )
    log.stats = stats
    return log


def read_mobility_csv(path) -> list[VehicleTrace]:
    """External mobility traces: CSV rows of node_id, t, x, y."""
    data: dict[int, list[tuple[float, float, float]]] = {}
    with open(path) as fh:
        first = fh.readline()
        rows = [] if first.lower().replace(" ", "").startswith("node_id,") else [first]
        rows.extend(fh)
        for lineno, line in enumerate(rows, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ScenarioError(f"mobility CSV line {lineno}: expected 4 columns")
            try:
                node = int(parts[0])
                t, x, y = (float(v) for v in parts[1:])
            except ValueError as exc:
                raise ScenarioError(f"mobility CSV line {lineno}: {exc}") from None
            data.setdefault(node, []).append((t, x, y))
    traces = []
    for node in sorted(data):
        rows = sorted(data[node])
        times = np.array([r[0] for r in rows])
        if np.any(np.diff(times) <= 0):
            raise ScenarioError(f"node {node}: trace timestamps must be strictly increasing")
        positions = np.array([[r[1], r[2]] for r in rows])
        traces.append(VehicleTrace(node_id=node, times=times, positions=positions))
    if not traces:
        raise ScenarioError("mobility CSV contains no samples")
    return traces
