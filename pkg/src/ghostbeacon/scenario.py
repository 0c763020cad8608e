"""Manhattan-grid scenario: streets, buildings and vehicle mobility.

Streets are axis-aligned lines spaced grid_spacing_m apart (both edges of
the area carry a street when the spacing divides the side length).  Every
cell between neighboring streets holds one building rectangle, inset from
the street edges by building_setback_m.  Vehicles move along street
center lines at a constant per-vehicle speed and turn uniformly at random
at intersections (no U-turn unless the intersection is a dead end).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import seeding


class ScenarioError(ValueError):
    """Raised for configurations the scenario generator cannot satisfy."""


@dataclass
class ObstacleSet:
    """Axis-aligned rectangles with per-rectangle attenuation parameters."""

    rects: np.ndarray  # (m, 4) x0, y0, x1, y1
    wall_db: np.ndarray  # (m,) loss per wall crossing
    beta: np.ndarray  # (m,) loss per interior meter

    def __len__(self) -> int:
        return self.rects.shape[0]

    def contains(self, points) -> np.ndarray:
        """Strict-interior membership for an (n, 2) array of points."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if len(self) == 0:
            return np.zeros(p.shape[0], dtype=bool)
        x = p[:, 0][:, None]
        y = p[:, 1][:, None]
        inside = (
            (x > self.rects[None, :, 0])
            & (x < self.rects[None, :, 2])
            & (y > self.rects[None, :, 1])
            & (y < self.rects[None, :, 3])
        )
        return inside.any(axis=1)


@dataclass
class ScenarioConfig:
    area_width_m: float = 2000.0
    area_height_m: float = 2000.0
    sim_duration_s: float = 1800.0
    fleet_size: int = 150
    beacon_interval_s: float = 1.0
    packet_length_bytes: int = 140
    seed: int = 7
    grid_spacing_m: float = 200.0
    street_width_m: float = 16.0
    building_setback_m: float = 2.0
    speed_min_mps: float = 8.0
    speed_max_mps: float = 14.0
    obstacle_wall_loss_db: float = 6.0
    obstacle_interior_loss_db_per_m: float = 1.0
    # vehicle bodies shadow links between other vehicles (a queue on the
    # same street quickly occludes long in-street paths)
    vehicle_obstruction: bool = True
    vehicle_length_m: float = 4.6
    vehicle_width_m: float = 1.8
    vehicle_wall_loss_db: float = 3.0
    vehicle_interior_loss_db_per_m: float = 1.5
    data_rate_bps: float = 6.0e6
    # optional explicit obstacle list of (x0, y0, x1, y1, wall_db, beta);
    # when set it replaces the per-cell building layout
    obstacles: list[tuple] | None = None

    def validate(self) -> None:
        if self.area_width_m <= 0 or self.area_height_m <= 0:
            raise ScenarioError("area dimensions must be > 0")
        if self.fleet_size <= 0:
            raise ScenarioError("fleet_size must be > 0")
        if self.beacon_interval_s <= 0:
            raise ScenarioError("beacon_interval_s must be > 0")
        if self.sim_duration_s <= 0:
            raise ScenarioError("sim_duration_s must be > 0")
        if self.grid_spacing_m <= 0:
            raise ScenarioError("grid_spacing_m must be > 0")
        if self.street_width_m <= 0:
            raise ScenarioError("street_width_m must be > 0")
        if not (0 < self.speed_min_mps <= self.speed_max_mps):
            raise ScenarioError("need 0 < speed_min_mps <= speed_max_mps")
        if self.packet_length_bytes <= 0:
            raise ScenarioError("packet_length_bytes must be > 0")
        if self.vehicle_length_m <= 0 or self.vehicle_width_m <= 0:
            raise ScenarioError("vehicle body dimensions must be > 0")


@dataclass
class VehicleTrace:
    node_id: int
    times: np.ndarray  # (t,) strictly increasing seconds
    positions: np.ndarray  # (t, 2) meters

    def position_at(self, t: float) -> np.ndarray:
        """Linear interpolation inside the sampled time range."""
        if t < self.times[0] or t > self.times[-1]:
            raise ScenarioError(
                f"node {self.node_id}: time {t} outside trace range "
                f"[{self.times[0]}, {self.times[-1]}]"
            )
        x = np.interp(t, self.times, self.positions[:, 0])
        y = np.interp(t, self.times, self.positions[:, 1])
        return np.array([x, y])


@dataclass
class VehicleState:
    pos: np.ndarray  # (n, 2)
    axis: np.ndarray  # (n,) 0 = moving along x, 1 = along y
    dirn: np.ndarray  # (n,) +1 / -1
    speed: np.ndarray  # (n,) m/s

    def copy(self) -> "VehicleState":
        return VehicleState(self.pos.copy(), self.axis.copy(), self.dirn.copy(), self.speed.copy())


@dataclass
class Scenario:
    config: ScenarioConfig
    xs: np.ndarray  # vertical street center lines
    ys: np.ndarray  # horizontal street center lines
    stops_x: np.ndarray  # turn points along x (streets plus area edges)
    stops_y: np.ndarray
    obstacles: ObstacleSet
    vehicles: VehicleState
    rngs: list = field(repr=False, default_factory=list)  # per-vehicle turn streams

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.config.area_width_m, self.config.area_height_m)


def street_coords(extent: float, spacing: float) -> np.ndarray:
    """Street center lines 0, spacing, 2*spacing, ... up to the extent."""
    n = int(np.floor(extent / spacing)) + 1
    return np.arange(n, dtype=np.float64) * spacing


def _default_obstacles(config: ScenarioConfig, xs: np.ndarray, ys: np.ndarray) -> ObstacleSet:
    half = config.street_width_m / 2.0
    inset = half + config.building_setback_m
    rects = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            x0 = xs[i] + inset
            x1 = xs[i + 1] - inset
            y0 = ys[j] + inset
            y1 = ys[j + 1] - inset
            if x1 > x0 and y1 > y0:
                rects.append((x0, y0, x1, y1))
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    m = rects.shape[0]
    return ObstacleSet(
        rects=rects,
        wall_db=np.full(m, config.obstacle_wall_loss_db),
        beta=np.full(m, config.obstacle_interior_loss_db_per_m),
    )


def _explicit_obstacles(spec: list[tuple]) -> ObstacleSet:
    arr = np.asarray([row[:4] for row in spec], dtype=np.float64).reshape(-1, 4)
    wall = np.asarray([row[4] for row in spec], dtype=np.float64)
    beta = np.asarray([row[5] for row in spec], dtype=np.float64)
    if np.any(arr[:, 0] >= arr[:, 2]) or np.any(arr[:, 1] >= arr[:, 3]):
        raise ScenarioError("obstacle rectangles need x0 < x1 and y0 < y1")
    return ObstacleSet(arr, wall, beta)


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Deterministic scenario construction from the config seed."""
    config.validate()
    xs = street_coords(config.area_width_m, config.grid_spacing_m)
    ys = street_coords(config.area_height_m, config.grid_spacing_m)
    stops_x = np.unique(np.concatenate([xs, [0.0, config.area_width_m]]))
    stops_y = np.unique(np.concatenate([ys, [0.0, config.area_height_m]]))
    if config.obstacles is not None:
        obstacles = _explicit_obstacles(config.obstacles)
    else:
        obstacles = _default_obstacles(config, xs, ys)

    total_street_len = len(ys) * config.area_width_m + len(xs) * config.area_height_m
    if total_street_len <= 0:
        raise ScenarioError("scenario has no streets")
    if config.fleet_size > total_street_len:
        raise ScenarioError(
            f"fleet_size {config.fleet_size} exceeds street capacity "
            f"({total_street_len:.0f} m of streets)"
        )

    rng = seeding.substream(config.seed, seeding.PLACEMENT)
    n = config.fleet_size
    pos = np.empty((n, 2))
    axis = np.empty(n, dtype=np.int8)
    dirn = np.empty(n, dtype=np.int8)
    lengths = np.concatenate(
        [np.full(len(ys), config.area_width_m), np.full(len(xs), config.area_height_m)]
    )
    cum = np.cumsum(lengths) / lengths.sum()
    for i in range(n):
        for _ in range(1000):
            street = int(np.searchsorted(cum, rng.random(), side="right"))
            along = rng.uniform(0.0, 1.0)
            if street < len(ys):  # horizontal street
                p = (along * config.area_width_m, ys[street])
                a = 0
            else:
                p = (xs[street - len(ys)], along * config.area_height_m)
                a = 1
            if not obstacles.contains([p])[0]:
                break
        else:
            raise ScenarioError("could not place fleet on obstacle-free street positions")
        pos[i] = p
        axis[i] = a
        dirn[i] = 1 if rng.random() < 0.5 else -1
    speed = rng.uniform(config.speed_min_mps, config.speed_max_mps, size=n)

    vehicles = VehicleState(pos, axis, dirn, speed)
    rngs = [seeding.substream(config.seed, seeding.MOBILITY, i) for i in range(n)]
    return Scenario(config, xs, ys, stops_x, stops_y, obstacles, vehicles, rngs)


_SNAP = 1e-9


def _legal_moves(scn: Scenario, x: float, y: float) -> list[tuple[int, int]]:
    """Directions available at a turn point, in a fixed candidate order."""
    moves = []
    on_h = np.any(np.abs(scn.ys - y) <= _SNAP)
    on_v = np.any(np.abs(scn.xs - x) <= _SNAP)
    w, h = scn.bounds
    if on_h and x < w - _SNAP:
        moves.append((0, 1))
    if on_h and x > _SNAP:
        moves.append((0, -1))
    if on_v and y < h - _SNAP:
        moves.append((1, 1))
    if on_v and y > _SNAP:
        moves.append((1, -1))
    return moves


def _advance_vehicle(scn: Scenario, i: int, dt: float) -> None:
    veh = scn.vehicles
    remaining = veh.speed[i] * dt
    x, y = veh.pos[i]
    axis = int(veh.axis[i])
    dirn = int(veh.dirn[i])
    rng = scn.rngs[i]
    guard = 0
    while remaining > _SNAP:
        guard += 1
        if guard > 10000:
            raise ScenarioError(f"vehicle {i} stuck in mobility stepping")
        stops = scn.stops_x if axis == 0 else scn.stops_y
        coord = x if axis == 0 else y
        if dirn > 0:
            k = int(np.searchsorted(stops, coord + _SNAP, side="right"))
            next_stop = stops[k] if k < len(stops) else None
        else:
            k = int(np.searchsorted(stops, coord - _SNAP, side="left")) - 1
            next_stop = stops[k] if k >= 0 else None
        if next_stop is None:
            # boundary without a stop entry cannot happen (edges are stops)
            raise ScenarioError(f"vehicle {i} ran off the street grid")
        dist = abs(next_stop - coord)
        if remaining < dist - _SNAP:
            coord += dirn * remaining
            remaining = 0.0
        else:
            coord = next_stop  # snap exactly onto the turn point
            remaining -= dist
            if axis == 0:
                x = coord
            else:
                y = coord
            moves = _legal_moves(scn, x, y)
            reverse = (axis, -dirn)
            options = [mv for mv in moves if mv != reverse]
            if not options:
                options = [reverse] if reverse in moves else moves
            if not options:
                raise ScenarioError(f"vehicle {i} reached a point with no legal moves")
            axis, dirn = options[int(rng.integers(len(options)))]
            coord = x if axis == 0 else y
        if axis == 0:
            x = coord
        else:
            y = coord
    veh.pos[i, 0] = x
    veh.pos[i, 1] = y
    veh.axis[i] = axis
    veh.dirn[i] = dirn


def _step_inplace(scn: Scenario, dt: float) -> None:
    for i in range(scn.config.fleet_size):
        _advance_vehicle(scn, i, dt)


def step_mobility(scn: Scenario, dt: float) -> Scenario:
    """Advance all vehicles by dt and return the new scenario state.

    The input scenario is left untouched (its turn streams are cloned), so
    stepping the same state twice gives identical results.
    """
    if dt <= 0:
        raise ScenarioError("dt must be > 0")
    out = replace(
        scn,
        vehicles=scn.vehicles.copy(),
        rngs=[seeding.clone_rng(g) for g in scn.rngs],
    )
    _step_inplace(out, dt)
    return out


def simulate_mobility(config: ScenarioConfig, scn: Scenario | None = None) -> list[VehicleTrace]:
    """Positions of every vehicle at each beacon emission time."""
    if scn is None:
        scn = build_scenario(config)
    else:
        scn = replace(scn, vehicles=scn.vehicles.copy(), rngs=[seeding.clone_rng(g) for g in scn.rngs])
    n_beacons = int(np.floor(config.sim_duration_s / config.beacon_interval_s))
    times = np.arange(n_beacons) * config.beacon_interval_s
    samples = np.empty((n_beacons, config.fleet_size, 2))
    for k in range(n_beacons):
        samples[k] = scn.vehicles.pos
        if k + 1 < n_beacons:
            _step_inplace(scn, config.beacon_interval_s)
    return [
        VehicleTrace(node_id=i, times=times.copy(), positions=samples[:, i, :].copy())
        for i in range(config.fleet_size)
    ]


def vehicle_body_rects(positions: np.ndarray, axes: np.ndarray, length: float, width: float) -> np.ndarray:
    """Axis-aligned body rectangle per vehicle, oriented by movement axis."""
    half_l = length / 2.0
    half_w = width / 2.0
    x = positions[:, 0]
    y = positions[:, 1]
    along_x = axes == 0
    rects = np.empty((positions.shape[0], 4))
    rects[:, 0] = np.where(along_x, x - half_l, x - half_w)
    rects[:, 1] = np.where(along_x, y - half_w, y - half_l)
    rects[:, 2] = np.where(along_x, x + half_l, x + half_w)
    rects[:, 3] = np.where(along_x, y + half_w, y + half_l)
    return rects


def movement_axes(positions: np.ndarray) -> np.ndarray:
    """(t, n) movement axis per sample inferred from the position deltas;
    stationary stretches keep the previous axis."""
    t, n, _ = positions.shape
    axes = np.zeros((t, n), dtype=np.int8)
    if t == 1:
        return axes
    delta = np.abs(np.diff(positions, axis=0))
    moved = delta.sum(axis=2) > 0
    step_axis = (delta[:, :, 1] > delta[:, :, 0]).astype(np.int8)
    axes[0] = step_axis[0]
    for k in range(1, t):
        axes[k] = np.where(moved[k - 1], step_axis[k - 1], axes[k - 1])
    return axes


def traces_to_positions(traces: list[VehicleTrace], times: np.ndarray) -> np.ndarray:
    """(t, n, 2) position tensor sampled from traces at the given times."""
    n = len(traces)
    out = np.empty((len(times), n, 2))
    for i, tr in enumerate(traces):
        for k, t in enumerate(times):
            out[k, i] = tr.position_at(t)
    return out
