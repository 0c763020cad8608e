"""Street grid construction and mobility checks."""

import numpy as np
import pytest

from ghostbeacon.scenario import (
    ScenarioConfig,
    ScenarioError,
    build_scenario,
    movement_axes,
    simulate_mobility,
    step_mobility,
    street_coords,
    vehicle_body_rects,
)


def small_config(**kw):
    defaults = dict(
        area_width_m=600.0,
        area_height_m=600.0,
        sim_duration_s=30.0,
        fleet_size=12,
        grid_spacing_m=200.0,
        seed=7,
    )
    defaults.update(kw)
    return ScenarioConfig(**defaults)


class TestBuildScenario:
    def test_street_count_formula(self):
        cfg = ScenarioConfig(
            area_width_m=2000.0, area_height_m=2000.0, grid_spacing_m=200.0, fleet_size=10, seed=1
        )
        scn = build_scenario(cfg)
        assert len(scn.xs) == 11
        assert len(scn.ys) == 11
        assert street_coords(2000.0, 200.0)[-1] == 2000.0

    def test_seeded_placement_reproducible(self):
        cfg = ScenarioConfig(fleet_size=150, seed=7)
        a = build_scenario(cfg)
        b = build_scenario(cfg)
        assert np.array_equal(a.vehicles.pos, b.vehicles.pos)
        assert np.array_equal(a.vehicles.speed, b.vehicles.speed)

    def test_initial_positions_avoid_obstacles(self):
        scn = build_scenario(ScenarioConfig(fleet_size=150, seed=3))
        assert not scn.obstacles.contains(scn.vehicles.pos).any()

    def test_positions_on_streets(self):
        scn = build_scenario(small_config())
        pos = scn.vehicles.pos
        on_v = np.min(np.abs(pos[:, 0][:, None] - scn.xs[None, :]), axis=1) < 1e-9
        on_h = np.min(np.abs(pos[:, 1][:, None] - scn.ys[None, :]), axis=1) < 1e-9
        assert np.all(on_v | on_h)

    def test_rejects_oversized_fleet(self):
        with pytest.raises(ScenarioError):
            build_scenario(small_config(fleet_size=10**7))

    def test_rejects_bad_area(self):
        with pytest.raises(ScenarioError):
            build_scenario(small_config(area_width_m=-5.0))

    def test_speeds_within_bounds(self):
        scn = build_scenario(small_config(fleet_size=50, area_width_m=2000, area_height_m=2000))
        assert np.all(scn.vehicles.speed >= scn.config.speed_min_mps)
        assert np.all(scn.vehicles.speed <= scn.config.speed_max_mps)


class TestMobility:
    def test_mid_segment_advance(self):
        scn = build_scenario(small_config(fleet_size=1))
        scn.vehicles.pos[0] = (50.0, 200.0)
        scn.vehicles.axis[0] = 0
        scn.vehicles.dirn[0] = 1
        scn.vehicles.speed[0] = 10.0
        out = step_mobility(scn, 1.0)
        assert out.vehicles.pos[0, 0] == pytest.approx(60.0)
        assert out.vehicles.pos[0, 1] == 200.0

    def test_zero_speed_is_identity(self):
        scn = build_scenario(small_config(fleet_size=2))
        scn.vehicles.speed[:] = 0.0
        out = step_mobility(scn, 5.0)
        assert np.array_equal(out.vehicles.pos, scn.vehicles.pos)

    def test_step_does_not_mutate_input(self):
        scn = build_scenario(small_config())
        before = scn.vehicles.pos.copy()
        a = step_mobility(scn, 1.0)
        b = step_mobility(scn, 1.0)
        assert np.array_equal(scn.vehicles.pos, before)
        assert np.array_equal(a.vehicles.pos, b.vehicles.pos)

    def test_positions_stay_on_streets_over_long_run(self):
        # 1800 one-second steps; every sampled position on a street line
        cfg = small_config(fleet_size=8, sim_duration_s=1800.0)
        scn = build_scenario(cfg)
        for _ in range(1800):
            scn = step_mobility(scn, 1.0)
            pos = scn.vehicles.pos
            on_v = np.min(np.abs(pos[:, 0][:, None] - scn.xs[None, :]), axis=1) < 1e-6
            on_h = np.min(np.abs(pos[:, 1][:, None] - scn.ys[None, :]), axis=1) < 1e-6
            assert np.all(on_v | on_h)
            assert np.all(pos >= -1e-9)
            assert np.all(pos[:, 0] <= cfg.area_width_m + 1e-9)
            assert np.all(pos[:, 1] <= cfg.area_height_m + 1e-9)

    def test_traces_match_config(self):
        cfg = small_config(sim_duration_s=20.0, beacon_interval_s=1.0)
        traces = simulate_mobility(cfg)
        assert len(traces) == cfg.fleet_size
        for tr in traces:
            assert tr.times.shape == (20,)
            assert np.all(np.diff(tr.times) > 0)

    def test_traces_deterministic(self):
        cfg = small_config(sim_duration_s=15.0)
        a = simulate_mobility(cfg)
        b = simulate_mobility(cfg)
        for ta, tb in zip(a, b):
            assert np.array_equal(ta.positions, tb.positions)


class TestVehicleBodies:
    def test_rect_orientation_follows_axis(self):
        pos = np.array([[100.0, 200.0], [300.0, 400.0]])
        axes = np.array([0, 1], dtype=np.int8)
        rects = vehicle_body_rects(pos, axes, length=4.0, width=2.0)
        assert rects[0].tolist() == [98.0, 199.0, 102.0, 201.0]
        assert rects[1].tolist() == [299.0, 398.0, 301.0, 402.0]

    def test_movement_axes_from_deltas(self):
        pos = np.zeros((3, 2, 2))
        pos[1, 0] = (10.0, 0.0)  # vehicle 0 moves along x
        pos[2, 0] = (20.0, 0.0)
        pos[1, 1] = (0.0, 10.0)  # vehicle 1 moves along y
        pos[2, 1] = (0.0, 20.0)
        axes = movement_axes(pos)
        assert axes[1, 0] == 0
        assert axes[1, 1] == 1
