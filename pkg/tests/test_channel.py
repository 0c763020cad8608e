"""Link budget, fading and delivery-decision checks.

Expected values come from independent hand/numpy computations:
FSPL(1 m, 5.9 GHz, c = 3e8) = 20*log10(4*pi*5.9e9/3e8) = 47.8588 dB,
10*2.4*log10(100) = 48 dB, budget 27+9+9-3 = 42 dBm.
"""

import numpy as np
import pytest

from ghostbeacon.channel import (
    BELOW_SENSITIVITY,
    ChannelParams,
    compute_rssi,
    delivery_decision,
    delivery_verdicts,
    fspl_reference_db,
    obstacle_loss,
    packet_error_rate,
    path_loss_det,
    sample_rician_gain,
)
from ghostbeacon.scenario import ObstacleSet

PARAMS = ChannelParams()


def make_obstacles(rects, wall=6.0, beta=1.0):
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    m = rects.shape[0]
    return ObstacleSet(rects=rects, wall_db=np.full(m, wall), beta=np.full(m, beta))


class TestPathLoss:
    def test_reference_free_space_value(self):
        assert fspl_reference_db(PARAMS) == pytest.approx(47.8588, abs=0.01)
        assert path_loss_det(1.0, PARAMS) == pytest.approx(47.8588, abs=0.01)

    def test_loss_at_100m(self):
        # 47.86 + 10 * 2.4 * log10(100) = 47.86 + 48.00
        assert path_loss_det(100.0, PARAMS) == pytest.approx(95.8588, abs=0.01)

    def test_loss_at_reference_distance_is_fspl_exactly(self):
        assert path_loss_det(PARAMS.reference_distance_m, PARAMS) == fspl_reference_db(PARAMS)

    def test_below_reference_clamps_and_flags(self):
        loss, clamped = path_loss_det(0.25, PARAMS, return_clamped=True)
        assert clamped
        assert loss == path_loss_det(1.0, PARAMS)
        loss2, clamped2 = path_loss_det(5.0, PARAMS, return_clamped=True)
        assert not clamped2


class TestRicianGain:
    def test_pure_los_limit(self):
        # enormous K-factor suppresses the scattered part entirely
        rng = np.random.default_rng(0)
        gains = sample_rician_gain(500.0, rng, size=100)
        assert np.allclose(gains, 1.0, atol=1e-12)

    def test_unit_mean_monte_carlo(self):
        rng = np.random.default_rng(1)
        gains = sample_rician_gain(8.0, rng, size=1_000_000)
        assert abs(gains.mean() - 1.0) < 0.01

    def test_k_factor_recovered_from_moments(self):
        # var(g) = 2*a2*s + s^2 with a2 = K/(K+1), s = 1/(K+1); invert the
        # first two moments and compare against the configured K in dB
        rng = np.random.default_rng(2)
        gains = sample_rician_gain(8.0, rng, size=1_000_000)
        m1 = gains.mean()
        v = gains.var()
        s = m1 - np.sqrt(m1 * m1 - v)
        k_hat = (m1 - s) / s
        assert abs(10 * np.log10(k_hat) - 8.0) < 0.5

    def test_seeded_determinism(self):
        a = sample_rician_gain(8.0, np.random.default_rng(42), size=1000)
        b = sample_rician_gain(8.0, np.random.default_rng(42), size=1000)
        assert np.array_equal(a, b)


class TestObstacleLoss:
    def test_clear_path(self):
        obstacles = make_obstacles([(50.0, 50.0, 70.0, 70.0)])
        assert obstacle_loss((0.0, 0.0), (40.0, 0.0), obstacles) == 0.0

    def test_full_pass_through_building(self):
        # crossing a 20 m deep building: 2 walls * 6 dB + 20 m * 1 dB/m
        obstacles = make_obstacles([(40.0, -10.0, 60.0, 10.0)])
        loss = obstacle_loss((0.0, 0.0), (100.0, 0.0), obstacles)
        assert loss == pytest.approx(32.0, abs=1e-9)

    def test_tangent_path_counts_nothing(self):
        # path running exactly along the rectangle edge
        obstacles = make_obstacles([(40.0, 0.0, 60.0, 20.0)])
        assert obstacle_loss((0.0, 0.0), (100.0, 0.0), obstacles) == 0.0

    def test_corner_clip(self):
        # diagonal cutting one corner: enters at (0, 7), exits at (3, 10),
        # so 2 crossings plus a 3*sqrt(2) interior run
        obstacles = make_obstacles([(0.0, 0.0, 10.0, 10.0)])
        loss = obstacle_loss((-2.0, 5.0), (5.0, 12.0), obstacles)
        assert loss == pytest.approx(12.0 + 3.0 * np.sqrt(2.0), abs=1e-9)

    def test_corner_graze_counts_nothing(self):
        # diagonal passing exactly through the corner point
        obstacles = make_obstacles([(0.0, 0.0, 10.0, 10.0)])
        assert obstacle_loss((-2.0, 8.0), (8.0, 18.0), obstacles) == 0.0


class TestComputeRssi:
    def test_link_budget_at_100m(self):
        rssi = compute_rssi((0.0, 0.0), (100.0, 0.0), PARAMS, fading_gain=1.0)
        assert rssi == pytest.approx(-53.8588, abs=0.01)

    def test_obstructed_budget(self):
        obstacles = make_obstacles([(40.0, -10.0, 60.0, 10.0)])
        rssi = compute_rssi((0.0, 0.0), (100.0, 0.0), PARAMS, obstacles=obstacles, fading_gain=1.0)
        assert rssi == pytest.approx(-85.8588, abs=0.01)

    def test_monotone_in_distance_with_pinned_fading(self):
        dists = np.linspace(1.0, 3000.0, 200)
        values = [compute_rssi((0.0, 0.0), (d, 0.0), PARAMS, fading_gain=1.0) for d in dists]
        assert np.all(np.diff(values) < 0)

    def test_closed_form_budget_match(self):
        # independent budget recomputation to 1e-9 dB across the range
        for d in np.linspace(1.0, 3000.0, 157):
            expected = (
                27.0 + 9.0 + 9.0 - 3.0
                - (20 * np.log10(4 * np.pi * 5.9e9 / 3e8) + 24.0 * np.log10(d))
            )
            got = compute_rssi((0.0, 0.0), (d, 0.0), PARAMS, fading_gain=1.0)
            assert got == pytest.approx(expected, abs=1e-9)

    def test_coincident_positions_use_reference_distance(self):
        rssi = compute_rssi((5.0, 5.0), (5.0, 5.0), PARAMS, fading_gain=1.0)
        assert rssi == pytest.approx(PARAMS.budget_dbm - fspl_reference_db(PARAMS), abs=1e-12)


class TestDeliveryDecision:
    def test_below_sensitivity(self):
        out = delivery_decision(-90.0, PARAMS, 1120, noise_dbm=-110.0, u=0.5)
        assert out.verdict == "BelowSensitivity"
        assert out.rssi < PARAMS.sensitivity_dbm

    def test_below_snir(self):
        out = delivery_decision(-85.0, PARAMS, 1120, noise_dbm=-92.0, u=0.5)
        assert out.verdict == "BelowSnir"
        assert out.snir == pytest.approx(7.0)

    def test_high_snir_delivers(self):
        # snir 50 dB: BER = Q(sqrt(2e5)) underflows, PER < 1e-12
        out = delivery_decision(-60.0, PARAMS, 1120, noise_dbm=-110.0, u=0.5)
        assert out.verdict == "Delivered"
        assert out.per < 1e-12

    def test_per_drop_when_uniform_below_per(self):
        # snir slightly above threshold keeps a small but nonzero PER
        out = delivery_decision(-85.0, PARAMS, 1120, noise_dbm=-95.5, u=0.0)
        assert out.per > 0
        assert out.verdict == "PerDrop"

    def test_packet_error_rate_monotone_in_snir(self):
        snirs = np.linspace(0.0, 20.0, 50)
        per = packet_error_rate(snirs, 1120)
        assert np.all(np.diff(per) <= 0)
        assert per[0] > 0.999
        assert per[-1] < 1e-6

    def test_cascade_exclusive_and_consistent(self):
        rng = np.random.default_rng(3)
        rssi = rng.uniform(-120, -40, size=20000)
        noise = rng.normal(-110, 3, size=20000)
        u = rng.random(20000)
        verdict, snir, per = delivery_verdicts(rssi, noise, u, PARAMS, 1120)
        assert set(np.unique(verdict)).issubset({0, 1, 2, 3})
        below_sens = verdict == 1
        assert np.all(rssi[below_sens] < PARAMS.sensitivity_dbm)
        below_snir = verdict == 2
        assert np.all(rssi[below_snir] >= PARAMS.sensitivity_dbm)
        assert np.all(snir[below_snir] < PARAMS.snir_threshold_db)
        rest = (verdict == 0) | (verdict == 3)
        assert np.all(snir[rest] >= PARAMS.snir_threshold_db)
        delivered = verdict == 0
        assert np.all(u[delivered] >= per[delivered])

    def test_delivery_rate_monotone_in_distance(self):
        # empirical delivery over 1e4 draws per distance, no obstacles
        rng = np.random.default_rng(4)
        rates = []
        for d in (200.0, 800.0, 1600.0, 2400.0, 3200.0):
            loss = path_loss_det(d, PARAMS)
            gains = sample_rician_gain(PARAMS.rician_k_db, rng, size=10000)
            rssi = PARAMS.budget_dbm - loss + 10 * np.log10(gains)
            noise = rng.normal(-110, 3, size=10000)
            u = rng.random(10000)
            verdict, _, _ = delivery_verdicts(rssi, noise, u, PARAMS, 1120)
            rates.append(np.mean(verdict == 0))
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_rejects_nonpositive_bits(self):
        with pytest.raises(ValueError):
            delivery_decision(-60.0, PARAMS, 0, noise_dbm=-110.0, u=0.5)


def test_below_sensitivity_example_verdict_code():
    verdict, _, _ = delivery_verdicts(
        np.array([-90.0]), np.array([-110.0]), np.array([0.5]), PARAMS, 1120
    )
    assert verdict[0] == BELOW_SENSITIVITY
