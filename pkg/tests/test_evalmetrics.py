"""ROC/AUC, detection-rate and AMI checks against independent oracles."""

import numpy as np
import pytest

from ghostbeacon.evalmetrics import (
    ami,
    auc_oracle,
    compare_loss_distributions,
    decile_labels,
    roc_curve,
    tpr_at_fpr,
)


class TestRocCurve:
    def test_perfect_separation(self):
        r = roc_curve([0.1, 0.2], [0.3, 0.4])
        assert r.auc == 1.0

    def test_interleaved_hand_case(self):
        # pairs: (.2>.1) (.4>.1) (.2<.3) (.4>.3) -> 3 wins of 4
        r = roc_curve([0.1, 0.3], [0.2, 0.4])
        assert r.auc == pytest.approx(0.75)

    def test_identical_multisets_are_chance(self):
        scores = [0.2, 0.5, 0.9, 0.9, 1.4]
        assert roc_curve(scores, scores).auc == pytest.approx(0.5)

    def test_curve_shape_invariants(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            r = roc_curve(rng.normal(size=30), rng.normal(0.5, 1.2, size=40))
            assert r.thresholds[0] == np.inf
            assert np.all(np.diff(r.thresholds) < 0)
            assert (r.fpr[0], r.tpr[0]) == (0.0, 0.0)
            assert (r.fpr[-1], r.tpr[-1]) == (1.0, 1.0)
            assert np.all(np.diff(r.fpr) >= 0)
            assert np.all(np.diff(r.tpr) >= 0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            roc_curve([], [1.0])


class TestAucOracle:
    def test_matches_roc_curve_on_random_instances(self):
        # brute-force pairwise probability vs trapezoid, 100 instances
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(2, 60))
            m = int(rng.integers(2, 60))
            normal = np.round(rng.normal(size=n), 2)  # rounding forces ties
            anom = np.round(rng.normal(0.3, 1.0, size=m), 2)
            assert roc_curve(normal, anom).auc == pytest.approx(
                auc_oracle(normal, anom), abs=1e-12
            )

    def test_all_tied(self):
        assert auc_oracle([1.0, 1.0], [1.0, 1.0, 1.0]) == 0.5

    def test_single_pair(self):
        assert auc_oracle([0.0], [1.0]) == 1.0


class TestTprAtFpr:
    def test_perfect_detector(self):
        r = roc_curve([0.0, 0.1], [5.0, 6.0])
        assert tpr_at_fpr(r, 0.2) == 1.0
        assert tpr_at_fpr(r, 0.01) == 1.0

    def test_diagonal_detector(self):
        rng = np.random.default_rng(2)
        scores = rng.normal(size=4000)
        r = roc_curve(scores[:2000], scores[2000:])
        assert tpr_at_fpr(r, 0.2) == pytest.approx(0.2, abs=0.05)

    def test_hand_interpolation(self):
        # piecewise curve {(0,0), (0.1,0.5), (0.3,0.9)}: TPR(0.2) = 0.7
        from ghostbeacon.evalmetrics import RocReport

        r = RocReport(
            thresholds=np.array([np.inf, 2.0, 1.0]),
            fpr=np.array([0.0, 0.1, 0.3]),
            tpr=np.array([0.0, 0.5, 0.9]),
            auc=0.0,
        )
        assert tpr_at_fpr(r, 0.2) == pytest.approx(0.7)

    def test_monotone_in_target(self):
        rng = np.random.default_rng(3)
        r = roc_curve(rng.normal(size=200), rng.normal(0.8, 1.0, size=200))
        values = [tpr_at_fpr(r, t) for t in np.linspace(0.0, 1.0, 21)]
        assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


class TestAmi:
    def test_identical_labelings(self):
        labels = np.array([0, 0, 1, 1, 2, 2, 2, 0])
        assert ami(labels, labels) == pytest.approx(1.0)

    def test_constant_vs_arbitrary_is_zero(self):
        a = np.zeros(50, dtype=int)
        b = np.arange(50) % 5
        assert ami(a, b) == 0.0
        assert ami(b, a) == 0.0

    def test_both_constant_is_one(self):
        assert ami(np.zeros(10), np.ones(10)) == 1.0

    def test_independent_labelings_near_zero(self):
        # chance adjustment centers random agreement at 0
        rng = np.random.default_rng(4)
        a = rng.integers(0, 10, size=1000)
        b = rng.integers(0, 10, size=1000)
        assert abs(ami(a, b)) < 0.05

    def test_symmetry_and_relabeling_invariance(self):
        rng = np.random.default_rng(5)
        a = rng.integers(0, 4, size=300)
        b = (a + rng.integers(0, 2, size=300)) % 4
        assert ami(a, b) == pytest.approx(ami(b, a), abs=1e-12)
        remap = np.array([3, 0, 2, 1])
        assert ami(remap[a], b) == pytest.approx(ami(a, b), abs=1e-12)

    def test_expected_mi_against_permutation_oracle(self):
        # Monte Carlo oracle: MI under label permutations approximates the
        # analytic hypergeometric E[MI], so mean permuted AMI must sit
        # near zero (well inside +-0.02 at this size)
        rng = np.random.default_rng(6)
        a = rng.integers(0, 5, size=600)
        b = rng.integers(0, 5, size=600)
        perms = [ami(a, rng.permutation(b)) for _ in range(60)]
        assert abs(np.mean(perms)) < 0.02

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ami([0, 1], [0, 1, 2])


class TestCompareLossDistributions:
    def test_exact_copy_gives_unit_ami(self):
        rng = np.random.default_rng(7)
        losses = rng.gamma(4.0, 0.01, size=800)
        cmp = compare_loss_distributions(losses, losses.copy())
        assert cmp.ami == pytest.approx(1.0)
        assert cmp.mean_train == pytest.approx(losses.mean())
        assert cmp.var_val == pytest.approx(losses.var())

    def test_similar_distributions_score_high(self):
        rng = np.random.default_rng(8)
        tr = rng.gamma(4.0, 0.01, size=2000)
        va = rng.gamma(4.0, 0.01, size=500)
        assert compare_loss_distributions(tr, va, seed=0).ami > 0.8

    def test_rank_pairing_is_relabel_invariant_under_pure_shift(self):
        # a hard shift relocates every element to a different pooled decile
        # but keeps the rank pairing bijective, and AMI, being invariant to
        # relabeling, stays at 1; association, not agreement, is measured
        rng = np.random.default_rng(9)
        tr = rng.normal(0.0, 1.0, size=1000)
        edges = np.quantile(tr, np.arange(1, 10) / 10.0)
        width = edges[-1] - edges[0]
        cmp = compare_loss_distributions(tr, tr + 10 * width, seed=0)
        assert cmp.ami > 0.9

    def test_unrelated_samples_score_low(self):
        # shuffling destroys the rank correspondence between the deciles
        rng = np.random.default_rng(10)
        tr = rng.normal(0.0, 1.0, size=1000)
        va = rng.normal(0.0, 1.0, size=1000) ** 3
        labels_tr = decile_labels(np.sort(tr), np.concatenate([np.sort(tr), np.sort(va)]))
        rng.shuffle(labels_tr)
        labels_va = decile_labels(np.sort(va), np.concatenate([np.sort(tr), np.sort(va)]))
        assert ami(labels_tr, labels_va) < 0.1

    def test_statistics_echo_inputs(self):
        tr = np.array([1.0, 2.0, 3.0])
        va = np.array([2.0, 4.0])
        cmp = compare_loss_distributions(tr, va, seed=0)
        assert cmp.mean_train == pytest.approx(2.0)
        assert cmp.mean_val == pytest.approx(3.0)
        assert cmp.var_train == pytest.approx(np.var(tr))
        assert cmp.var_val == pytest.approx(np.var(va))
