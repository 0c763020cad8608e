"""ROC/AUC computation, detection-rate extraction and AMI comparisons.

The ROC sweep treats every distinct score as a threshold (samples scoring
at or above a threshold are flagged anomalous); tied scores move
atomically, and the trapezoidal AUC then awards half credit for ties,
matching the pairwise-probability oracle exactly.

AMI follows the hypergeometric adjustment: (MI - E[MI]) / (mean(H_a, H_b)
- E[MI]).  Loss distributions are compared by rank-pairing two equal-size
samples and labeling every element with its decile in the pooled values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln


@dataclass
class RocReport:
    thresholds: np.ndarray  # descending; thresholds[0] is +inf
    fpr: np.ndarray  # non-decreasing from 0 to 1
    tpr: np.ndarray
    auc: float
    detector: str = ""
    dataset: str = ""

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


@dataclass
class LossComparison:
    ami: float
    mean_train: float
    mean_val: float
    var_train: float
    var_val: float


def roc_curve(scores_normal, scores_anom, detector: str = "", dataset: str = "") -> RocReport:
    """Full threshold sweep; score >= threshold means flagged anomalous."""
    sn = np.sort(np.asarray(scores_normal, dtype=np.float64))
    sa = np.sort(np.asarray(scores_anom, dtype=np.float64))
    if sn.size == 0 or sa.size == 0:
        raise ValueError("both score lists must be non-empty")
    thr = np.unique(np.concatenate([sn, sa]))[::-1]
    fp = sn.size - np.searchsorted(sn, thr, side="left")
    tp = sa.size - np.searchsorted(sa, thr, side="left")
    thresholds = np.concatenate([[np.inf], thr])
    fpr = np.concatenate([[0.0], fp / sn.size])
    tpr = np.concatenate([[0.0], tp / sa.size])
    auc = float(np.trapezoid(tpr, fpr))
    return RocReport(
        thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc, detector=detector, dataset=dataset
    )


def auc_oracle(scores_normal, scores_anom) -> float:
    """Brute-force pairwise AUC: P(anomalous score > normal score), ties
    counting one half.  Independent check for roc_curve's trapezoid."""
    sn = np.asarray(scores_normal, dtype=np.float64)
    sa = np.asarray(scores_anom, dtype=np.float64)
    if sn.size == 0 or sa.size == 0:
        raise ValueError("both score lists must be non-empty")
    total = 0.0
    chunk = max(1, 4_000_000 // max(sn.size, 1))
    for s in range(0, sa.size, chunk):
        diff = sa[s : s + chunk, None] - sn[None, :]
        total += np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return total / (sa.size * sn.size)


def tpr_at_fpr(report: RocReport, target_fpr: float = 0.2) -> float:
    """Detection rate at the target false-positive rate, linearly
    interpolated along the curve (vertical segments resolve upward)."""
    fpr = report.fpr
    tpr = report.tpr
    keep = np.flatnonzero(np.concatenate([fpr[1:] != fpr[:-1], [True]]))
    return float(np.interp(target_fpr, fpr[keep], tpr[keep]))


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def _expected_mi(a: np.ndarray, b: np.ndarray, n: int) -> float:
    """E[MI] over random contingency tables with fixed margins."""
    emi = 0.0
    log_n = np.log(n)
    gl_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            term = (nij / n) * (log_n + np.log(nij) - np.log(ai) - np.log(bj))
            log_p = (
                gammaln(ai + 1)
                + gammaln(bj + 1)
                + gammaln(n - ai + 1)
                + gammaln(n - bj + 1)
                - gl_n
                - gammaln(nij + 1)
                - gammaln(ai - nij + 1)
                - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def ami(labels_a, labels_b) -> float:
    """Adjusted mutual information between two labelings.

    Two constant labelings score 1; a constant against anything else
    scores 0 (zero-entropy convention).
    """
    la = np.asarray(labels_a)
    lb = np.asarray(labels_b)
    if la.shape != lb.shape or la.ndim != 1:
        raise ValueError("labelings must be 1-d and of equal length")
    n = la.size
    if n < 2:
        raise ValueError("need at least two elements")
    _, ia = np.unique(la, return_inverse=True)
    _, ib = np.unique(lb, return_inverse=True)
    ka = int(ia.max()) + 1
    kb = int(ib.max()) + 1
    cont = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(cont, (ia, ib), 1)
    a = cont.sum(axis=1)
    b = cont.sum(axis=0)
    h_a = _entropy(a, n)
    h_b = _entropy(b, n)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    nz = cont > 0
    nij = cont[nz].astype(np.float64)
    outer = (a[:, None] * b[None, :])[nz].astype(np.float64)
    mi = float(np.sum((nij / n) * np.log(n * nij / outer)))
    emi = _expected_mi(a, b, n)
    denom = 0.5 * (h_a + h_b) - emi
    if abs(denom) < 1e-15:
        return 0.0
    return (mi - emi) / denom


def decile_labels(values: np.ndarray, pooled: np.ndarray) -> np.ndarray:
    """Label values 0..9 by their decile in the pooled distribution."""
    edges = np.quantile(pooled, np.arange(1, 10) / 10.0)
    return np.searchsorted(edges, values, side="right")


def compare_loss_distributions(train_losses, val_losses, seed: int = 0) -> LossComparison:
    """Rank-paired pooled-decile AMI between two loss samples.

    The larger sample is subsampled (seeded) to the smaller one's size,
    both are sorted and paired by rank, every element is labeled with its
    decile in the pooled values, and the two label sequences go through
    ami().  Means and variances describe the full input samples.
    """
    tr = np.asarray(train_losses, dtype=np.float64).ravel()
    va = np.asarray(val_losses, dtype=np.float64).ravel()
    if tr.size == 0 or va.size == 0:
        raise ValueError("both loss samples must be non-empty")
    rng = np.random.default_rng(seed)
    n = min(tr.size, va.size)
    tr_s = np.sort(rng.choice(tr, size=n, replace=False) if tr.size > n else tr)
    va_s = np.sort(rng.choice(va, size=n, replace=False) if va.size > n else va)
    pooled = np.concatenate([tr_s, va_s])
    score = ami(decile_labels(tr_s, pooled), decile_labels(va_s, pooled))
    return LossComparison(
        ami=score,
        mean_train=float(tr.mean()),
        mean_val=float(va.mean()),
        var_train=float(tr.var()),
        var_val=float(va.var()),
    )
