"""Linear one-class SVM baseline trained by primal subgradient descent.

Objective over normal training vectors x_i:

    min_{w, rho}  0.5 ||w||^2 + (1 / (nu n)) sum_i max(0, rho - w . x_i) - rho

The anomaly score of a sample y is rho - w . y (positive = outside the
learned half-space).  The nu-property of the optimum makes roughly a
nu-fraction of training points fall outside.  Steps decay as 1/sqrt(t)
and the returned model averages the second half of the iterates, which is
what makes the nu-property hold tightly at finite epoch counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class OcsvmModel:
    w: np.ndarray
    rho: float
    nu: float


def train_ocsvm(
    train: np.ndarray,
    nu: float = 0.1,
    epochs: int = 500,
    lr: float = 0.01,
    seed: int = 0,
) -> OcsvmModel:
    """Fit the primal objective by full-batch subgradient descent.

    The pass is deterministic; the seed parameter is accepted for
    interface symmetry with the other trainers.
    """
    del seed  # full-batch descent draws nothing
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must be in (0, 1]")
    x = np.asarray(train, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("train must be a non-empty (n, d) array")
    n = x.shape[0]
    w = np.zeros(x.shape[1])
    rho = 0.0
    w_acc = np.zeros_like(w)
    rho_acc = 0.0
    n_acc = 0
    first_obj = None
    for t in range(epochs):
        margins = x @ w
        viol = margins < rho
        obj = 0.5 * float(w @ w) + float(np.sum(rho - margins[viol])) / (nu * n) - rho
        if first_obj is None:
            first_obj = abs(obj) + 1.0
        if not np.isfinite(obj) or obj > 10.0 * first_obj:
            raise TrainingDiverged(f"objective {obj:.3g} diverged; reduce the learning rate")
        g_w = w - x[viol].sum(axis=0) / (nu * n)
        g_rho = np.count_nonzero(viol) / (nu * n) - 1.0
        step = lr / np.sqrt(t + 1.0)
        w = w - step * g_w
        rho = rho - step * g_rho
        if t >= epochs // 2:
            w_acc += w
            rho_acc += rho
            n_acc += 1
    return OcsvmModel(w=w_acc / n_acc, rho=rho_acc / n_acc, nu=nu)


def score_ocsvm(model: OcsvmModel, y):
    """Continuous anomaly score rho - w . y; accepts one vector or a batch."""
    y = np.asarray(y, dtype=np.float64)
    s = model.rho - y @ model.w
    return float(s) if y.ndim == 1 else s


def outlier_fraction(model: OcsvmModel, x) -> float:
    """Fraction of rows falling strictly outside the half-space."""
    return float(np.mean(np.asarray(x) @ model.w < model.rho))
