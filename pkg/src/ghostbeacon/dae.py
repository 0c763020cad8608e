"""Dense over-complete autoencoder trained to reconstruct normal traffic.

Seven layers: input(5) -> 128 -> 64 -> bottleneck(20) -> 64 -> 128 ->
output(5), fully connected, ReLU after every hidden layer except the
bottleneck; the bottleneck and the output stay linear.  The first hidden
layer is wider than the input, acting as an interpolation stage.

The per-sample loss is the unsquared euclidean norm ||x - x'||; batches
use the mean of per-sample norms.  Training is plain mini-batch gradient
descent (no momentum, no dropout, no regularization).  The anomaly score
of a sample is its reconstruction norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import dae_ops


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class Architecture:
    layer_widths: tuple[int, ...] = (5, 128, 64, 20, 64, 128, 5)

    def validate(self) -> None:
        w = self.layer_widths
        if len(w) != 7:
            raise ValueError("architecture needs exactly seven layers")
        if w[0] != 5 or w[-1] != 5:
            raise ValueError("input and output widths must be 5")
        if w[1] <= w[0]:
            raise ValueError("first hidden layer must be wider than the input")
        if w[3] != 20:
            raise ValueError("bottleneck width must be 20")
        if any(v <= 0 for v in w):
            raise ValueError("layer widths must be positive")

    @property
    def activation_mask(self) -> tuple[bool, ...]:
        """Whether ReLU follows each of the six affine stages; the
        bottleneck (stage 2) and the output (stage 5) are linear."""
        return (True, True, False, True, True, False)


@dataclass
class DaeModel:
    arch: Architecture
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "DaeModel":
        return DaeModel(
            arch=self.arch,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class TrainReport:
    epoch_losses: list[float]
    val_losses: np.ndarray
    hyperparams: dict = field(default_factory=dict)


def init_model(arch: Architecture, seed: int = 0) -> DaeModel:
    """Zero-mean gaussian weights scaled by 1/sqrt(fan_in), zero biases."""
    arch.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    widths = arch.layer_widths
    weights = []
    biases = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return DaeModel(arch=arch, weights=weights, biases=biases)


def forward(model: DaeModel, x):
    """Reconstruction and the cache backward() needs.

    x is one sample (5,) or a batch (n, 5); the reconstruction matches the
    input shape.  The cache holds the batch input plus pre-activation and
    post-activation values per stage.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("input to forward() must be finite")
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    mask = model.arch.activation_mask
    pre = []
    post = []
    a = xb
    for w, b, act in zip(model.weights, model.biases, mask):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if act else z
        post.append(a)
    cache = {"x": xb, "pre": pre, "post": post}
    out = post[-1]
    return (out[0] if single else out), cache


def loss(x, x_prime) -> float:
    """Euclidean norm of the residual; batches average per-sample norms."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_prime = np.atleast_2d(np.asarray(x_prime, dtype=np.float64))
    if x.shape != x_prime.shape:
        raise ValueError("shape mismatch between input and reconstruction")
    return float(np.mean(np.sqrt(np.sum((x - x_prime) ** 2, axis=1))))


def backward(model: DaeModel, cache: dict, x):
    """Exact gradients of the (batch-mean) reconstruction norm.

    Zero residuals contribute the zero subgradient.  Returns (dW, db)
    lists mirroring the parameter shapes.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if xb.shape != cache["x"].shape or not np.array_equal(xb, cache["x"]):
        raise ValueError("cache does not belong to this input")
    mask = model.arch.activation_mask
    pre = cache["pre"]
    post = cache["post"]
    n = xb.shape[0]
    r = post[-1] - xb
    norms = np.sqrt(np.sum(r * r, axis=1))
    scale = np.where(norms > 0.0, 1.0 / (norms * n), 0.0)
    delta = r * scale[:, None]
    d_w = [None] * len(model.weights)
    d_b = [None] * len(model.biases)
    for k in range(len(model.weights) - 1, -1, -1):
        a_prev = cache["x"] if k == 0 else post[k - 1]
        d_w[k] = a_prev.T @ delta
        d_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k].T
            if mask[k - 1]:
                delta = np.where(pre[k - 1] > 0.0, delta, 0.0)
    return d_w, d_b


def score(model: DaeModel, y):
    """Anomaly score: reconstruction norm (higher = more anomalous).

    Accepts one sample or a batch; batch input returns per-sample scores.
    """
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    norms = dae_ops.forward_norms(model.weights, model.biases, np.atleast_2d(y))
    return float(norms[0]) if single else norms


def train(
    model: DaeModel,
    train_set: np.ndarray,
    val_set: np.ndarray,
    epochs: int = 200,
    lr: float = 0.00095,
    batch_size: int = 64,
    seed: int = 0,
) -> tuple[DaeModel, TrainReport]:
    """Plain mini-batch gradient descent; inputs must already be scaled.

    Records the mean train loss per epoch and the final per-sample
    validation losses.  Aborts when an epoch loss exceeds ten times the
    first epoch's loss.
    """
    x_tr = np.ascontiguousarray(train_set, dtype=np.float64)
    x_va = np.ascontiguousarray(val_set, dtype=np.float64)
    if x_tr.ndim != 2 or x_tr.shape[1] != model.arch.layer_widths[0]:
        raise ValueError("train_set must be (n, input_width)")
    out = model.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    epoch_losses: list[float] = []
    for _ in range(epochs):
        perm = rng.permutation(x_tr.shape[0])
        mean_loss = dae_ops.epoch_update(out.weights, out.biases, x_tr, perm, batch_size, lr)
        epoch_losses.append(float(mean_loss))
        if not np.isfinite(mean_loss) or mean_loss > 10.0 * epoch_losses[0]:
            raise TrainingDiverged(
                f"epoch loss {mean_loss:.3g} exceeded 10x the initial loss "
                f"{epoch_losses[0]:.3g}; reduce the learning rate"
            )
    val_losses = dae_ops.forward_norms(out.weights, out.biases, x_va) if x_va.size else np.empty(0)
    report = TrainReport(
        epoch_losses=epoch_losses,
        val_losses=val_losses,
        hyperparams={
            "epochs": epochs,
            "lr": lr,
            "batch_size": batch_size,
            "seed": seed if isinstance(seed, int) else "generator",
            "layer_widths": list(model.arch.layer_widths),
        },
    )
    return out, report
