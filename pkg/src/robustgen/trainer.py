"""Feed-forward ReLU networks with manual backprop, Adam and patience-based stopping.

Parameters live in one flat float64 vector; each layer's weight matrix
(shape fan_in x fan_out) and bias are views into it, in layer order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import ImageDataset
from .rng import Stream

CHECKPOINT_MAGIC = b"RGMLP\x00"
CHECKPOINT_VERSION = 1


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_widths: tuple[int, ...]
    output_classes: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_classes < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("all layer sizes must be positive")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden_widths, self.output_classes]

    @property
    def param_count(self) -> int:
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    max_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("invalid training configuration")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_loss: float
    test_accuracy: float


@dataclass
class TrainedModel:
    spec: MlpSpec
    params: np.ndarray
    history: list[EpochRecord] = field(default_factory=list)
    stopped_epoch: int = 0
    best_test_loss: float = math.inf
    stop_reason: str = "untrained"

    @property
    def p(self) -> int:
        return self.params.size

    def layers(self, params: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        params = self.params if params is None else params
        out, off = [], 0
        sizes = self.spec.layer_sizes
        for a, b in zip(sizes[:-1], sizes[1:]):
            W = params[off : off + a * b].reshape(a, b)
            off += a * b
            out.append((W, params[off : off + b]))
            off += b
        return out

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise ValueError(f"expected inputs of shape (m, {self.spec.input_dim}), got {X.shape}")
        h = X
        layers = self.layers()
        for W, b in layers[:-1]:
            h = np.maximum(h @ W + b, 0.0)
        W, b = layers[-1]
        return h @ W + b


def build_mlp(spec: MlpSpec, seed: int, stream: Stream | None = None) -> TrainedModel:
    """Glorot-uniform weights, zero biases, drawn from Stream(seed, 0) unless a stream is given."""
    stream = stream or Stream(seed, 0)
    params = np.zeros(spec.param_count)
    model = TrainedModel(spec, params)
    for W, b in model.layers():
        fan_in, fan_out = W.shape
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        W[...] = stream.uniform(W.shape, -limit, limit)
    if model.p != spec.param_count:
        raise AssertionError("parameter store does not match the closed-form count")
    return model


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    lp = _log_softmax(logits)
    return float(-lp[np.arange(labels.size), labels].mean())


def loss_and_grad(model: TrainedModel, X: np.ndarray, y: np.ndarray, loss: str = "cross_entropy",
                  params: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the flat parameter vector.

    ``squared`` is 0.5 * mean_i ||logits_i - onehot(y_i)||^2.
    """
    params = model.params if params is None else params
    layers = model.layers(params)
    m = X.shape[0]
    acts = [X]
    pre = []
    h = X
    for W, b in layers[:-1]:
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    W, b = layers[-1]
    z = h @ W + b

    onehot = np.zeros_like(z)
    onehot[np.arange(m), y] = 1.0
    if loss == "cross_entropy":
        lp = _log_softmax(z)
        value = float(-lp[np.arange(m), y].mean())
        dz = (np.exp(lp) - onehot) / m
    elif loss == "squared":
        r = z - onehot
        value = float(0.5 * (r**2).sum() / m)
        dz = r / m
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grad = np.zeros_like(params)
    grads = model.layers(grad)
    for k in range(len(layers) - 1, -1, -1):
        gW, gb = grads[k]
        gW[...] = acts[k].T @ dz
        gb[...] = dz.sum(axis=0)
        if k > 0:
            dz = (dz @ layers[k][0].T) * (pre[k - 1] > 0)
    return value, grad


def evaluate(model: TrainedModel, ds: ImageDataset) -> tuple[float, float]:
    z = model.logits(ds.features)
    return cross_entropy(z, ds.labels), float(np.mean(z.argmax(axis=1) == ds.labels))


def train_until_overfit(
    model: TrainedModel,
    train: ImageDataset,
    test: ImageDataset,
    cfg: TrainConfig,
    stream: Stream | None = None,
    test_loss_hook: Callable[[int, float], float] | None = None,
) -> TrainedModel:
    """Mini-batch Adam on cross-entropy until the test loss stalls for ``patience`` epochs.

    The returned model holds the parameters at the stopping epoch (the
    overfitted state), not the best-test-loss parameters. ``test_loss_hook``
    may replace the monitored loss: it receives (epoch, measured) and returns
    the value used by the stopping rule.
    """
    if train.dim != model.spec.input_dim or test.dim != model.spec.input_dim:
        raise ValueError("dataset width does not match the network input")
    if train.classes != model.spec.output_classes or test.classes != model.spec.output_classes:
        raise ValueError("class count does not match the network output")
    stream = stream or Stream(cfg.seed, 1)
    theta = model.params.copy()
    m_t = np.zeros_like(theta)
    v_t = np.zeros_like(theta)
    step = 0
    best, since_best = math.inf, 0
    history: list[EpochRecord] = []
    X, y = train.features, train.labels
    reason = "max_epochs"

    work = replace(model, params=theta)
    for epoch in range(1, cfg.max_epochs + 1):
        order = stream.permutation(train.n)
        for start in range(0, train.n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            value, g = loss_and_grad(work, X[idx], y[idx])
            if not math.isfinite(value):
                raise DivergenceError(epoch, value)
            step += 1
            m_t = cfg.beta1 * m_t + (1 - cfg.beta1) * g
            v_t = cfg.beta2 * v_t + (1 - cfg.beta2) * g * g
            m_hat = m_t / (1 - cfg.beta1**step)
            v_hat = v_t / (1 - cfg.beta2**step)
            theta -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)

        train_loss, train_acc = evaluate(work, train)
        test_loss, test_acc = evaluate(work, test)
        if not (math.isfinite(train_loss) and math.isfinite(test_loss)):
            raise DivergenceError(epoch, train_loss)
        history.append(EpochRecord(epoch, train_loss, train_acc, test_loss, test_acc))
        monitored = test_loss_hook(epoch, test_loss) if test_loss_hook else test_loss
        if monitored < best:
            best, since_best = monitored, 0
        else:
            since_best += 1
        if since_best >= cfg.patience:
            reason = "patience"
            break

    return TrainedModel(model.spec, theta, history, len(history), best, reason)


def predict_squashed(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return np.tanh(model.logits(X))


@dataclass
class GradCheckReport:
    max_relative_error: float
    checked: int
    worst_index: int


def gradient_check(
    model: TrainedModel,
    X: np.ndarray,
    y: np.ndarray,
    loss: str = "cross_entropy",
    n_params: int = 100,
    step: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Analytic gradient against central differences on randomly chosen coordinates."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _, g = loss_and_grad(model, X, y, loss)
    if n_params >= model.p:
        coords = np.arange(model.p)
    else:
        coords = Stream(seed, 2).sample_indices(model.p, n_params)
    worst, worst_i = 0.0, -1
    for i in coords:
        plus = model.params.copy()
        minus = model.params.copy()
        plus[i] += step
        minus[i] -= step
        fd = (loss_and_grad(model, X, y, loss, plus)[0] - loss_and_grad(model, X, y, loss, minus)[0]) / (2 * step)
        rel = abs(g[i] - fd) / max(abs(g[i]), abs(fd), 1e-8)
        if rel > worst:
            worst, worst_i = rel, int(i)
    return GradCheckReport(worst, len(coords), worst_i)


def save_checkpoint(model: TrainedModel, path):
    sizes = model.spec.layer_sizes
    head = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(sizes))
    head += struct.pack(f"<{len(sizes)}I", *sizes) + struct.pack("<Q", model.p)
    Path(path).write_bytes(head + model.params.astype("<f8").tobytes())


def load_checkpoint(path) -> TrainedModel:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError("not a model checkpoint")
    off = len(CHECKPOINT_MAGIC)
    version, nsizes = struct.unpack_from("<II", data, off)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off += 8
    sizes = struct.unpack_from(f"<{nsizes}I", data, off)
    off += 4 * nsizes
    (p,) = struct.unpack_from("<Q", data, off)
    off += 8
    spec = MlpSpec(sizes[0], tuple(sizes[1:-1]), sizes[-1])
    if p != spec.param_count or len(data) - off != 8 * p:
        raise ValueError("checkpoint parameter block does not match its header")
    params = np.frombuffer(data, dtype="<f8", offset=off).astype(np.float64)
    return TrainedModel(spec, params, stop_reason="loaded")
