"""Dense feed-forward classifiers with analytic backprop and momentum SGD.

Layers compute ``W @ x + b`` with ``W`` shaped (out_dim, in_dim). Hidden
layers use ReLU; the final layer is linear and its rows are the class
templates. Inputs may be single vectors or row-stacked batches.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._binio import Reader, f64_bytes, read_file
from .errors import ArchitectureError, DivergenceError, ShapeError

CKPT_MAGIC = b"DLAB"
CKPT_VERSION = 1


class Activation(enum.Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"weights {self.weights.shape} and bias {self.bias.shape} do not align")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def template(self, k: int) -> np.ndarray:
        """Row ``k`` with its bias appended, matching inputs extended by a 1."""
        return np.append(self.weights[k], self.bias[k])


@dataclass
class NetworkParams:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ArchitectureError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ArchitectureError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.layers[-1].activation is not Activation.IDENTITY:
            raise ArchitectureError("the final layer must emit raw logits")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    @property
    def final_layer(self) -> DenseLayer:
        return self.layers[-1]

    def copy(self) -> "NetworkParams":
        return NetworkParams([DenseLayer(l.weights.copy(), l.bias.copy(), l.activation)
                              for l in self.layers])

    def equals(self, other: "NetworkParams") -> bool:
        """Bitwise equality of every parameter."""
        return self.dims == other.dims and all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
            and a.activation is b.activation
            for a, b in zip(self.layers, other.layers))


@dataclass
class ForwardTrace:
    pre: list[np.ndarray]
    acts: list[np.ndarray]

    @property
    def logits(self) -> np.ndarray:
        return self.acts[-1]

    @property
    def penultimate(self) -> np.ndarray:
        return self.acts[-2]


class LayerGrad(NamedTuple):
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class SgdConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    lr_decay_epochs: Sequence[int] = field(default_factory=tuple)
    lr_decay_factor: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not self.lr_decay_factor > 0:
            raise ValueError("lr_decay_factor must be positive")


def init_network(dims: Sequence[int], seed: int) -> NetworkParams:
    """Uniform(-1/sqrt(in_dim), 1/sqrt(in_dim)) weights, zero biases."""
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ArchitectureError("need at least an input and an output dimension")
    if any(d < 1 for d in dims):
        raise ArchitectureError(f"every dimension must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / np.sqrt(n_in)
        act = Activation.IDENTITY if i == len(dims) - 2 else Activation.RELU
        layers.append(DenseLayer(rng.uniform(-bound, bound, size=(n_out, n_in)),
                                 np.zeros(n_out), act))
    return NetworkParams(layers)


def forward(net: NetworkParams, x: np.ndarray) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.input_dim or x.ndim not in (1, 2):
        raise ShapeError(f"input shape {x.shape} does not match input_dim {net.input_dim}")
    pre, acts = [], [x]
    a = x
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = np.maximum(z, 0.0) if layer.activation is Activation.RELU else z
        pre.append(z)
        acts.append(a)
    return ForwardTrace(pre, acts)


def logits(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    return forward(net, x).logits


def penultimate(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    return forward(net, x).penultimate


def backward(net: NetworkParams, trace: ForwardTrace, dlogits: np.ndarray) -> list[LayerGrad]:
    """Gradients of a scalar loss given its derivative w.r.t. the logits.

    For batched traces ``dlogits`` has one row per sample and the returned
    gradients are summed over rows, so a mean loss must pass pre-scaled rows.
    """
    delta = np.asarray(dlogits, dtype=np.float64)
    if len(trace.pre) != len(net.layers) or delta.shape != trace.logits.shape:
        raise ShapeError(f"upstream gradient {delta.shape} does not match trace "
                         f"{trace.logits.shape}")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if layer.activation is Activation.RELU:
            delta = delta * (trace.pre[i] > 0)
        a_prev = trace.acts[i]
        if delta.ndim == 1:
            grads[i] = LayerGrad(np.outer(delta, a_prev), delta.copy())
        else:
            grads[i] = LayerGrad(delta.T @ a_prev, delta.sum(axis=0))
        if i:
            delta = delta @ layer.weights
    return grads


def zero_velocity(net: NetworkParams) -> list[LayerGrad]:
    return [LayerGrad(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in net.layers]


def sgd_step(net: NetworkParams, grads: list[LayerGrad], velocity: list[LayerGrad],
             cfg: SgdConfig, lr: float | None = None):
    """One momentum update: ``v <- m*v - lr*g``, ``p <- p + v``.

    Returns a new ``(net, velocity)`` pair; the inputs are not modified.
    """
    lr = cfg.learning_rate if lr is None else lr
    if len(grads) != len(net.layers) or len(velocity) != len(net.layers):
        raise ShapeError("gradient/velocity structure does not mirror the network")
    layers, new_v = [], []
    for layer, g, v in zip(net.layers, grads, velocity):
        if g.weights.shape != layer.weights.shape or v.weights.shape != layer.weights.shape:
            raise ShapeError("gradient shape mismatch")
        vw = cfg.momentum * v.weights - lr * g.weights
        vb = cfg.momentum * v.bias - lr * g.bias
        layers.append(DenseLayer(layer.weights + vw, layer.bias + vb, layer.activation))
        new_v.append(LayerGrad(vw, vb))
    return NetworkParams(layers), new_v


# loss_fn(logits (B, K), sample indices (B,)) -> (mean loss, d mean loss / d logits)
Objective = Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]]


def train(net: NetworkParams, data, loss_fn: Objective, cfg: SgdConfig):
    """Mini-batch momentum SGD; returns ``(trained_net, per-epoch mean loss)``.

    Shuffling draws from ``default_rng(cfg.seed)``, so runs are bitwise
    reproducible. Raises :class:`DivergenceError` on a non-finite loss.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    x = data.inputs
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"data dim {x.shape[1]} != network input_dim {net.input_dim}")
    rng = np.random.default_rng(cfg.seed)
    velocity = zero_velocity(net)
    decay_at = set(cfg.lr_decay_epochs)
    lr = cfg.learning_rate
    history = []
    n = len(data)
    for epoch in range(cfg.epochs):
        if epoch in decay_at:
            lr *= cfg.lr_decay_factor
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                trace = forward(net, x[idx])
                loss, dlogits = loss_fn(trace.logits, idx)
            if not np.isfinite(loss) or not np.all(np.isfinite(dlogits)):
                raise DivergenceError(epoch)
            grads = backward(net, trace, dlogits)
            with np.errstate(over="ignore", invalid="ignore"):
                net, velocity = sgd_step(net, grads, velocity, cfg, lr=lr)
            total += loss * len(idx)
        history.append(total / n)
    return net, history


def predict(net: NetworkParams, x: np.ndarray) -> np.ndarray:
    return np.argmax(logits(net, x), axis=-1)


def accuracy(net: NetworkParams, data) -> float:
    return float(np.mean(predict(net, data.inputs) == data.labels))


def save_checkpoint(net: NetworkParams, path) -> None:
    dims = net.dims
    parts = [CKPT_MAGIC, struct.pack("<HI", CKPT_VERSION, len(dims)),
             struct.pack(f"<{len(dims)}I", *dims)]
    for layer in net.layers:
        parts.append(f64_bytes(layer.weights))
        parts.append(f64_bytes(layer.bias))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> NetworkParams:
    r = Reader(read_file(path), path)
    r.magic(CKPT_MAGIC)
    version, ndims = r.unpack("HI")
    if version != CKPT_VERSION:
        r.fail(f"unsupported version {version}", 4)
    if ndims < 2:
        r.fail(f"need at least 2 dims, got {ndims}")
    dims = r.unpack(f"{ndims}I")
    if min(dims) < 1:
        r.fail(f"invalid dims {dims}")
    layers = []
    for i, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        w = r.f64(n_out * n_in).reshape(n_out, n_in)
        b = r.f64(n_out)
        act = Activation.IDENTITY if i == ndims - 2 else Activation.RELU
        layers.append(DenseLayer(w, b, act))
    r.finish()
    return NetworkParams(layers)
