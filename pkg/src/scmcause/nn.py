"""Small fully connected network engine on top of numpy.

Networks are plain data (``NetParams``); forward/backward are free functions so
that several networks can be chained by hand (the adversarial trainer feeds the
concatenated outputs of F and R into G, and the raw cause plus R's output into
D). Weight matrices are stored ``out_dim x in_dim`` and applied as
``h @ W.T + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit

Activation = Literal["sigmoid", "relu", "leaky_relu"]
ACTIVATIONS = ("sigmoid", "relu", "leaky_relu")

BCE_EPS = 1e-7


class NonFiniteGradientError(FloatingPointError):
    """Raised when an SGD step would write NaN/inf into the parameters."""


@dataclass(frozen=True)
class NetSpec:
    layer_dims: tuple[int, ...]
    activation: Activation = "sigmoid"
    leaky_slope: float = 0.01

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2:
            raise ValueError(f"need at least input and output dims, got {dims}")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer dims must be positive, got {dims}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass
class NetParams:
    spec: NetSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = self.spec.layer_dims
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise ValueError("number of weight/bias arrays does not match spec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(f"layer {i}: weight shape {w.shape} != {(dims[i + 1], dims[i])}")
            if b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} != {(dims[i + 1],)}")

    def copy(self) -> "NetParams":
        return NetParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def equals(self, other: "NetParams") -> bool:
        """Bit-exact comparison (spec and every array)."""
        return (
            self.spec == other.spec
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.spec.layer_dims),
            "activation": self.spec.activation,
            "leaky_slope": self.spec.leaky_slope,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetParams":
        spec = NetSpec(tuple(d["layer_dims"]), d["activation"], d.get("leaky_slope", 0.01))
        return cls(
            spec,
            [np.asarray(w, dtype=np.float64).reshape(spec.layer_dims[i + 1], spec.layer_dims[i])
             for i, w in enumerate(d["weights"])],
            [np.asarray(b, dtype=np.float64).reshape(-1) for b in d["biases"]],
        )


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.weights, other.weights)],
                         [a + b for a, b in zip(self.biases, other.biases)])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.weights + self.biases)


@dataclass
class Trace:
    """Per-layer values recorded by ``forward`` and consumed by ``backward``."""

    spec: NetSpec
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)


def init_net(spec: NetSpec, seed: int | np.random.Generator) -> NetParams:
    """Glorot-uniform weights and zero biases, deterministic in ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_dims[:-1], spec.layer_dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetParams(spec, weights, biases)


def _activate(z: np.ndarray, spec: NetSpec) -> np.ndarray:
    if spec.activation == "sigmoid":
        return _sigmoid(z)
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    return np.where(z > 0, z, spec.leaky_slope * z)


def _activation_grad(z: np.ndarray, h: np.ndarray, spec: NetSpec) -> np.ndarray:
    if spec.activation == "sigmoid":
        return h * (1.0 - h)
    if spec.activation == "relu":
        return (z > 0).astype(z.dtype)
    return np.where(z > 0, 1.0, spec.leaky_slope)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return expit(z)


def forward(params: NetParams, x: np.ndarray) -> tuple[np.ndarray, Trace]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with input dim {params.spec.in_dim}")
    trace = Trace(params.spec)
    h = x
    last = params.spec.n_layers - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        trace.inputs.append(h)
        z = h @ w.T + b
        trace.pre.append(z)
        h = z if i == last else _activate(z, params.spec)
        trace.post.append(h)
    return h, trace


def predict(params: NetParams, x: np.ndarray) -> np.ndarray:
    return forward(params, x)[0]


def backward(params: NetParams, trace: Trace, grad_output: np.ndarray) -> tuple[Gradients, np.ndarray]:
    """Reverse-mode pass. Returns parameter gradients and the gradient w.r.t. the input.

    The input gradient is what lets callers chain networks: slice it at a
    concatenation boundary and feed each block into the upstream net.
    """
    if trace.spec != params.spec or len(trace.pre) != params.spec.n_layers:
        raise ValueError("trace was not produced by a forward pass of these params")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != trace.pre[-1].shape:
        raise ValueError(f"grad_output shape {g.shape} != output shape {trace.pre[-1].shape}")
    n = params.spec.n_layers
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        if i != n - 1:
            g = g * _activation_grad(trace.pre[i], trace.post[i], params.spec)
        gw[i] = g.T @ trace.inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i]
    return Gradients(gw, gb), g


def zero_grads(params: NetParams) -> Gradients:
    return Gradients([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])


def sgd_step(params: NetParams, grads: Gradients, lr: float) -> NetParams:
    if not grads.is_finite():
        raise NonFiniteGradientError("non-finite gradient; refusing SGD step")
    for w, g in zip(params.weights, grads.weights):
        if w.shape != g.shape:
            raise ValueError("gradient shapes do not match params")
    return NetParams(
        params.spec,
        [w - lr * g for w, g in zip(params.weights, grads.weights)],
        [b - lr * g for b, g in zip(params.biases, grads.biases)],
    )


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over rows of the squared L2 row distance, and its gradient."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    m = pred.shape[0]
    return float(np.sum(diff * diff) / m), 2.0 * diff / m


def bce_loss(prob: np.ndarray, label: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross entropy with probabilities clamped to [1e-7, 1 - 1e-7]."""
    prob = np.asarray(prob, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if prob.shape != label.shape:
        raise ValueError(f"shape mismatch {prob.shape} vs {label.shape}")
    if not np.all((label == 0) | (label == 1)):
        raise ValueError("labels must be 0 or 1")
    p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
    n = p.size
    loss = -np.sum(label * np.log(p) + (1 - label) * np.log1p(-p)) / n
    grad = (-(label / p) + (1 - label) / (1 - p)) / n
    return float(loss), grad


def softmax_class1(logits: np.ndarray) -> np.ndarray:
    """Probability of class 1 under a 2-way softmax."""
    if logits.ndim != 2 or logits.shape[1] != 2:
        raise ValueError("expected an (m, 2) logit matrix")
    return _sigmoid(logits[:, 1] - logits[:, 0])


def softmax_class1_backward(logits: np.ndarray, grad_prob: np.ndarray) -> np.ndarray:
    p = softmax_class1(logits)
    d = grad_prob * p * (1.0 - p)
    return np.stack([-d, d], axis=1)


def loss_and_grads(params: NetParams, x: np.ndarray, target: np.ndarray, loss_kind: str):
    """Loss and parameter gradients for a single net under ``mse`` or ``bce``.

    For ``bce`` the net must have two outputs; the class-1 softmax weight is
    the probability and ``target`` the 0/1 labels.
    """
    out, trace = forward(params, x)
    if loss_kind == "mse":
        loss, g = mse_loss(out, target)
    elif loss_kind == "bce":
        p = softmax_class1(out)
        loss, gp = bce_loss(p, target)
        g = softmax_class1_backward(out, gp)
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    grads, _ = backward(params, trace, g)
    return loss, grads


def _loss_only(params: NetParams, x: np.ndarray, target: np.ndarray, loss_kind: str) -> float:
    out = predict(params, x)
    if loss_kind == "mse":
        return mse_loss(out, target)[0]
    return bce_loss(softmax_class1(out), target)[0]


def finite_diff_check(params: NetParams, x: np.ndarray, target: np.ndarray,
                      loss_kind: str = "mse", h: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients."""
    if params.n_params() > 10_000:
        raise ValueError("network too large for a full finite-difference sweep")
    _, grads = loss_and_grads(params, x, target, loss_kind)
    worst = 0.0
    probe = params.copy()
    for arrays, garrays in ((probe.weights, grads.weights), (probe.biases, grads.biases)):
        for a, ga in zip(arrays, garrays):
            flat, gflat = a.reshape(-1), ga.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = _loss_only(probe, x, target, loss_kind)
                flat[j] = orig - h
                down = _loss_only(probe, x, target, loss_kind)
                flat[j] = orig
                num = (up - down) / (2 * h)
                ana = gflat[j]
                worst = max(worst, abs(ana - num) / max(1.0, abs(ana), abs(num)))
    return float(worst)


def minibatches(m: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches; the trailing partial batch is kept."""
    order = rng.permutation(m)
    return [order[i:i + batch_size] for i in range(0, m, batch_size)]
