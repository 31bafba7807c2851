"""Randomized finite-difference suite over every activation/loss combination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .seeds import derive_seed

LOSSES = ("mse", "bce")
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class GradCheckResult:
    activation: str
    loss: str
    n_nets: int
    max_rel_error: float

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def random_case(activation: str, loss: str, seed: int, max_layers: int = 3, max_units: int = 10):
    """A random net (<= max_layers layers, <= max_units units) with inputs and targets.

    For piecewise-linear activations the inputs are redrawn until every hidden
    pre-activation sits at least ``KINK_MARGIN`` away from the kink.
    """
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, max_layers + 1))
    dims = [int(rng.integers(1, max_units + 1)) for _ in range(n_layers)]
    out_dim = 2 if loss == "bce" else int(rng.integers(1, max_units + 1))
    spec = nn.NetSpec((*dims, out_dim), activation)
    params = nn.init_net(spec, rng)
    # non-zero biases so the check also covers them
    params = nn.NetParams(spec, params.weights, [rng.normal(0, 0.5, b.shape) for b in params.biases])
    m = int(rng.integers(2, 9))
    for _ in range(100):
        x = rng.normal(size=(m, spec.in_dim))
        _, trace = nn.forward(params, x)
        if activation == "sigmoid" or all(np.all(np.abs(z) > KINK_MARGIN) for z in trace.pre[:-1]):
            break
    if loss == "bce":
        target = rng.integers(0, 2, m).astype(float)
    else:
        target = rng.normal(size=(m, out_dim))
    return params, x, target


def gradient_suite(n_nets: int = 20, seed: int = 0, h: float = 1e-5) -> list[GradCheckResult]:
    results = []
    for act in nn.ACTIVATIONS:
        for loss in LOSSES:
            worst = 0.0
            for i in range(n_nets):
                params, x, target = random_case(act, loss, derive_seed(seed, "gradcheck", act, loss, i))
                worst = max(worst, nn.finite_diff_check(params, x, target, loss, h))
            results.append(GradCheckResult(act, loss, n_nets, worst))
    return results
