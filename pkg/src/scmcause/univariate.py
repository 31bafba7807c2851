"""Per-variable complexity scores for univariate pairs.

AEQ: sort the samples, cut them into consecutive length-k chunks ("quantile
vectors"), train an autoencoder on those chunks and use its reconstruction
loss as the variable's complexity. The more complex variable is declared the
cause. A 50-bin histogram entropy provides the (weak) baseline, and the
closed-form optimum of linear autoencoders serves as an exact complexity
oracle for property tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .config import TrainConfig
from .pairs import Direction, PairInstance
from .report import DirectionReport
from .seeds import derive_seed


@dataclass(frozen=True)
class QuantileMatrix:
    vectors: np.ndarray
    k: int
    discarded: int

    @property
    def n(self) -> int:
        return self.vectors.shape[0]


def build_quantile_vectors(samples, k: int) -> QuantileMatrix:
    s = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    m = s.size
    if k < 1:
        raise ValueError("k must be >= 1")
    if m < k:
        raise ValueError(f"need at least k={k} samples for one quantile vector, got {m}")
    n = m // k
    # the largest m mod k samples are dropped
    return QuantileMatrix(s[: n * k].reshape(n, k), k, m - n * k)


def standardize_rows(u: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per row; rows that are constant (up to rounding) map to zeros."""
    mu = u.mean(axis=1, keepdims=True)
    sd = u.std(axis=1, keepdims=True)
    const = (sd <= 1e-12 * np.maximum(1.0, np.abs(mu))).ravel()
    out = u - mu
    out[~const] /= sd[~const]
    out[const] = 0.0
    return out


@dataclass(frozen=True)
class AeqConfig:
    k: int = 250
    encoder_dims: tuple[int, ...] = (128, 64, 16)
    decoder_dims: tuple[int, ...] = (128,)
    activation: str = "relu"
    standardize: bool = True
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=300, lr_main=0.001))

    def net_spec(self) -> nn.NetSpec:
        return nn.NetSpec((self.k, *self.encoder_dims, *self.decoder_dims, self.k), self.activation)


@dataclass(frozen=True)
class ComplexityScore:
    value: float
    epochs_run: int
    converged: bool


def train_autoencoder(u: np.ndarray, spec: nn.NetSpec, cfg: TrainConfig, rng: np.random.Generator):
    params = nn.init_net(spec, rng)
    epochs = 0
    for _ in range(cfg.epochs):
        for idx in nn.minibatches(len(u), cfg.batch_size, rng):
            out, trace = nn.forward(params, u[idx])
            loss, g = nn.mse_loss(out, u[idx])
            if not math.isfinite(loss):
                raise nn.NonFiniteGradientError("reconstruction loss became non-finite")
            grads, _ = nn.backward(params, trace, g)
            params = nn.sgd_step(params, grads, cfg.lr_main)
        epochs += 1
    return params, epochs


def aeq_score(samples, cfg: AeqConfig = AeqConfig()) -> ComplexityScore:
    q = build_quantile_vectors(samples, cfg.k)
    u = standardize_rows(q.vectors) if cfg.standardize else q.vectors
    tc = cfg.train
    rng = np.random.default_rng(derive_seed(tc.seed, "aeq"))
    train_rows, eval_rows = u, u
    if tc.score_on_holdout and q.n >= 2:
        order = rng.permutation(q.n)
        n_hold = min(q.n - 1, max(1, int(round(tc.holdout_fraction * q.n))))
        train_rows, eval_rows = u[order[n_hold:]], u[order[:n_hold]]
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            params, epochs = train_autoencoder(train_rows, cfg.net_spec(), tc, rng)
            value = nn.mse_loss(nn.predict(params, eval_rows), eval_rows)[0]
    except nn.NonFiniteGradientError:
        return ComplexityScore(math.inf, 0, False)
    if not math.isfinite(value):
        return ComplexityScore(math.inf, epochs, False)
    return ComplexityScore(value, epochs, True)


def entropy_score(samples, bins: int = 50) -> float:
    """Plug-in Shannon entropy (nats) of an equal-width histogram over [min, max]."""
    s = np.asarray(samples, dtype=np.float64).ravel()
    if s.size < 2:
        raise ValueError("need at least two samples")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = s.min(), s.max()
    if lo == hi:
        return 0.0
    counts, _ = np.histogram(s, bins=bins, range=(lo, hi))
    p = counts[counts > 0] / s.size
    return float(max(0.0, -np.sum(p * np.log(p))))


def _score_to_report(pair: PairInstance, method: str, cx: float, cy: float, aux: dict) -> DirectionReport:
    if math.isinf(cx) and math.isinf(cy):
        score = 0.0
    else:
        score = cx - cy
    decision = Direction.XtoY if score > 0 else Direction.YtoX if score < 0 else Direction.undecided
    return DirectionReport(pair_id=pair.id, method=method, score=score, decision=decision, aux=aux)


def _require_univariate(pair: PairInstance, method: str):
    if pair.d_x != 1 or pair.d_y != 1:
        raise ValueError(f"{method} needs univariate variables; pair {pair.id} has dims {pair.d_x}, {pair.d_y}")


def infer_direction_aeq(pair: PairInstance, cfg: AeqConfig = AeqConfig()) -> DirectionReport:
    """Larger AEQ score marks the cause; score = aeq_x - aeq_y."""
    _require_univariate(pair, "AEQ")
    sx, sy = aeq_score(pair.x, cfg), aeq_score(pair.y, cfg)
    return _score_to_report(pair, "aeq", sx.value, sy.value,
                            {"aeq_x": sx.value, "aeq_y": sy.value,
                             "converged_x": sx.converged, "converged_y": sy.converged})


def infer_direction_entropy(pair: PairInstance, bins: int = 50) -> DirectionReport:
    _require_univariate(pair, "entropy")
    hx, hy = entropy_score(pair.x, bins), entropy_score(pair.y, bins)
    return _score_to_report(pair, "entropy", hx, hy, {"entropy_x": hx, "entropy_y": hy})


def linear_ae_oracle(data, r: int) -> float:
    """Minimum mean squared reconstruction error over rank-r linear autoencoders with bias.

    Equals the sum of the d - r smallest eigenvalues of the (1/m) covariance.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    m, d = x.shape
    if not 1 <= r <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {r}")
    if m <= d:
        raise ValueError("need more samples than dimensions")
    xc = x - x.mean(axis=0)
    eig = np.linalg.eigvalsh(xc.T @ xc / m)
    return float(max(0.0, np.sum(eig[: d - r])))


def train_linear_autoencoder(data, r: int, cfg: TrainConfig) -> tuple[float, tuple[nn.NetParams, nn.NetParams]]:
    """Fit an affine encoder d -> r and affine decoder r -> d by SGD; returns the final mean loss.

    Trained with the same engine as every other network, so its loss can be
    checked against ``linear_ae_oracle``.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    d = x.shape[1]
    rng = np.random.default_rng(derive_seed(cfg.seed, "linear-ae"))
    enc = nn.init_net(nn.NetSpec((d, r)), rng)
    dec = nn.init_net(nn.NetSpec((r, d)), rng)
    for _ in range(cfg.epochs):
        for idx in nn.minibatches(len(x), cfg.batch_size, rng):
            code, tr_e = nn.forward(enc, x[idx])
            out, tr_d = nn.forward(dec, code)
            _, g = nn.mse_loss(out, x[idx])
            g_dec, g_code = nn.backward(dec, tr_d, g)
            g_enc, _ = nn.backward(enc, tr_e, g_code)
            dec = nn.sgd_step(dec, g_dec, cfg.lr_main)
            enc = nn.sgd_step(enc, g_enc, cfg.lr_main)
    loss = nn.mse_loss(nn.predict(dec, nn.predict(enc, x)), x)[0]
    return loss, (enc, dec)


def complexity_gap(x, y, r: int) -> float:
    """``C(X,Y) - max(C(X), C(Y))`` for the rank-r linear-autoencoder complexity.

    Fixing one block of a rank-r joint autoencoder leaves a rank <= r
    autoencoder of the other block, so the marginals are measured with the
    same budget (clipped to their dimension). The result is never negative.
    """
    x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
    y = np.asarray(y, dtype=np.float64).reshape(len(y), -1)
    joint = linear_ae_oracle(np.hstack([x, y]), r)
    cx = linear_ae_oracle(x, min(r, x.shape[1]))
    cy = linear_ae_oracle(y, min(r, y.shape[1]))
    return joint - max(cx, cy)
