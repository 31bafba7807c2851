"""Synthetic cause-effect pairs.

Every family draws a cause ``X = h(z)`` with ``z ~ N(0, sigma1^2 I)`` and an
effect ``Y = g(u(X, E))`` with ``E ~ N(0, sigma2^2 I)``; ``h`` and ``g`` come
from the same mechanism family. ``uni_multi`` produces univariate pairs in the
style of CE-Multi: random linear or polynomial mechanisms, with additive or
multiplicative noise applied before or after the effect mechanism.

Mechanism draws and noise draws use separate random streams per pair, so a
pair can be regenerated with a rescaled noise level while the cause and the
mechanisms stay fixed (this is what the balancing loop relies on).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .pairs import Direction, PairInstance
from .seeds import derive_seed, rng_for

log = logging.getLogger(__name__)

FAMILIES = ("mce_poly", "mce_net", "mce_sigmix", "uni_multi")
_ADDITIVE = ("mce_poly", "mce_sigmix")


@dataclass(frozen=True)
class GenConfig:
    family: str = "mce_poly"
    n_pairs: int = 40
    m: int = 500
    dim: int = 100
    noise_dim: int = 100
    sigma1: float = 1.0
    sigma2: float = 0.2
    seed: int = 0
    label_balance: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n_pairs < 1:
            raise ValueError("n_pairs must be >= 1")
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.dim < 1 or self.noise_dim < 1:
            raise ValueError("dim and noise_dim must be >= 1")
        if self.family in _ADDITIVE and self.noise_dim > self.dim:
            raise ValueError(f"{self.family} adds noise to the cause, so noise_dim must be <= dim")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ValueError("sigma1 and sigma2 must be positive")
        if not 0.0 <= self.label_balance <= 1.0:
            raise ValueError("label_balance must lie in [0, 1]")

    @classmethod
    def univariate(cls, **kw) -> "GenConfig":
        base = dict(family="uni_multi", n_pairs=100, m=1500, dim=1, noise_dim=1, sigma2=0.5)
        base.update(kw)
        return cls(**base)


def sigmix_mechanism(x_tilde, a: float, b: float, c: float):
    """Saturating map a*b*(x+c) / (1 + |b*(x+c)|); bounded by |a| in magnitude."""
    t = b * (np.asarray(x_tilde, dtype=np.float64) + c)
    return a * t / (1.0 + np.abs(t))


# ---------------------------------------------------------------------------
# mechanism families

def _normalized_linear(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    w = rng.standard_normal((d_out, d_in))
    return w / np.linalg.norm(w, axis=0, keepdims=True)


class _Poly:
    def __init__(self, rng, d_in, d_out):
        self.lin = _normalized_linear(rng, d_in, d_out)
        self.degree = int(rng.integers(2, 4))
        self.coef = rng.uniform(-1, 1, size=(self.degree + 1, d_out))

    def __call__(self, v):
        t = v @ self.lin.T
        return sum(self.coef[k] * t ** k for k in range(self.degree + 1))


class _Net:
    def __init__(self, rng, d_in, d_out):
        hidden = 2 * d_out
        self.w1 = rng.standard_normal((hidden, d_in)) / math.sqrt(d_in)
        self.b1 = rng.standard_normal(hidden) * 0.1
        self.w2 = rng.standard_normal((d_out, hidden)) / math.sqrt(hidden)

    def __call__(self, v):
        return np.tanh(v @ self.w1.T + self.b1) @ self.w2.T


class _SigMix:
    def __init__(self, rng, d_in, d_out):
        self.lin = _normalized_linear(rng, d_in, d_out)
        self.a, self.b, self.c = rng.uniform(-2, 2, size=3)

    def __call__(self, v):
        return sigmix_mechanism(v @ self.lin.T, self.a, self.b, self.c)


_MECHANISMS = {"mce_poly": _Poly, "mce_net": _Net, "mce_sigmix": _SigMix}


def _uni_mechanism(rng: np.random.Generator):
    kind = ("linear", "poly2", "poly3")[int(rng.integers(3))]
    degree = {"linear": 1, "poly2": 2, "poly3": 3}[kind]
    coef = rng.uniform(-1, 1, size=degree + 1)
    # keep the leading coefficient away from zero so the mechanism really has its degree
    coef[-1] = np.sign(coef[-1]) * (0.5 + 0.5 * abs(coef[-1]))
    return kind, np.polynomial.Polynomial(coef)


# ---------------------------------------------------------------------------

def _pair_seed(cfg: GenConfig, index: int) -> int:
    return derive_seed("pair", cfg.family, cfg.seed, index)


def _draw_multivariate(cfg: GenConfig, pair_seed: int, noise_mult: float):
    mech_rng = rng_for(pair_seed, "mechanism")
    noise_rng = rng_for(pair_seed, "noise")
    cls = _MECHANISMS[cfg.family]
    h = cls(mech_rng, cfg.dim, cfg.dim)
    z = cfg.sigma1 * mech_rng.standard_normal((cfg.m, cfg.dim))
    x = h(z)
    e = cfg.sigma2 * noise_mult * noise_rng.standard_normal((cfg.m, cfg.noise_dim))
    if cfg.family in _ADDITIVE:
        e_full = np.zeros_like(x)
        e_full[:, : cfg.noise_dim] = e
        g = cls(mech_rng, cfg.dim, cfg.dim)
        y = g(x + e_full)
    else:
        g = cls(mech_rng, cfg.dim + cfg.noise_dim, cfg.dim)
        y = g(np.hstack([x, e]))
    return x, e, y, {}


def _draw_univariate(cfg: GenConfig, pair_seed: int, noise_mult: float):
    mech_rng = rng_for(pair_seed, "mechanism")
    noise_rng = rng_for(pair_seed, "noise")
    # X = h(z) with z Gaussian and h drawn from the same mechanism family as f
    z = cfg.sigma1 * mech_rng.standard_normal(cfg.m)
    cause_kind, h = _uni_mechanism(mech_rng)
    x = h(z)
    x = (x - x.mean()) / x.std()
    kind, f = _uni_mechanism(mech_rng)
    placement = ("additive_pre", "additive_post", "multiplicative_pre", "multiplicative_post")[
        int(mech_rng.integers(4))]
    sigma = cfg.sigma2 * noise_mult
    e = sigma * noise_rng.standard_normal(cfg.m)
    if placement == "additive_pre":
        y = f(x + e)
    elif placement == "additive_post":
        fx = f(x)
        y = fx + e * fx.std()
    elif placement == "multiplicative_pre":
        y = f(x * (1.0 + e))
    else:
        y = f(x) * (1.0 + e)
    return x[:, None], e[:, None], y[:, None], {"cause_mechanism": cause_kind, "mechanism": kind, "noise": placement}


def make_pair(cfg: GenConfig, index: int, label: Direction, noise_mult: float = 1.0) -> PairInstance:
    seed = _pair_seed(cfg, index)
    draw = _draw_univariate if cfg.family == "uni_multi" else _draw_multivariate
    x, e, y, info = draw(cfg, seed, noise_mult)
    meta = {"family": cfg.family, "index": index, "pair_seed": seed, "noise_mult": noise_mult,
            "gen": cfg, **info}
    pair = PairInstance(f"pair{index:04d}", x, y, Direction.XtoY, e_true=e, meta=meta)
    return pair if label is Direction.XtoY else pair.swapped()


def _labels(cfg: GenConfig) -> list[Direction]:
    n_pos = int(round(cfg.n_pairs * cfg.label_balance))
    flags = np.zeros(cfg.n_pairs, dtype=bool)
    flags[:n_pos] = True
    rng_for("labels", cfg.family, cfg.seed).shuffle(flags)
    return [Direction.XtoY if f else Direction.YtoX for f in flags]


def gen_pairs(cfg: GenConfig) -> list[PairInstance]:
    return [make_pair(cfg, i, lab) for i, lab in enumerate(_labels(cfg))]


def regenerate(pair: PairInstance, noise_mult: float) -> PairInstance:
    """Redraw a generated pair with its noise scaled by ``noise_mult`` (cause and mechanisms fixed)."""
    if "gen" not in pair.meta:
        raise ValueError(f"pair {pair.id} carries no generator state; cannot regenerate")
    new = make_pair(pair.meta["gen"], pair.meta["index"], pair.label, noise_mult)
    new.weight = pair.weight
    return new


# ---------------------------------------------------------------------------
# complexity balancing

@dataclass(frozen=True)
class BalanceConfig:
    epochs: int = 200
    batch_size: int = 64
    lr: float = 0.01
    seed: int = 0


def ae_recon_error(data: np.ndarray, cfg: BalanceConfig = BalanceConfig()) -> float:
    """Reconstruction error of a fixed d -> d/2 -> d/4 -> d/2 -> d relu autoencoder.

    Columns are z-scored first; the same architecture and schedule are used for
    every variable so the numbers are comparable across a dataset.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    std = data.std(axis=0)
    z = (data - data.mean(axis=0)) / np.where(std > 0, std, 1.0)
    d = z.shape[1]
    spec = nn.NetSpec((d, math.ceil(d / 2), math.ceil(d / 4), math.ceil(d / 2), d), "relu")
    rng = rng_for("balance-ae", cfg.seed, d)
    params = nn.init_net(spec, rng)
    for _ in range(cfg.epochs):
        for idx in nn.minibatches(len(z), cfg.batch_size, rng):
            out, trace = nn.forward(params, z[idx])
            _, g = nn.mse_loss(out, z[idx])
            grads, _ = nn.backward(params, trace, g)
            params = nn.sgd_step(params, grads, cfg.lr)
    out = nn.predict(params, z)
    return nn.mse_loss(out, z)[0]


def relative_gap(rx: float, ry: float) -> float:
    top = max(rx, ry)
    return 0.0 if top == 0 else abs(rx - ry) / top


@dataclass
class BalanceOutcome:
    pair_id: str
    multiplier: float
    gap_before: float
    gap_after: float
    iterations: int
    balanced: bool


def balance_pair(pair: PairInstance, ae_cfg: BalanceConfig = BalanceConfig(), tol: float = 0.1,
                 max_iters: int = 8, log2_range: float = 4.0) -> tuple[PairInstance, BalanceOutcome]:
    """Bisect the (log) noise multiplier until the cause/effect AE errors agree within ``tol``."""
    if math.isinf(tol):
        return pair, BalanceOutcome(pair.id, pair.meta.get("noise_mult", 1.0), float("nan"), float("nan"), 0, True)

    def gap_of(p: PairInstance) -> tuple[float, float]:
        cause, effect = (p.x, p.y) if p.label is Direction.XtoY else (p.y, p.x)
        rc, re = ae_recon_error(cause, ae_cfg), ae_recon_error(effect, ae_cfg)
        # signed: negative when the effect is the simpler side
        return relative_gap(rc, re), (re - rc)

    gap0, signed = gap_of(pair)
    if gap0 <= tol:
        return pair, BalanceOutcome(pair.id, pair.meta.get("noise_mult", 1.0), gap0, gap0, 0, True)
    base = math.log2(pair.meta.get("noise_mult", 1.0))
    # more noise makes the effect harder to reconstruct
    lo, hi = (base, base + log2_range) if signed < 0 else (base - log2_range, base)
    best, best_gap, best_mult = pair, gap0, 2.0 ** base
    iters = 0
    while iters < max_iters:
        iters += 1
        mid = 0.5 * (lo + hi)
        cand = regenerate(pair, 2.0 ** mid)
        g, s = gap_of(cand)
        if g < best_gap:
            best, best_gap, best_mult = cand, g, 2.0 ** mid
        if g <= tol:
            break
        if s < 0:
            lo = mid
        else:
            hi = mid
    ok = best_gap <= tol
    if not ok:
        log.info("pair %s not balanced after %d iterations (gap %.3f)", pair.id, iters, best_gap)
    return best, BalanceOutcome(pair.id, best_mult, gap0, best_gap, iters, ok)


def balance_dataset(pairs: list[PairInstance], ae_cfg: BalanceConfig = BalanceConfig(), tol: float = 0.1,
                    max_iters: int = 8) -> tuple[list[PairInstance], list[BalanceOutcome]]:
    out, outcomes = [], []
    for p in pairs:
        q, o = balance_pair(p, ae_cfg, tol, max_iters)
        out.append(q)
        outcomes.append(o)
    return out, outcomes


# ---------------------------------------------------------------------------

def augment_cause_complexity(pair: PairInstance, extra_dims: int, scale: float, seed: int) -> PairInstance:
    """Append independent N(0, scale^2) columns to the cause variable.

    The effect is still a function of the enlarged cause and the same noise
    (the new columns are simply ignored), but any complexity measure that
    grows with independent concatenation now rates the cause as complex as
    we like.
    """
    if extra_dims < 1:
        raise ValueError("extra_dims must be >= 1")
    rng = np.random.default_rng(seed)
    extra = scale * rng.standard_normal((pair.m, extra_dims))
    if pair.label is Direction.XtoY:
        return replace(pair, x=np.hstack([pair.x, extra]), meta=dict(pair.meta))
    return replace(pair, y=np.hstack([pair.y, extra]), meta=dict(pair.meta))
