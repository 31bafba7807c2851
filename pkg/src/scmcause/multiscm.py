"""Adversarial SCM fitting for multivariate cause-effect pairs.

For a candidate direction A -> B we fit ``B ~ G(F(A), R(B))`` while a
discriminator D tries to tell real pairs ``(a_i, R(b_i))`` from decoupled
pairs ``(a_hat_i, R(b_hat_i))`` built from independently permuted rows. R is
pushed to fool D, i.e. to produce a code that carries no information about A.
The direction whose mapping error ends lower wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .config import TrainConfig
from .pairs import Direction, PairInstance
from .report import DirectionReport, FitSummary
from .seeds import derive_seed

log = logging.getLogger(__name__)


@dataclass
class ScmNets:
    F: nn.NetParams
    R: nn.NetParams
    G: nn.NetParams
    D: nn.NetParams

    def __post_init__(self):
        f_out, r_out = self.F.spec.out_dim, self.R.spec.out_dim
        if self.G.spec.in_dim != f_out + r_out:
            raise ValueError(f"G expects {self.G.spec.in_dim} inputs, F+R provide {f_out + r_out}")
        if self.D.spec.in_dim != self.F.spec.in_dim + r_out:
            raise ValueError(f"D expects {self.D.spec.in_dim} inputs, cause+R provide {self.F.spec.in_dim + r_out}")
        if self.D.spec.out_dim != 2:
            raise ValueError("D must have exactly two outputs")
        if self.G.spec.out_dim != self.R.spec.in_dim:
            raise ValueError("G must map back to the effect dimension")

    def copy(self) -> "ScmNets":
        return ScmNets(self.F.copy(), self.R.copy(), self.G.copy(), self.D.copy())


def default_specs(d_a: int, d_b: int) -> dict[str, nn.NetSpec]:
    """Network shapes; for d_a = d_b = 100 these are 100-60-50, 100-50-50-20, 70-80-100, 120-60-50-2."""
    c = math.ceil
    f_out, r_out = c(0.5 * d_a), c(0.2 * d_b)
    return {
        "F": nn.NetSpec((d_a, c(0.6 * d_a), f_out), "sigmoid"),
        "R": nn.NetSpec((d_b, c(0.5 * d_b), c(0.5 * d_b), r_out), "sigmoid"),
        "G": nn.NetSpec((f_out + r_out, c(0.8 * d_b), d_b), "sigmoid"),
        "D": nn.NetSpec((d_a + r_out, c(0.6 * d_a), c(0.5 * d_a), 2), "leaky_relu"),
    }


def init_scm_nets(d_a: int, d_b: int, seed: int) -> ScmNets:
    specs = default_specs(d_a, d_b)
    return ScmNets(**{k: nn.init_net(s, derive_seed(seed, "init", k)) for k, s in specs.items()})


@dataclass
class FitResult:
    final_err: float
    err_curve: list[float]
    c_real: float
    c_fake: float
    nets: ScmNets | None
    diverged: bool = False
    ind: float | None = field(init=False)

    def __post_init__(self):
        self.ind = None if self.diverged else independence_score(self.c_real, self.c_fake)

    def summary(self) -> FitSummary:
        return FitSummary(self.final_err, list(self.err_curve), self.c_real, self.c_fake, self.ind, self.diverged)


def independence_score(c_real: float, c_fake: float) -> float:
    """|c_real + c_fake - 1|: 0 when D is at chance, 1 when it separates perfectly."""
    if not (0.0 <= c_real <= 1.0 and 0.0 <= c_fake <= 1.0):
        raise ValueError(f"hit rates must lie in [0, 1], got {c_real}, {c_fake}")
    return abs(c_real + c_fake - 1.0)


def shuffle_product_samples(a: np.ndarray, b: np.ndarray, seed) -> tuple[np.ndarray, np.ndarray]:
    """Independent row permutations of a and b, i.e. draws from the product of marginals."""
    if a.shape[0] != b.shape[0]:
        raise ValueError("a and b must have the same number of rows")
    if a.shape[0] < 2:
        raise ValueError("need at least two rows to decouple")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return a[rng.permutation(a.shape[0])], b[rng.permutation(b.shape[0])]


def standardize(v: np.ndarray) -> np.ndarray:
    std = v.std(axis=0)
    return (v - v.mean(axis=0)) / np.where(std > 0, std, 1.0)


def _disc_probs(D: nn.NetParams, a, r):
    logits, trace = nn.forward(D, np.hstack([a, r]))
    return nn.softmax_class1(logits), logits, trace


def _mapping_error(nets: ScmNets, a, b) -> float:
    f = nn.predict(nets.F, a)
    r = nn.predict(nets.R, b)
    return nn.mse_loss(nn.predict(nets.G, np.hstack([f, r])), b)[0]


def _hit_rates(nets: ScmNets, a, b, a_hat, b_hat) -> tuple[float, float]:
    p_real, _, _ = _disc_probs(nets.D, a, nn.predict(nets.R, b))
    p_fake, _, _ = _disc_probs(nets.D, a_hat, nn.predict(nets.R, b_hat))
    return float(np.mean(p_real > 0.5)), float(np.mean(p_fake <= 0.5))


def _disc_step(nets: ScmNets, a, b, a_hat, b_hat, lr: float) -> float:
    r_real = nn.predict(nets.R, b)
    r_fake = nn.predict(nets.R, b_hat)
    n = a.shape[0]
    logits, trace = nn.forward(nets.D, np.vstack([np.hstack([a, r_real]), np.hstack([a_hat, r_fake])]))
    p = nn.softmax_class1(logits)
    l_real, g_real = nn.bce_loss(p[:n], np.ones(n))
    l_fake, g_fake = nn.bce_loss(p[n:], np.zeros(n))
    g = nn.softmax_class1_backward(logits, np.concatenate([g_real, g_fake]))
    grads, _ = nn.backward(nets.D, trace, g)
    nets.D = nn.sgd_step(nets.D, grads, lr)
    return l_real + l_fake


def _indep_grads(nets: ScmNets, a, r_out, a_hat, b_hat, lam: float):
    """Gradient of lam * L_indep w.r.t. R's real-pair output, plus R's param grads from the decoupled path."""
    d_a = a.shape[1]
    p, logits, trace = _disc_probs(nets.D, a, r_out)
    _, gp = nn.bce_loss(p, np.ones(len(p)))
    _, g_in = nn.backward(nets.D, trace, lam * nn.softmax_class1_backward(logits, gp))
    d_r_real = g_in[:, d_a:]

    r_fake, tr_fake = nn.forward(nets.R, b_hat)
    p, logits, trace = _disc_probs(nets.D, a_hat, r_fake)
    _, gp = nn.bce_loss(p, np.ones(len(p)))
    _, g_in = nn.backward(nets.D, trace, lam * nn.softmax_class1_backward(logits, gp))
    grads_r_fake, _ = nn.backward(nets.R, tr_fake, g_in[:, d_a:])
    return d_r_real, grads_r_fake


def _main_step(nets: ScmNets, a, b, a_hat, b_hat, lam: float, indep_backprop: bool, lr: float) -> float:
    f_out, tr_f = nn.forward(nets.F, a)
    r_out, tr_r = nn.forward(nets.R, b)
    g_out, tr_g = nn.forward(nets.G, np.hstack([f_out, r_out]))
    loss, dg = nn.mse_loss(g_out, b)
    grads_g, d_in = nn.backward(nets.G, tr_g, dg)
    d_f, d_r = d_in[:, : f_out.shape[1]], d_in[:, f_out.shape[1]:]
    extra_r = None
    if indep_backprop:
        d_r_real, extra_r = _indep_grads(nets, a, r_out, a_hat, b_hat, lam)
        d_r = d_r + d_r_real
    grads_f, _ = nn.backward(nets.F, tr_f, d_f)
    grads_r, _ = nn.backward(nets.R, tr_r, d_r)
    if extra_r is not None:
        grads_r = grads_r + extra_r
    nets.F = nn.sgd_step(nets.F, grads_f, lr)
    nets.R = nn.sgd_step(nets.R, grads_r, lr)
    nets.G = nn.sgd_step(nets.G, grads_g, lr)
    return loss


def train_direction(a: np.ndarray, b: np.ndarray, cfg: TrainConfig, nets0: ScmNets | None = None,
                    indep_backprop: bool = True, keep_nets: bool = True) -> FitResult:
    """Fit ``b ~ G(F(a), R(b))`` with the adversarial independence term.

    One discriminator step (lr_disc) then one step of G, F, R (lr_main) per
    minibatch. With ``indep_backprop=False`` D is still trained, as a pure
    diagnostic, but never sends gradients into R.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("cause and effect must have the same number of rows")
    nets = (nets0 or init_scm_nets(a.shape[1], b.shape[1], cfg.seed)).copy()
    if nets.F.spec.in_dim != a.shape[1] or nets.R.spec.in_dim != b.shape[1]:
        raise ValueError("network input dims do not match the data")
    rng = np.random.default_rng(derive_seed(cfg.seed, "train"))

    a_eval, b_eval = a, b
    if cfg.score_on_holdout:
        order = rng.permutation(a.shape[0])
        n_hold = max(1, int(round(cfg.holdout_fraction * a.shape[0])))
        hold, train = order[:n_hold], order[n_hold:]
        a, b, a_eval, b_eval = a[train], b[train], a[hold], b[hold]
    m = a.shape[0]
    if m < 2:
        raise ValueError("need at least two training rows")

    curve: list[float] = []
    perm_a = perm_b = None
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(cfg.epochs):
                if perm_a is None or cfg.redraw_decoupled:
                    perm_a, perm_b = rng.permutation(m), rng.permutation(m)
                for idx in nn.minibatches(m, cfg.batch_size, rng):
                    ab, bb = a[idx], b[idx]
                    ah, bh = a[perm_a[idx]], b[perm_b[idx]]
                    _disc_step(nets, ab, bb, ah, bh, cfg.lr_disc)
                    _main_step(nets, ab, bb, ah, bh, cfg.lam, indep_backprop, cfg.lr_main)
                err = _mapping_error(nets, a_eval, b_eval)
                if not math.isfinite(err):
                    raise nn.NonFiniteGradientError("mapping error became non-finite")
                curve.append(err)
    except nn.NonFiniteGradientError as e:
        log.warning("fit diverged: %s", e)
        curve.append(float("inf"))
        return FitResult(float("inf"), curve, 0.5, 0.5, nets if keep_nets else None, diverged=True)

    if not curve:
        curve.append(_mapping_error(nets, a_eval, b_eval))
    c_real, c_fake = _hit_rates(nets, a, b, a[perm_a], b[perm_b]) if perm_a is not None else \
        _hit_rates(nets, a, b, *shuffle_product_samples(a, b, rng))
    return FitResult(curve[-1], curve, c_real, c_fake, nets if keep_nets else None)


def decide(err_xy: float, err_yx: float) -> tuple[float, Direction]:
    """Signed score (positive favours X -> Y) and decision; infinite errors count as worst fits."""
    if math.isinf(err_xy) and math.isinf(err_yx):
        return 0.0, Direction.undecided
    if math.isinf(err_yx):
        return math.inf, Direction.XtoY
    if math.isinf(err_xy):
        return -math.inf, Direction.YtoX
    score = err_yx - err_xy
    if score > 0:
        return score, Direction.XtoY
    if score < 0:
        return score, Direction.YtoX
    return 0.0, Direction.undecided


def fit_seeds(master_seed: int, pair_id: str) -> tuple[int, int]:
    return derive_seed(master_seed, pair_id, "x->y"), derive_seed(master_seed, pair_id, "y->x")


def infer_direction_adversarial(pair: PairInstance, cfg: TrainConfig, indep_backprop: bool = True,
                                seeds: tuple[int, int] | None = None, method: str = "adversarial",
                                keep_nets: bool = False) -> DirectionReport:
    x, y = standardize(pair.x), standardize(pair.y)
    s_xy, s_yx = seeds or fit_seeds(cfg.seed, pair.id)
    fit_xy = train_direction(x, y, cfg.with_seed(s_xy), indep_backprop=indep_backprop, keep_nets=keep_nets)
    fit_yx = train_direction(y, x, cfg.with_seed(s_yx), indep_backprop=indep_backprop, keep_nets=keep_nets)
    score, decision = decide(fit_xy.final_err, fit_yx.final_err)
    return DirectionReport(
        pair_id=pair.id, method=method, score=score, decision=decision,
        fit_xy=fit_xy.summary(), fit_yx=fit_yx.summary(),
        aux={"err_xy": fit_xy.final_err, "err_yx": fit_yx.final_err},
    )


# ---------------------------------------------------------------------------
# diagnostic probes

def recoverability_probe(r_out: np.ndarray, e_true: np.ndarray | None, cfg: TrainConfig,
                         hidden: tuple[int, int] = (64, 64)) -> float:
    """Held-out MSE of a regressor predicting e_true from r_out, relative to e_true's held-out variance.

    About 1 means the noise cannot be recovered from the representation; 0 is
    perfect recovery.
    """
    if e_true is None:
        raise ValueError("recoverability needs ground-truth noise samples")
    r_out = np.asarray(r_out, dtype=np.float64)
    e_true = np.asarray(e_true, dtype=np.float64)
    if r_out.ndim == 1:
        r_out = r_out[:, None]
    if e_true.ndim == 1:
        e_true = e_true[:, None]
    if r_out.shape[0] != e_true.shape[0]:
        raise ValueError("r_out and e_true must have the same number of rows")
    rng = np.random.default_rng(derive_seed(cfg.seed, "probe"))
    order = rng.permutation(r_out.shape[0])
    n_test = max(1, int(round(0.2 * len(order))))
    test, train = order[:n_test], order[n_test:]
    # statistics from the training split only
    r_mu, r_sd = r_out[train].mean(0), r_out[train].std(0)
    e_mu, e_sd = e_true[train].mean(0), e_true[train].std(0)
    r_sd = np.where(r_sd > 0, r_sd, 1.0)
    e_sd = np.where(e_sd > 0, e_sd, 1.0)
    rz, ez = (r_out - r_mu) / r_sd, (e_true - e_mu) / e_sd
    spec = nn.NetSpec((rz.shape[1], *hidden, ez.shape[1]), "relu")
    params = nn.init_net(spec, rng)
    for _ in range(cfg.epochs):
        for idx in nn.minibatches(len(train), cfg.batch_size, rng):
            idx = train[idx]
            out, trace = nn.forward(params, rz[idx])
            _, g = nn.mse_loss(out, ez[idx])
            grads, _ = nn.backward(params, trace, g)
            params = nn.sgd_step(params, grads, cfg.lr_main)
    pred = nn.predict(params, rz[test]) * e_sd + e_mu
    mse = float(np.mean(np.sum((pred - e_true[test]) ** 2, axis=1)))
    # variance of e on the held-out rows around the training mean, i.e. the
    # error of the best constant predictor on the same split
    var = float(np.mean(np.sum((e_true[test] - e_mu) ** 2, axis=1)))
    return mse / var if var > 0 else 0.0


def reduce_to_post_linear(f: nn.NetParams, g: nn.NetParams, x: np.ndarray, e: np.ndarray):
    """Rewrite ``g(f(x), e)`` as ``g_hat(f_hat(x) + N)`` by splitting g's first layer.

    ``f_hat(x) = U1[:, :d_f] f(x) + b1`` and ``N = U1[:, d_f:] e``; ``g_hat`` is
    g's activation followed by its remaining layers. Returns
    ``(f_hat(x) + N, g_hat, y_check)`` with ``y_check = g_hat(f_hat(x) + N)``.
    """
    if g.spec.n_layers < 2:
        raise ValueError("g needs at least two layers for the reduction")
    x = np.asarray(x, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    d_f = f.spec.out_dim
    if g.spec.in_dim != d_f + e.shape[1]:
        raise ValueError("g's input must be the concatenation (f(x), e)")
    u1, b1 = g.weights[0], g.biases[0]
    f_hat = nn.predict(f, x) @ u1[:, :d_f].T + b1
    noise = e @ u1[:, d_f:].T
    z = f_hat + noise
    g_hat = PostLinearHead(g)
    return z, g_hat, g_hat(z)


class PostLinearHead:
    """``z -> rest_of_g(act(z))``: g with its first affine map removed."""

    def __init__(self, g: nn.NetParams):
        self.activation_spec = g.spec
        dims = g.spec.layer_dims[1:]
        self.rest = nn.NetParams(nn.NetSpec(dims, g.spec.activation, g.spec.leaky_slope),
                                 [w.copy() for w in g.weights[1:]], [b.copy() for b in g.biases[1:]])

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return nn.predict(self.rest, nn._activate(np.asarray(z, dtype=np.float64), self.activation_spec))
