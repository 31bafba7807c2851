import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scmcause.datagen import (
    FAMILIES, BalanceConfig, GenConfig, augment_cause_complexity, balance_dataset, balance_pair, gen_pairs,
    make_pair, regenerate, sigmix_mechanism,
)
from scmcause.pairs import Direction, PairFormatError, PairInstance, load_pair_dir, save_pair_dir
from scmcause.univariate import linear_ae_oracle

SMALL = dict(n_pairs=4, m=200, dim=5, noise_dim=5)


# --- sigmix ------------------------------------------------------------------

def test_sigmix_examples():
    assert sigmix_mechanism(0.0, 1, 1, 0) == 0.0
    assert sigmix_mechanism(1.0, 1, 1, 0) == 0.5
    assert sigmix_mechanism(1e12, 2, 1, 0) == pytest.approx(2.0)


@given(st.floats(-1e6, 1e6), st.floats(-2, 2).filter(lambda a: a != 0), st.floats(-2, 2), st.floats(-2, 2))
def test_sigmix_bounded(x, a, b, c):
    assert abs(sigmix_mechanism(x, a, b, c)) < abs(a)


# --- generation --------------------------------------------------------------

@pytest.mark.parametrize("family", FAMILIES)
def test_gen_shapes(family):
    cfg = GenConfig.univariate(n_pairs=5, m=300) if family == "uni_multi" else GenConfig(family=family, **{**SMALL, "n_pairs": 5})
    pairs = gen_pairs(cfg)
    assert len(pairs) == 5
    for p in pairs:
        assert p.m == cfg.m and p.e_true is not None and p.e_true.shape[0] == cfg.m
        assert p.d_x == p.d_y == cfg.dim
    assert len({p.id for p in pairs}) == 5


@pytest.mark.parametrize("family", FAMILIES)
def test_gen_deterministic(family):
    cfg = GenConfig.univariate(n_pairs=3, m=300) if family == "uni_multi" else GenConfig(family=family, **SMALL)
    a, b = gen_pairs(cfg), gen_pairs(cfg)
    for p, q in zip(a, b):
        assert np.array_equal(p.x, q.x) and np.array_equal(p.y, q.y) and p.label is q.label
    c = gen_pairs(GenConfig(**{**cfg.__dict__, "seed": cfg.seed + 1}))
    assert not np.array_equal(a[0].x, c[0].x)


def test_gen_rejects_bad_config():
    with pytest.raises(ValueError):
        GenConfig(family="ce_gauss")
    with pytest.raises(ValueError):
        GenConfig(n_pairs=0)
    with pytest.raises(ValueError):
        GenConfig(sigma2=0.0)
    with pytest.raises(ValueError):
        GenConfig(family="mce_poly", dim=3, noise_dim=5)


def test_label_balance():
    pairs = gen_pairs(GenConfig(family="mce_net", n_pairs=10, m=50, dim=3, noise_dim=2))
    assert sum(p.label is Direction.XtoY for p in pairs) == 5
    allx = gen_pairs(GenConfig(family="mce_net", n_pairs=4, m=50, dim=3, noise_dim=2, label_balance=1.0))
    assert all(p.label is Direction.XtoY for p in allx)


@pytest.mark.parametrize("family", FAMILIES)
def test_swap_consistency(family):
    cfg = GenConfig.univariate(n_pairs=2, m=300) if family == "uni_multi" else GenConfig(family=family, **SMALL)
    fwd = make_pair(cfg, 1, Direction.XtoY)
    rev = make_pair(cfg, 1, Direction.YtoX)
    assert rev.label is Direction.YtoX
    assert np.array_equal(rev.x, fwd.y) and np.array_equal(rev.y, fwd.x)


@pytest.mark.parametrize("family", ["mce_poly", "mce_net", "mce_sigmix"])
def test_noise_independent_of_cause(family):
    cfg = GenConfig(family=family, n_pairs=2, m=1000, dim=10, noise_dim=10, label_balance=1.0)
    for p in gen_pairs(cfg):
        c = np.corrcoef(np.hstack([p.x, p.e_true]).T)[: p.d_x, p.d_x:]
        assert np.mean(np.abs(c) < 4 / np.sqrt(p.m)) >= 0.95


def _cubic_features(x):
    cols = [np.ones(len(x))]
    d = x.shape[1]
    for deg in (1, 2, 3):
        for idx in itertools.combinations_with_replacement(range(d), deg):
            cols.append(np.prod(x[:, idx], axis=1))
    return np.column_stack(cols)


def test_poly_noise_free_limit_is_deterministic():
    # With vanishing noise, Y is a cubic polynomial of X; a polynomial least-squares
    # regressor fitted on half the samples predicts the other half almost exactly.
    cfg = GenConfig(family="mce_poly", n_pairs=3, m=1000, dim=4, noise_dim=4, sigma2=1e-8, label_balance=1.0)
    for p in gen_pairs(cfg):
        feats = _cubic_features(p.x)
        tr, te = slice(0, 500), slice(500, None)
        coef, *_ = np.linalg.lstsq(feats[tr], p.y[tr], rcond=None)
        resid = feats[te] @ coef - p.y[te]
        nmse = np.sum(resid ** 2) / np.sum((p.y[te] - p.y[te].mean(0)) ** 2)
        assert nmse < 0.05


def test_uni_multi_records_mechanism():
    pairs = gen_pairs(GenConfig.univariate(n_pairs=40, m=300))
    assert {p.meta["mechanism"] for p in pairs} == {"linear", "poly2", "poly3"}
    assert {p.meta["cause_mechanism"] for p in pairs} == {"linear", "poly2", "poly3"}
    assert len({p.meta["noise"] for p in pairs}) == 4


def test_regenerate_keeps_cause_and_scales_noise():
    cfg = GenConfig(family="mce_sigmix", **SMALL, label_balance=1.0)
    p = gen_pairs(cfg)[0]
    q = regenerate(p, 2.0)
    assert np.array_equal(p.x, q.x)
    np.testing.assert_allclose(q.e_true, 2.0 * p.e_true, rtol=1e-15)
    assert q.meta["noise_mult"] == 2.0


# --- balancing ---------------------------------------------------------------

FAST_AE = BalanceConfig(epochs=20)


def test_balance_infinite_tol_is_identity():
    pairs = gen_pairs(GenConfig(family="mce_poly", **SMALL))
    out, outcomes = balance_dataset(pairs, FAST_AE, tol=float("inf"))
    assert all(a is b for a, b in zip(out, pairs))
    assert all(o.iterations == 0 and o.balanced for o in outcomes)


def test_balance_already_balanced_pair_unchanged():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((200, 4))
    p = PairInstance("b", x, x[:, ::-1].copy(), Direction.XtoY)
    q, o = balance_pair(p, FAST_AE, tol=0.1)
    assert q is p and o.iterations == 0 and o.gap_before == pytest.approx(0.0, abs=0.1)


def test_balance_never_worsens_gap():
    pairs = gen_pairs(GenConfig(family="mce_sigmix", n_pairs=3, m=200, dim=8, noise_dim=8))
    _, outcomes = balance_dataset(pairs, FAST_AE, tol=0.05, max_iters=4)
    for o in outcomes:
        assert o.gap_after <= o.gap_before
        if o.balanced:
            assert o.gap_after <= 0.05


def test_balance_sigmix_batch():
    pairs = gen_pairs(GenConfig(family="mce_sigmix", n_pairs=10))
    _, outcomes = balance_dataset(pairs, tol=0.25, max_iters=8)
    assert sum(o.balanced for o in outcomes) >= 7
    assert all(o.iterations <= 8 for o in outcomes)


# --- cause augmentation ------------------------------------------------------

def test_augment_rejects_zero_dims():
    p = gen_pairs(GenConfig(family="mce_poly", **SMALL))[0]
    with pytest.raises(ValueError):
        augment_cause_complexity(p, 0, 1.0, seed=0)


@pytest.mark.parametrize("label", [Direction.XtoY, Direction.YtoX])
def test_augment_concatenates_on_cause_side(label):
    cfg = GenConfig(family="mce_poly", **SMALL)
    p = make_pair(cfg, 0, label)
    q = augment_cause_complexity(p, 3, 10.0, seed=1)
    cause_before, cause_after = (p.x, q.x) if label is Direction.XtoY else (p.y, q.y)
    effect_before, effect_after = (p.y, q.y) if label is Direction.XtoY else (p.x, q.x)
    assert cause_after.shape[1] == cause_before.shape[1] + 3
    assert np.array_equal(cause_after[:, : cause_before.shape[1]], cause_before)
    assert np.array_equal(effect_after, effect_before)
    assert q.label is p.label and np.array_equal(q.e_true, p.e_true)


def test_augment_flips_oracle_complexity():
    rng = np.random.default_rng(3)
    x = 0.3 * rng.standard_normal((500, 3))
    y = x @ rng.normal(size=(3, 3)) + rng.standard_normal((500, 3))
    p = PairInstance("lemma", x, y, Direction.XtoY)
    r = 2
    assert linear_ae_oracle(p.x, r) < linear_ae_oracle(p.y, r)
    q = augment_cause_complexity(p, 4, 5.0, seed=0)
    assert linear_ae_oracle(q.x, r) > linear_ae_oracle(q.y, r)


# --- directory format ----------------------------------------------------------

def test_dir_roundtrip(tmp_path):
    pairs = gen_pairs(GenConfig(family="mce_net", n_pairs=3, m=30, dim=3, noise_dim=2))
    pairs[1].weight = 0.25
    save_pair_dir(pairs, tmp_path)
    back = load_pair_dir(tmp_path)
    assert [p.id for p in back] == [p.id for p in pairs]
    for a, b in zip(pairs, back):
        assert a.label is b.label and a.weight == b.weight
        # 17 significant digits reproduce doubles exactly
        assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_dir_tuebingen_style_two_columns(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "pair0001.txt", rng.normal(size=(99, 2)))
    (tmp_path / "meta.tsv").write_text("pair0001\t1\t1\n")
    [p] = load_pair_dir(tmp_path)
    assert p.m == 99 and p.d_x == p.d_y == 1 and p.label is Direction.XtoY


def test_dir_missing_data_file_named(tmp_path):
    (tmp_path / "meta.tsv").write_text("ghost\t0\t1\n")
    with pytest.raises(PairFormatError, match="ghost.txt"):
        load_pair_dir(tmp_path)


def test_dir_missing_meta(tmp_path):
    with pytest.raises(PairFormatError, match="meta"):
        load_pair_dir(tmp_path)


@pytest.mark.parametrize("meta, body, where", [
    ("a\t1\n", "1 2\n", "meta.tsv:1"),
    ("a\t7\t1\n", "1 2\n", "meta.tsv:1"),
    ("a\t1\t1\n", "1 2\n3\n", "a.txt:2"),
    ("a\t1\t1\n", "1 x\n", "a.txt:1"),
])
def test_dir_malformed_rows_have_positions(tmp_path, meta, body, where):
    (tmp_path / "meta.tsv").write_text(meta)
    (tmp_path / "a.txt").write_text(body)
    with pytest.raises(PairFormatError, match=where):
        load_pair_dir(tmp_path)


def test_pair_validation():
    with pytest.raises(ValueError):
        PairInstance("p", np.zeros(3), np.zeros(4), Direction.XtoY)
    with pytest.raises(ValueError):
        PairInstance("p", np.zeros(1), np.zeros(1), Direction.XtoY)
    with pytest.raises(ValueError):
        PairInstance("p", np.zeros(3), np.zeros(3), Direction.undecided)
