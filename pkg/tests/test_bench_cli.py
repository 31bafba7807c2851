import csv
import json

import numpy as np
import pytest

from scmcause.bench import BenchConfig, lambda_sweep, run_benchmark
from scmcause.cli import main
from scmcause.config import TrainConfig
from scmcause.datagen import GenConfig, gen_pairs
from scmcause.metrics import accuracy, roc_auc
from scmcause.pairs import save_pair_dir
from scmcause.report import read_report

TINY_TRAIN = TrainConfig(epochs=3, batch_size=32)
TINY = BenchConfig(train=TINY_TRAIN)


@pytest.fixture(scope="module")
def multi_pairs():
    return gen_pairs(GenConfig(family="mce_poly", n_pairs=4, m=80, dim=4, noise_dim=2, seed=3))


@pytest.fixture(scope="module")
def uni_pairs():
    return gen_pairs(GenConfig.univariate(n_pairs=6, m=300, seed=2))


def _recompute(report):
    scores = [p.score for p in report.pairs]
    auc = roc_auc(scores, report.labels).auc
    acc = accuracy(report.pairs, report.labels, report.weights)
    return auc, acc


# --- orchestration -------------------------------------------------------------

def test_entropy_two_pairs_recomputable(uni_pairs):
    two = [p for p in uni_pairs if p.label.label == 1][:1] + [p for p in uni_pairs if p.label.label == 0][:1]
    rep = run_benchmark(two, "entropy")
    assert len(rep.pairs) == 2 and rep.mean_ind_causal is None
    auc, acc = _recompute(rep)
    assert abs(auc - rep.auc) <= 1e-12 and abs(acc - rep.accuracy) <= 1e-12


def test_adversarial_aggregates_recomputable(multi_pairs):
    rep = run_benchmark(multi_pairs, "adversarial", TINY)
    auc, acc = _recompute(rep)
    assert abs(auc - rep.auc) <= 1e-12 and abs(acc - rep.accuracy) <= 1e-12
    causal = [(p.fit_xy if lab else p.fit_yx).ind for p, lab in zip(rep.pairs, rep.labels)]
    anti = [(p.fit_yx if lab else p.fit_xy).ind for p, lab in zip(rep.pairs, rep.labels)]
    assert abs(np.mean(causal) - rep.mean_ind_causal) <= 1e-12
    assert abs(np.mean(anti) - rep.mean_ind_anticausal) <= 1e-12


def test_pairs_folded_in_id_order(multi_pairs):
    rep = run_benchmark(list(reversed(multi_pairs)), "adversarial", TINY)
    assert [p.pair_id for p in rep.pairs] == sorted(p.id for p in multi_pairs)


def test_no_backprop_equals_lambda_zero(multi_pairs):
    a = run_benchmark(multi_pairs, "adversarial_no_backprop", TINY)
    b = run_benchmark(multi_pairs, "adversarial", TINY.with_lambda(0.0))
    assert [p.score for p in a.pairs] == [p.score for p in b.pairs]


def test_seed_stability_and_worker_independence(multi_pairs):
    a = run_benchmark(multi_pairs, "adversarial", TINY, workers=1)
    b = run_benchmark(multi_pairs, "adversarial", TINY, workers=1)
    c = run_benchmark(multi_pairs, "adversarial", TINY, workers=2)
    assert a.without_timing() == b.without_timing() == c.without_timing()


def test_cc_threads_env(monkeypatch, uni_pairs):
    monkeypatch.setenv("CC_THREADS", "1")
    a = run_benchmark(uni_pairs, "entropy")
    monkeypatch.setenv("CC_THREADS", "3")
    b = run_benchmark(uni_pairs, "entropy")
    assert a.without_timing() == b.without_timing()


def test_dimension_mismatch_rejected_before_training(multi_pairs):
    with pytest.raises(ValueError, match="univariate"):
        run_benchmark(multi_pairs, "aeq")
    with pytest.raises(ValueError):
        run_benchmark(multi_pairs, "bogus")
    with pytest.raises(ValueError):
        run_benchmark([], "entropy")


def test_single_class_dataset_has_no_auc(uni_pairs):
    one = [p for p in uni_pairs if p.label.label == 1]
    rep = run_benchmark(one, "entropy")
    assert rep.auc is None and 0.0 <= rep.accuracy <= 1.0


def test_lambda_sweep_single_row_matches_benchmark(multi_pairs):
    [(lam, auc)] = lambda_sweep(multi_pairs, [0.1], TINY)
    assert lam == 0.1
    assert auc == run_benchmark(multi_pairs, "adversarial", TINY.with_lambda(0.1)).auc


def test_lambda_sweep_rejects_bad_grid(multi_pairs):
    with pytest.raises(ValueError):
        lambda_sweep(multi_pairs, [], TINY)
    with pytest.raises(ValueError):
        lambda_sweep(multi_pairs, [-1.0], TINY)


# --- CLI -------------------------------------------------------------------------

@pytest.fixture()
def uni_dir(tmp_path):
    d = tmp_path / "uni"
    assert main(["generate", "--family", "uni_multi", "--n-pairs", "4", "--m", "300", "--out", str(d)]) == 0
    return d


def test_cli_generate_and_benchmark_json(uni_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["benchmark", "--method", "entropy", "--data", str(uni_dir), "--out", str(out)]) == 0
    rep = read_report(out)
    assert len(rep.pairs) == 4 and "AUC" in capsys.readouterr().out


def test_cli_infer_csv(uni_dir, tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["infer", "--method", "entropy", "--data", str(uni_dir), "--out", str(out), "--format", "csv"]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 5
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 4


def test_cli_usage_errors(uni_dir, tmp_path):
    out = str(tmp_path / "r.json")
    assert_exit = lambda argv: pytest.raises(SystemExit, main, argv).value.code
    assert assert_exit(["benchmark", "--method", "entropy", "--data", str(uni_dir), "--out", out,
                        "--format", "xml"]) == 1
    assert assert_exit(["benchmark", "--method", "nope", "--data", str(uni_dir), "--out", out]) == 1
    assert assert_exit([]) == 1
    assert main(["generate", "--family", "mce_poly", "--n-pairs", "0", "--out", out]) == 1
    assert main(["benchmark", "--method", "adversarial", "--data", str(uni_dir), "--out", out,
                 "--epochs", "0"]) == 1


def test_cli_data_errors(uni_dir, tmp_path):
    out = str(tmp_path / "r.json")
    assert main(["benchmark", "--method", "entropy", "--data", str(tmp_path / "missing"), "--out", out]) == 2
    multi = tmp_path / "multi"
    save_pair_dir(gen_pairs(GenConfig(family="mce_net", n_pairs=2, m=300, dim=2, noise_dim=1)), multi)
    assert main(["benchmark", "--method", "aeq", "--data", str(multi), "--out", out]) == 2
    (uni_dir / "meta.tsv").write_text("pair0000\t9\t1\n")
    assert main(["benchmark", "--method", "entropy", "--data", str(uni_dir), "--out", out]) == 2


def test_cli_sweep_lambda(tmp_path):
    data = tmp_path / "d"
    save_pair_dir(gen_pairs(GenConfig(family="mce_poly", n_pairs=2, m=60, dim=3, noise_dim=1)), data)
    out = tmp_path / "curve.csv"
    assert main(["sweep-lambda", "--data", str(data), "--grid", "1e-3,0.1", "--out", str(out), "--epochs", "2"]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["lambda", "auc"] and [float(r[0]) for r in rows[1:]] == [1e-3, 0.1]


def test_cli_check_gradients(capsys):
    assert main(["check-gradients", "--n-nets", "3"]) == 0
    assert capsys.readouterr().out.count("ok") == 6
    assert main(["check-gradients", "--n-nets", "2", "--tol", "1e-30"]) == 2


def test_cli_epochs_applies_to_report_config(uni_dir, tmp_path):
    out = tmp_path / "r.json"
    assert main(["benchmark", "--method", "aeq", "--data", str(uni_dir), "--out", str(out),
                 "--epochs", "2", "--k", "50", "--seed", "5"]) == 0
    cfg = json.loads(out.read_text())["config"]["aeq"]
    assert cfg["k"] == 50 and cfg["train"]["epochs"] == 2 and cfg["train"]["seed"] == 5
