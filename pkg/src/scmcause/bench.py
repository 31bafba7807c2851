"""Benchmark orchestration: score every pair of a dataset with one method and aggregate."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .config import TrainConfig
from .metrics import accuracy, roc_auc
from .multiscm import infer_direction_adversarial
from .pairs import PairInstance
from .report import BenchmarkReport, DirectionReport
from .univariate import AeqConfig, infer_direction_aeq, infer_direction_entropy

log = logging.getLogger(__name__)

METHODS = ("aeq", "entropy", "adversarial", "adversarial_no_backprop")
UNIVARIATE_ONLY = ("aeq", "entropy")


@dataclass(frozen=True)
class BenchConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    aeq: AeqConfig = field(default_factory=AeqConfig)
    bins: int = 50

    def with_lambda(self, lam: float) -> "BenchConfig":
        return replace(self, train=replace(self.train, lam=lam))

    def snapshot(self, method: str) -> dict:
        if method in ("adversarial", "adversarial_no_backprop"):
            return {"train": asdict(self.train)}
        if method == "aeq":
            return {"aeq": asdict(self.aeq)}
        return {"bins": self.bins}


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("CC_THREADS", "1")))
    except ValueError:
        return 1


def evaluate_pair(pair: PairInstance, method: str, cfg: BenchConfig) -> DirectionReport:
    if method == "aeq":
        return infer_direction_aeq(pair, cfg.aeq)
    if method == "entropy":
        return infer_direction_entropy(pair, cfg.bins)
    if method == "adversarial":
        return infer_direction_adversarial(pair, cfg.train)
    if method == "adversarial_no_backprop":
        return infer_direction_adversarial(pair, cfg.train, indep_backprop=False, method=method)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _evaluate_job(args) -> DirectionReport:
    pair, method, cfg = args
    with threadpool_limits(1):
        return evaluate_pair(pair, method, cfg)


def check_applicable(pairs: list[PairInstance], method: str) -> None:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if not pairs:
        raise ValueError("dataset is empty")
    if method in UNIVARIATE_ONLY:
        bad = [p.id for p in pairs if p.d_x != 1 or p.d_y != 1]
        if bad:
            raise ValueError(f"method {method} needs univariate pairs; multivariate: {', '.join(bad[:5])}")


def _mean_or_none(values) -> float | None:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def aggregate(dataset: str, method: str, config: dict, pairs: list[PairInstance],
              reports: list[DirectionReport], wall_time: float = 0.0) -> BenchmarkReport:
    labels = [p.label.label for p in pairs]
    weights = [p.weight for p in pairs]
    scores = [r.score for r in reports]
    if len(set(labels)) == 2:
        auc = roc_auc(scores, labels).auc
    else:
        log.warning("dataset %s has a single label class; AUC undefined", dataset)
        auc = None
    causal, anticausal = [], []
    for r, lab in zip(reports, labels):
        if r.fit_xy is None:
            continue
        fc, fe = (r.fit_xy, r.fit_yx) if lab == 1 else (r.fit_yx, r.fit_xy)
        causal.append(fc.ind)
        anticausal.append(fe.ind)
    return BenchmarkReport(
        dataset=dataset, method=method, config=config, pairs=reports, labels=labels, weights=weights,
        auc=auc, accuracy=accuracy(reports, labels, weights),
        mean_ind_causal=_mean_or_none(causal), mean_ind_anticausal=_mean_or_none(anticausal),
        wall_time=wall_time,
    )


def run_benchmark(pairs: list[PairInstance], method: str, cfg: BenchConfig = BenchConfig(),
                  dataset: str = "dataset", workers: int | None = None) -> BenchmarkReport:
    """Score each pair independently (optionally in CC_THREADS processes) and fold in pair-id order."""
    check_applicable(pairs, method)
    pairs = sorted(pairs, key=lambda p: p.id)
    workers = n_workers() if workers is None else workers
    t0 = time.perf_counter()
    jobs = [(p, method, cfg) for p in pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            reports = list(ex.map(_evaluate_job, jobs))
    else:
        reports = [_evaluate_job(j) for j in jobs]
    return aggregate(dataset, method, cfg.snapshot(method), pairs, reports, time.perf_counter() - t0)


def lambda_sweep(pairs: list[PairInstance], grid, cfg: BenchConfig = BenchConfig(),
                 dataset: str = "dataset", workers: int | None = None) -> list[tuple[float, float]]:
    """AUC of the adversarial method for each lambda; every run reuses the same seeds."""
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(not (v >= 0 and math.isfinite(v)) for v in grid):
        raise ValueError("lambda values must be finite and >= 0")
    rows = []
    for lam in grid:
        rep = run_benchmark(pairs, "adversarial", cfg.with_lambda(lam), dataset, workers)
        rows.append((lam, rep.auc))
    return rows
