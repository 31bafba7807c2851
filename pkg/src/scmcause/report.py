"""Per-pair and per-benchmark reports, with JSON and CSV serialization."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .pairs import Direction


class ReportFormatError(ValueError):
    pass


@dataclass
class FitSummary:
    final_err: float
    err_curve: list[float]
    c_real: float
    c_fake: float
    ind: float | None
    diverged: bool = False


@dataclass
class DirectionReport:
    pair_id: str
    method: str
    score: float
    decision: Direction
    fit_xy: FitSummary | None = None
    fit_yx: FitSummary | None = None
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        self.decision = Direction(self.decision)
        expected = Direction.XtoY if self.score > 0 else Direction.YtoX if self.score < 0 else Direction.undecided
        if self.decision is not expected:
            raise ValueError(f"decision {self.decision.value} inconsistent with score {self.score}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["decision"] = self.decision.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DirectionReport":
        d = dict(d)
        for k in ("fit_xy", "fit_yx"):
            if d.get(k) is not None:
                d[k] = FitSummary(**d[k])
        return cls(**d)


@dataclass
class BenchmarkReport:
    dataset: str
    method: str
    config: dict
    pairs: list[DirectionReport]
    labels: list[int]
    weights: list[float]
    auc: float | None
    accuracy: float
    mean_ind_causal: float | None
    mean_ind_anticausal: float | None
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset, "method": self.method, "config": self.config,
            "pairs": [p.to_dict() for p in self.pairs], "labels": list(self.labels),
            "weights": list(self.weights), "auc": self.auc, "accuracy": self.accuracy,
            "mean_ind_causal": self.mean_ind_causal, "mean_ind_anticausal": self.mean_ind_anticausal,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        d = dict(d)
        d["pairs"] = [DirectionReport.from_dict(p) for p in d["pairs"]]
        return cls(**d)

    def without_timing(self) -> dict:
        d = self.to_dict()
        d.pop("wall_time")
        return d


CSV_FIELDS = ("pair_id", "label", "method", "score", "decision", "err_xy", "err_yx", "ind_xy", "ind_yx")


def _num(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def write_report(report: BenchmarkReport, path: str | os.PathLike, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=1))
    elif fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_FIELDS)
            for p, lab in zip(report.pairs, report.labels):
                fx, fy = p.fit_xy, p.fit_yx
                w.writerow([
                    p.pair_id, lab, p.method, _num(p.score), p.decision.value,
                    _num(fx.final_err if fx else None), _num(fy.final_err if fy else None),
                    _num(fx.ind if fx else None), _num(fy.ind if fy else None),
                ])
    else:
        raise ValueError(f"unknown report format {fmt!r}; use json or csv")


def read_report(path: str | os.PathLike) -> BenchmarkReport:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ReportFormatError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    try:
        return BenchmarkReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ReportFormatError(f"{path}: not a benchmark report ({e})") from None
