"""Cause-effect pair container and the on-disk pair-directory format.

Directory layout::

    meta.tsv        pair_id<TAB>label<TAB>weight   (label 1: first block causes second)
    dims.tsv        pair_id<TAB>d_x<TAB>d_y        (optional, defaults to 1/1)
    <pair_id>.txt   m rows of whitespace-separated floats, d_x + d_y columns
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class Direction(str, Enum):
    XtoY = "XtoY"
    YtoX = "YtoX"
    undecided = "undecided"

    @property
    def label(self) -> int:
        if self is Direction.undecided:
            raise ValueError("undecided has no binary label")
        return 1 if self is Direction.XtoY else 0

    @classmethod
    def from_label(cls, label: int) -> "Direction":
        if label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {label!r}")
        return cls.XtoY if label == 1 else cls.YtoX

    def flipped(self) -> "Direction":
        return {Direction.XtoY: Direction.YtoX, Direction.YtoX: Direction.XtoY}.get(self, self)


class PairFormatError(ValueError):
    """Malformed or inconsistent pair directory."""


@dataclass
class PairInstance:
    id: str
    x: np.ndarray
    y: np.ndarray
    label: Direction
    e_true: np.ndarray | None = None
    weight: float = 1.0
    # generator bookkeeping (family, seeds, noise multiplier); not written to disk
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = _as_matrix(self.x)
        self.y = _as_matrix(self.y)
        self.label = Direction(self.label)
        if self.label is Direction.undecided:
            raise ValueError("a pair's ground-truth label cannot be undecided")
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"pair {self.id}: x has {self.x.shape[0]} rows, y has {self.y.shape[0]}")
        if self.x.shape[0] < 2:
            raise ValueError(f"pair {self.id}: need at least 2 samples")
        if self.e_true is not None:
            self.e_true = _as_matrix(self.e_true)
            if self.e_true.shape[0] != self.x.shape[0]:
                raise ValueError(f"pair {self.id}: e_true row count mismatch")
        if not self.weight > 0:
            raise ValueError(f"pair {self.id}: weight must be positive")

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_y(self) -> int:
        return self.y.shape[1]

    def swapped(self) -> "PairInstance":
        """Same pair with the two variables exchanged (label flips accordingly)."""
        return PairInstance(self.id, self.y, self.x, self.label.flipped(), self.e_true, self.weight,
                            dict(self.meta))


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {a.shape}")
    return a


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_pair_dir(pairs: list[PairInstance], path: str | os.PathLike) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "meta.tsv", "w") as meta, open(path / "dims.tsv", "w") as dims:
        for p in pairs:
            meta.write(f"{p.id}\t{p.label.label}\t{_fmt(p.weight)}\n")
            dims.write(f"{p.id}\t{p.d_x}\t{p.d_y}\n")
            block = np.hstack([p.x, p.y])
            with open(path / f"{p.id}.txt", "w") as f:
                for row in block:
                    f.write(" ".join(_fmt(v) for v in row))
                    f.write("\n")


def _read_tsv(fname: Path, ncols: int) -> list[list[str]]:
    rows = []
    with open(fname) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != ncols:
                raise PairFormatError(f"{fname}:{lineno}: expected {ncols} tab-separated fields, got {len(parts)}")
            rows.append(parts)
    return rows


def load_pair_dir(path: str | os.PathLike) -> list[PairInstance]:
    path = Path(path)
    meta_file = path / "meta.tsv"
    if not meta_file.is_file():
        raise PairFormatError(f"{meta_file}: missing meta file")
    dims = {}
    if (path / "dims.tsv").is_file():
        for lineno, (pid, dx, dy) in enumerate(_read_tsv(path / "dims.tsv", 3), 1):
            try:
                dims[pid] = (int(dx), int(dy))
            except ValueError:
                raise PairFormatError(f"{path / 'dims.tsv'}:{lineno}: dims must be integers") from None
    pairs = []
    for lineno, (pid, label, weight) in enumerate(_read_tsv(meta_file, 3), 1):
        try:
            lab = int(label)
            w = float(weight)
            direction = Direction.from_label(lab)
        except ValueError as e:
            raise PairFormatError(f"{meta_file}:{lineno}: {e}") from None
        data_file = path / f"{pid}.txt"
        if not data_file.is_file():
            raise PairFormatError(f"{meta_file}:{lineno}: data file {data_file.name} not found")
        d_x, d_y = dims.get(pid, (1, 1))
        block = _read_block(data_file, d_x + d_y)
        try:
            pairs.append(PairInstance(pid, block[:, :d_x], block[:, d_x:], direction, weight=w))
        except ValueError as e:
            raise PairFormatError(f"{data_file}: {e}") from None
    return pairs


def _read_block(fname: Path, ncols: int) -> np.ndarray:
    rows = []
    with open(fname) as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != ncols:
                raise PairFormatError(f"{fname}:{lineno}: expected {ncols} columns, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise PairFormatError(f"{fname}:{lineno}: non-numeric value") from None
    if not rows:
        raise PairFormatError(f"{fname}: no data rows")
    return np.array(rows, dtype=np.float64)
