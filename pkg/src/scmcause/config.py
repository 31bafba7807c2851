from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class TrainConfig:
    lr_main: float = 0.01
    lr_disc: float = 0.001
    epochs: int = 100
    batch_size: int = 64
    lam: float = 0.01
    seed: int = 0
    score_on_holdout: bool = False
    holdout_fraction: float = 0.2
    # redraw the decoupled (product-of-marginals) pairing every epoch
    redraw_decoupled: bool = True

    def __post_init__(self):
        for name in ("lr_main", "lr_disc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)
