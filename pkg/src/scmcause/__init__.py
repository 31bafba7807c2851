"""Cause-effect direction inference: AEQ complexity scores for univariate pairs
and adversarial SCM fitting for multivariate pairs."""

from .bench import BenchConfig, run_benchmark
from .config import TrainConfig
from .datagen import GenConfig, gen_pairs
from .multiscm import infer_direction_adversarial
from .pairs import Direction, PairInstance, load_pair_dir, save_pair_dir
from .univariate import AeqConfig, infer_direction_aeq, infer_direction_entropy

__all__ = [
    "AeqConfig", "BenchConfig", "Direction", "GenConfig", "PairInstance", "TrainConfig",
    "gen_pairs", "infer_direction_adversarial", "infer_direction_aeq", "infer_direction_entropy",
    "load_pair_dir", "run_benchmark", "save_pair_dir",
]

__version__ = "0.1.0"
