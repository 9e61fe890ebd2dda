"""Recipe runner, step markers and the command-line interface."""
from .config import RECIPES, RunConfig
from .runner import (
    derive_seed,
    run_all,
    run_step1_train,
    run_step2_extract,
    run_step3_score,
    run_step4_evaluate,
    trial_dir,
    validate_marker,
)

__all__ = [
    "RECIPES",
    "RunConfig",
    "derive_seed",
    "run_all",
    "run_step1_train",
    "run_step2_extract",
    "run_step3_score",
    "run_step4_evaluate",
    "trial_dir",
    "validate_marker",
]
