"""Python bindings for the harmarena C++ core."""

from ._core import (
    Error,
    PrerequisiteError,
    ValidationError,
    bt_fit,
    dcg,
    elo_expected,
    elo_sequential,
    elo_update,
    leaderboard_rows,
    ndcg,
    run_pipeline,
    simulate_bias,
    win_rate,
)

__all__ = [
    "Error",
    "PrerequisiteError",
    "ValidationError",
    "bt_fit",
    "dcg",
    "elo_expected",
    "elo_sequential",
    "elo_update",
    "leaderboard_rows",
    "ndcg",
    "run_pipeline",
    "simulate_bias",
    "win_rate",
]
