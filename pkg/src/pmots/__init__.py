"""Parallel multiobjective Tabu search with wireless planning and routing models."""
from pmots.kernels import BACKEND
from pmots.pareto import (
    ArityError,
    EvaluatedSolution,
    ParetoArchive,
    archive_insert,
    dominates,
    non_dominated_filter,
    pareto_rank,
    select_representatives,
)
from pmots.tabu import Engine, PmotsConfig, ProblemAdapter, RunReport, TabuList, run, sample_tenure, step_path

__version__ = "0.1.0"

__all__ = [
    "ArityError", "BACKEND", "Engine", "EvaluatedSolution", "ParetoArchive", "PmotsConfig", "ProblemAdapter",
    "RunReport", "TabuList", "archive_insert", "dominates", "non_dominated_filter", "pareto_rank", "run",
    "sample_tenure", "select_representatives", "step_path",
]
