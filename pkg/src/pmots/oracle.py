"""Exhaustive ground truth for small instances, and solution-space counting."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import islice
from math import comb
from typing import Any, Iterable, Optional

from pmots.pareto import EvaluatedSolution, ParetoArchive
from pmots.tabu import ProblemAdapter

DEFAULT_CAP = 10 ** 7


class CapExceeded(RuntimeError):
    """The enumeration would visit more solutions than allowed."""

    def __init__(self, count: int, cap: int) -> None:
        super().__init__(f"enumeration of {count} solutions exceeds the cap of {cap}")
        self.count = count
        self.cap = cap


class EmptySpace(ValueError):
    """The requested enumeration contains no solution."""


def subset_size(m: int, n: int, n_powers: int, n_directions: int) -> int:
    """Number of AP plans with exactly ``n`` of ``m`` sites active (exact integer)."""
    if not 0 <= n <= m:
        raise ValueError("need 0 <= n <= m")
    return comb(m, n) * (n_powers * n_directions) ** n


@dataclass
class EnumerationSpec:
    problem: ProblemAdapter
    min_active: int = 0
    max_active: Optional[int] = None
    cap: int = DEFAULT_CAP

    def count(self) -> int:
        return self.problem.count_solutions(self.min_active, self.max_active)

    def solutions(self) -> Iterable[Any]:
        return self.problem.enumerate_solutions(self.min_active, self.max_active)


def exhaustive_pareto(spec: EnumerationSpec, batch: int = 4096) -> ParetoArchive:
    """Exact Pareto front of every enumerated solution.

    Raises:
        CapExceeded: the space is larger than ``spec.cap``.
        EmptySpace: nothing to enumerate.
    """
    total = spec.count()
    if total > spec.cap:
        raise CapExceeded(total, spec.cap)
    if total == 0:
        raise EmptySpace("enumeration space is empty")
    archive = ParetoArchive(spec.problem.objective_arity or None)
    it = iter(spec.solutions())
    next_id = 0
    while True:
        chunk = list(islice(it, batch))
        if not chunk:
            break
        for sol, obj in zip(chunk, spec.problem.evaluate_many(chunk)):
            if obj is not None:
                archive.insert(EvaluatedSolution(next_id, sol, tuple(obj)))
            next_id += 1
    return archive
