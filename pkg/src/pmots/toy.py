"""Bi-objective chain used to smoke-test the engine: ``f(x) = (x, n - 1 - x)``."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from pmots.tabu import ProblemAdapter


class ChainProblem(ProblemAdapter):
    objective_names = ("f_1", "f_2")

    def __init__(self, size: int = 16) -> None:
        if size < 1:
            raise ValueError("size must be >= 1")
        self.size = size

    def initial_front(self, k, rng):
        return [int(x) for x in rng.integers(0, self.size, size=k)]

    def neighborhood(self, solution):
        return [((solution, nb), nb) for nb in (solution - 1, solution + 1) if 0 <= nb < self.size]

    def evaluate(self, solution):
        return (float(solution), float(self.size - 1 - solution))

    def move_attribute(self, move, solution):
        return move[0]

    def blocking_attributes(self, move, solution):
        return (move[1],)

    def subset_label(self, solution):
        return solution

    def enumerate_solutions(self, min_active: int = 0, max_active: int | None = None) -> Iterator[int]:
        yield from range(self.size)

    def count_solutions(self, min_active: int = 0, max_active: int | None = None) -> int:
        return self.size
