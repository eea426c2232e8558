"""Parallel multiobjective Tabu search (PMOTS).

K search paths each own a Tabu list and an RNG stream.  Every iteration a
path evaluates its neighbourhood, drops taboo neighbours, ranks the rest
against each other only, and moves to a uniformly drawn neighbour among
those with rank <= ``max_rank``.  That candidate set is then merged into the
shared archive, path by path, once all paths have stepped.
"""
from __future__ import annotations

import json
import pickle
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Optional, Sequence

import numpy as np

from pmots.pareto import EvaluatedSolution, ParetoArchive, dominates, local_ranks

Objectives = tuple[float, ...]


class ProblemAdapter:
    """What a problem model must provide to be searched.

    Subclasses implement :meth:`initial_front`, :meth:`neighborhood`,
    :meth:`evaluate`, :meth:`move_attribute` and :meth:`blocking_attributes`.
    ``evaluate`` returns ``None`` for an infeasible solution, which the engine
    drops from the neighbourhood.
    """

    objective_names: tuple[str, ...] = ()

    @property
    def objective_arity(self) -> int:
        return len(self.objective_names)

    def initial_front(self, k: int, rng: np.random.Generator) -> list[Any]:
        raise NotImplementedError

    def neighborhood(self, solution: Any) -> list[tuple[Any, Any]]:
        raise NotImplementedError

    def evaluate(self, solution: Any) -> Optional[Objectives]:
        raise NotImplementedError

    def evaluate_many(self, solutions: Sequence[Any]) -> list[Optional[Objectives]]:
        return [self.evaluate(s) for s in solutions]

    def move_attribute(self, move: Any, solution: Any) -> Hashable:
        """Attribute stored in the Tabu list once ``move`` is applied to ``solution``."""
        raise NotImplementedError

    def blocking_attributes(self, move: Any, solution: Any) -> Iterable[Hashable]:
        """Attributes whose presence in the Tabu list forbids ``move``."""
        raise NotImplementedError

    def subset_label(self, solution: Any) -> Any:
        """Which subset of the solution space ``solution`` belongs to."""
        return None


class TabuList:
    """FIFO of ``(attribute, expiry)``; an attribute is taboo at iteration ``i``
    while some entry for it has ``expiry > i``."""

    def __init__(self, t_min: int, t_max: int) -> None:
        if not 1 <= t_min <= t_max:
            raise ValueError(f"tenure bounds must satisfy 1 <= t_min <= t_max, got {t_min}, {t_max}")
        self.t_min = t_min
        self.t_max = t_max
        self.entries: deque[tuple[Hashable, int]] = deque()

    def add(self, attribute: Hashable, iteration: int, tenure: int) -> None:
        # Inserted at the end of `iteration`; forbidden for the next `tenure` iterations.
        self.entries.append((attribute, iteration + tenure + 1))

    def purge(self, iteration: int) -> None:
        self.entries = deque(e for e in self.entries if e[1] > iteration)

    def expiry(self, attribute: Hashable, iteration: int) -> Optional[int]:
        """Latest live expiry for ``attribute``, or ``None`` if not taboo."""
        latest = None
        for attr, exp in self.entries:
            if exp > iteration and attr == attribute:
                latest = exp if latest is None else max(latest, exp)
        return latest

    def is_taboo(self, attribute: Hashable, iteration: int) -> bool:
        return self.expiry(attribute, iteration) is not None

    def __len__(self) -> int:
        return len(self.entries)


def sample_tenure(rng: np.random.Generator, t_min: int, t_max: int) -> int:
    """Uniform integer in ``[t_min, t_max]``."""
    return int(rng.integers(t_min, t_max + 1))


@dataclass
class PmotsConfig:
    paths: int = 3
    iterations: int = 100
    max_rank: int = 1
    tenure_min: int = 1
    tenure_max: int = 5
    seed: int = 0
    threads: int = 1
    aspiration: bool = False

    def __post_init__(self) -> None:
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")
        if not 1 <= self.tenure_min <= self.tenure_max:
            raise ValueError("tenure bounds must satisfy 1 <= tenure_min <= tenure_max")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def path_rng(seed: int, k: int) -> np.random.Generator:
    """Stream for path ``k`` (``k = 0`` is reserved for the initial front)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & (2**64 - 1), k])))


@dataclass
class SearchPath:
    index: int
    solution: Any
    objectives: Objectives
    tabu: TabuList
    rng: np.random.Generator
    stalled_iterations: int = 0
    idle_iterations: int = 0


@dataclass
class StepResult:
    candidates: list[tuple[Any, Objectives]]
    evaluations: int
    stalled: bool = False
    fallback: bool = False


def step_path(
    path: SearchPath,
    problem: ProblemAdapter,
    archive: ParetoArchive,
    iteration: int,
    config: PmotsConfig,
) -> StepResult:
    """Advance one path by one iteration (mutates ``path``).

    The archive is only read, and only when ``config.aspiration`` is set.
    """
    path.tabu.purge(iteration)
    moves = problem.neighborhood(path.solution)
    if not moves:
        path.stalled_iterations += 1
        return StepResult([], 0, stalled=True)

    values = problem.evaluate_many([nb for _, nb in moves])
    evaluations = len(moves)

    admissible: list[int] = []
    blocked: list[tuple[int, int]] = []  # (expiry, position)
    for pos, ((move, _), obj) in enumerate(zip(moves, values)):
        if obj is None:
            continue
        expiries = [
            e for e in (path.tabu.expiry(a, iteration) for a in problem.blocking_attributes(move, path.solution))
            if e is not None
        ]
        if not expiries:
            admissible.append(pos)
        elif config.aspiration and not any(dominates(m.objectives, obj) or m.objectives == obj for m in archive):
            admissible.append(pos)
        else:
            blocked.append((max(expiries), pos))

    fallback = False
    if not admissible:
        if not blocked:
            path.stalled_iterations += 1
            return StepResult([], evaluations, stalled=True)
        admissible = [min(blocked)[1]]
        fallback = True

    objs = np.array([values[i] for i in admissible], dtype=np.float64)
    ranks = local_ranks(objs)
    chosen_positions = [admissible[i] for i in np.flatnonzero(ranks <= config.max_rank)]
    candidates = [(moves[p][1], values[p]) for p in chosen_positions]

    pick = chosen_positions[int(path.rng.integers(len(chosen_positions)))]
    move, neighbour = moves[pick]
    attribute = problem.move_attribute(move, path.solution)
    path.tabu.add(attribute, iteration, sample_tenure(path.rng, path.tabu.t_min, path.tabu.t_max))
    path.solution = neighbour
    path.objectives = tuple(values[pick])
    return StepResult(candidates, evaluations, fallback=fallback)


@dataclass
class IterationStats:
    iteration: int
    archive_size: int
    evaluations: int
    cumulative_evaluations: int
    subsets: list[Any]
    objectives: list[Objectives]
    stalled: list[bool]
    fallbacks: list[bool]

    def to_json(self) -> str:
        return json.dumps({
            "iteration": self.iteration,
            "archive_size": self.archive_size,
            "evaluations": self.evaluations,
            "cumulative_evaluations": self.cumulative_evaluations,
            "subsets": self.subsets,
            "objectives": [list(o) for o in self.objectives],
            "stalled": self.stalled,
            "fallbacks": self.fallbacks,
        }, separators=(",", ":"))


@dataclass
class RunReport:
    archive: ParetoArchive
    iterations: list[IterationStats] = field(default_factory=list)
    initial_evaluations: int = 0
    idle_iterations: list[int] = field(default_factory=list)

    @property
    def total_evaluations(self) -> int:
        return sum(s.evaluations for s in self.iterations)

    @property
    def stalled_paths(self) -> list[int]:
        """Indices of paths that stalled at least once."""
        hit = set()
        for s in self.iterations:
            hit.update(k + 1 for k, st in enumerate(s.stalled) if st)
        return sorted(hit)


class Engine:
    """Resumable PMOTS state machine; :func:`run` is the usual entry point."""

    def __init__(self, problem: ProblemAdapter, config: PmotsConfig) -> None:
        self.problem = problem
        self.config = config
        self.archive = ParetoArchive(problem.objective_arity or None)
        self.iteration = 0
        self.next_id = 0
        self.report = RunReport(self.archive)

        start = problem.initial_front(config.paths, path_rng(config.seed, 0))
        if len(start) != config.paths:
            raise ValueError(f"initial_front returned {len(start)} solutions, expected {config.paths}")
        values = problem.evaluate_many(start)
        self.report.initial_evaluations = len(start)
        self.paths: list[SearchPath] = []
        for k, (sol, obj) in enumerate(zip(start, values), start=1):
            if obj is None:
                raise ValueError(f"initial solution of path {k} is infeasible")
            self.paths.append(SearchPath(k, sol, tuple(obj), TabuList(config.tenure_min, config.tenure_max),
                                         path_rng(config.seed, k)))
        for p in self.paths:
            self._offer(p.solution, p.objectives)
        self.report.idle_iterations = [0] * config.paths

    def _offer(self, solution: Any, objectives: Objectives) -> bool:
        sol = EvaluatedSolution(self.next_id, solution, tuple(float(v) for v in objectives))
        self.next_id += 1
        return self.archive.insert(sol).accepted

    @property
    def done(self) -> bool:
        return self.iteration >= self.config.iterations

    def step(self, pool: Optional[ThreadPoolExecutor] = None) -> IterationStats:
        i = self.iteration
        if pool is None:
            results = [step_path(p, self.problem, self.archive, i, self.config) for p in self.paths]
        else:
            results = list(pool.map(lambda p: step_path(p, self.problem, self.archive, i, self.config), self.paths))

        evaluations = 0
        for p, res in zip(self.paths, results):
            evaluations += res.evaluations
            contributed = False
            for sol, obj in res.candidates:
                contributed |= self._offer(sol, obj)
            if contributed:
                p.idle_iterations = 0
            else:
                p.idle_iterations += 1
                self.report.idle_iterations[p.index - 1] += 1

        cumulative = (self.report.iterations[-1].cumulative_evaluations if self.report.iterations else 0) + evaluations
        stats = IterationStats(
            iteration=i,
            archive_size=len(self.archive),
            evaluations=evaluations,
            cumulative_evaluations=cumulative,
            subsets=[self.problem.subset_label(p.solution) for p in self.paths],
            objectives=[p.objectives for p in self.paths],
            stalled=[r.stalled for r in results],
            fallbacks=[r.fallback for r in results],
        )
        self.report.iterations.append(stats)
        self.iteration += 1
        return stats

    def run(self, progress=None) -> RunReport:
        pool = ThreadPoolExecutor(self.config.threads) if self.config.threads > 1 else None
        try:
            while not self.done:
                stats = self.step(pool)
                if progress is not None:
                    progress(stats)
        finally:
            if pool is not None:
                pool.shutdown()
        return self.report

    # -- checkpointing ----------------------------------------------------

    def save_checkpoint(self, path: str | Path) -> None:
        state = {
            "config": self.config,
            "iteration": self.iteration,
            "next_id": self.next_id,
            "archive": self.archive,
            "report": self.report,
            "paths": [
                (p.index, p.solution, p.objectives, list(p.tabu.entries), p.tabu.t_min, p.tabu.t_max,
                 p.rng.bit_generator.state, p.stalled_iterations, p.idle_iterations)
                for p in self.paths
            ],
        }
        Path(path).write_bytes(pickle.dumps(state, protocol=pickle.HIGHEST_PROTOCOL))

    @classmethod
    def load_checkpoint(cls, path: str | Path, problem: ProblemAdapter) -> "Engine":
        state = pickle.loads(Path(path).read_bytes())
        eng = cls.__new__(cls)
        eng.problem = problem
        eng.config = state["config"]
        eng.iteration = state["iteration"]
        eng.next_id = state["next_id"]
        eng.archive = state["archive"]
        eng.report = state["report"]
        eng.report.archive = eng.archive
        eng.paths = []
        for index, sol, obj, entries, t_min, t_max, rng_state, stalled, idle in state["paths"]:
            tabu = TabuList(t_min, t_max)
            tabu.entries = deque(entries)
            rng = np.random.Generator(np.random.PCG64())
            rng.bit_generator.state = rng_state
            eng.paths.append(SearchPath(index, sol, obj, tabu, rng, stalled, idle))
        return eng


def run(problem: ProblemAdapter, config: PmotsConfig, progress=None) -> RunReport:
    """Search ``problem`` and return the archive of non-dominated solutions found."""
    return Engine(problem, config).run(progress)
