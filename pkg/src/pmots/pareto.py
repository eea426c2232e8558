"""Dominance, ranking, the non-dominated archive and representative selection.

All criteria are minimized.  Objective vectors are plain tuples of floats;
comparisons are exact (no epsilon).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from pmots.kernels import dominator_counts


class ArityError(ValueError):
    """Objective vectors of different length were compared."""


@dataclass(frozen=True)
class EvaluatedSolution:
    id: int
    encoding: Any
    objectives: tuple[float, ...]


def _check_vector(v: Sequence[float]) -> None:
    for x in v:
        if not math.isfinite(x):
            raise ValueError(f"non-finite objective value {x!r}")


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere.

    >>> dominates((1, 2), (2, 3))
    True
    >>> dominates((1, 3), (3, 1))
    False
    """
    if len(a) != len(b):
        raise ArityError(f"arity mismatch: {len(a)} vs {len(b)}")
    _check_vector(a)
    _check_vector(b)
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def _objective_matrix(solutions: Sequence[EvaluatedSolution]) -> np.ndarray:
    arities = {len(s.objectives) for s in solutions}
    if len(arities) > 1:
        raise ArityError(f"mixed arities {sorted(arities)}")
    mat = np.array([s.objectives for s in solutions], dtype=np.float64)
    if mat.size and not np.all(np.isfinite(mat)):
        raise ValueError("non-finite objective value")
    return mat.reshape(len(solutions), -1)


def pareto_rank(solutions: Sequence[EvaluatedSolution]) -> dict[int, int]:
    """Map each solution id to ``1 + number of dominators`` within the set."""
    if not solutions:
        raise ValueError("cannot rank an empty set")
    counts = dominator_counts(_objective_matrix(solutions))
    return {s.id: int(c) + 1 for s, c in zip(solutions, counts)}


def local_ranks(objectives: np.ndarray) -> np.ndarray:
    """Rank array for a raw ``(n, m)`` objective matrix."""
    return dominator_counts(objectives) + 1


def non_dominated_filter(solutions: Sequence[EvaluatedSolution]) -> list[EvaluatedSolution]:
    """The rank-1 subset, in input order."""
    if not solutions:
        return []
    counts = dominator_counts(_objective_matrix(solutions))
    return [s for s, c in zip(solutions, counts) if c == 0]


@dataclass
class InsertOutcome:
    accepted: bool
    removed: list[EvaluatedSolution] = field(default_factory=list)
    reason: str = ""


class ParetoArchive:
    """Mutually non-dominated set of evaluated solutions.

    Pruning is eager: every insert keeps the invariant.  A solution whose
    objective vector equals a member's is rejected (first-in wins).
    """

    def __init__(self, arity: int | None = None) -> None:
        self.arity = arity
        self._members: list[EvaluatedSolution] = []
        self._vectors: set[tuple[float, ...]] = set()

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self):
        return iter(self._members)

    @property
    def members(self) -> list[EvaluatedSolution]:
        return list(self._members)

    def objective_set(self) -> set[tuple[float, ...]]:
        return set(self._vectors)

    def insert(self, sol: EvaluatedSolution) -> InsertOutcome:
        v = tuple(float(x) for x in sol.objectives)
        _check_vector(v)
        if self.arity is None:
            self.arity = len(v)
        elif len(v) != self.arity:
            raise ArityError(f"arity mismatch: archive has {self.arity}, got {len(v)}")
        if v in self._vectors:
            return InsertOutcome(False, reason="duplicate")

        beaten = []
        for idx, m in enumerate(self._members):
            mv = m.objectives
            m_le = v_le = True
            for a, b in zip(mv, v):
                if a > b:
                    m_le = False
                elif a < b:
                    v_le = False
            # vectors differ, so "<= everywhere" is domination
            if m_le:
                return InsertOutcome(False, reason="dominated")
            if v_le:
                beaten.append(idx)

        removed = []
        if beaten:
            drop = set(beaten)
            removed = [self._members[i] for i in beaten]
            self._members = [m for i, m in enumerate(self._members) if i not in drop]
            for r in removed:
                self._vectors.discard(r.objectives)
        if sol.objectives != v:
            sol = EvaluatedSolution(sol.id, sol.encoding, v)
        self._members.append(sol)
        self._vectors.add(v)
        return InsertOutcome(True, removed)

    def extend(self, solutions: Iterable[EvaluatedSolution]) -> int:
        """Insert in order; return the number accepted."""
        return sum(self.insert(s).accepted for s in solutions)


def archive_insert(archive: ParetoArchive, sol: EvaluatedSolution) -> tuple[ParetoArchive, InsertOutcome]:
    return archive, archive.insert(sol)


def select_representatives(
    front: Sequence[EvaluatedSolution],
    count: int,
    objective_ranges: Sequence[tuple[float, float]] | None = None,
) -> list[EvaluatedSolution]:
    """Greedy farthest-point subset of ``front`` in min-max normalized space.

    The first pick minimizes the sum of normalized criteria; each later pick
    maximizes its distance to the nearest already-picked member.  Ties go to
    the lowest id.  Result is in selection order.

    Args:
        front: candidate solutions, non-empty.
        count: number wanted (``>= 1``).
        objective_ranges: per-criterion ``(min, max)``; taken from ``front``
            when omitted.  A criterion with ``max == min`` contributes nothing.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not front:
        raise ValueError("front is empty")
    objs = _objective_matrix(front)
    if objective_ranges is None:
        lo, hi = objs.min(axis=0), objs.max(axis=0)
    else:
        if len(objective_ranges) != objs.shape[1]:
            raise ArityError("objective_ranges arity mismatch")
        lo = np.array([r[0] for r in objective_ranges], dtype=np.float64)
        hi = np.array([r[1] for r in objective_ranges], dtype=np.float64)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    norm = np.where(span > 0, (objs - lo) / safe, 0.0)

    ids = np.array([s.id for s in front])
    order = np.lexsort((ids,))  # positions by ascending id, for tie-breaks
    n_pick = min(count, len(front))

    sums = norm.sum(axis=1)
    first = min(order, key=lambda i: (sums[i], ids[i]))
    chosen = [int(first)]
    nearest = np.linalg.norm(norm - norm[first], axis=1)
    nearest[first] = -1.0
    while len(chosen) < n_pick:
        top = nearest.max()
        candidates = np.flatnonzero(nearest == top)
        pick = int(candidates[np.argmin(ids[candidates])])
        chosen.append(pick)
        nearest = np.minimum(nearest, np.linalg.norm(norm - norm[pick], axis=1))
        nearest[chosen] = -1.0
    return [front[i] for i in chosen]


# -- export ---------------------------------------------------------------

def _encoding_to_json(encoding: Any) -> Any:
    if isinstance(encoding, tuple):
        return [_encoding_to_json(e) for e in encoding]
    if isinstance(encoding, np.generic):
        return encoding.item()
    return encoding


def front_to_csv(solutions: Sequence[EvaluatedSolution], names: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", *names, "encoding"])
    for s in solutions:
        writer.writerow([
            s.id,
            *(repr(float(v)) for v in s.objectives),
            json.dumps(_encoding_to_json(s.encoding), separators=(",", ":")),
        ])
    return buf.getvalue()


def front_to_json(solutions: Sequence[EvaluatedSolution], names: Sequence[str]) -> str:
    records = []
    for s in solutions:
        rec: dict[str, Any] = {"id": s.id}
        for name, v in zip(names, s.objectives):
            rec[name] = float(v)
        rec["encoding"] = _encoding_to_json(s.encoding)
        records.append(rec)
    return json.dumps(records, indent=1) + "\n"


def _tupleize(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    return value


def read_front_csv(text: str) -> tuple[list[str], list[EvaluatedSolution], list[str]]:
    """Parse a CSV export.

    Returns ``(criterion names, solutions, raw data lines)``; raw lines are
    kept so a subset can be written back verbatim.
    """
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty front file")
    rows = list(csv.reader(lines))
    header = rows[0]
    if len(header) < 4 or header[0] != "id" or header[-1] != "encoding":
        raise ValueError("front header must be: id, criteria..., encoding")
    names = header[1:-1]
    solutions = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            objs = tuple(float(v) for v in row[1:-1])
            sol = EvaluatedSolution(int(row[0]), _tupleize(json.loads(row[-1])), objs)
        except (ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        _check_vector(objs)
        solutions.append(sol)
    return names, solutions, lines[1:]


def read_front_json(text: str) -> tuple[list[str], list[EvaluatedSolution]]:
    records = json.loads(text)
    if not isinstance(records, list):
        raise ValueError("front JSON must be an array")
    names: list[str] = []
    solutions = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "id" not in rec or "encoding" not in rec:
            raise ValueError(f"record {i}: needs id and encoding")
        keys = [k for k in rec if k not in ("id", "encoding")]
        if i == 0:
            names = keys
        elif keys != names:
            raise ValueError(f"record {i}: criteria {keys} differ from {names}")
        objs = tuple(float(rec[k]) for k in keys)
        _check_vector(objs)
        solutions.append(EvaluatedSolution(int(rec["id"]), _tupleize(rec["encoding"]), objs))
    return names, solutions
