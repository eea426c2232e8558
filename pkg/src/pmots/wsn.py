"""Routing evaluation in a wireless sensor network.

Each eligible node rebroadcasts with a probability drawn from a discrete set
``{0, ..., 1}``.  For a source/destination pair the model computes

* ``f_R``: probability the packet never arrives within ``hmax`` hops,
* ``f_D``: second moment of the relay count over first arrivals,
* ``f_E``: expected relay energy spent,

from a hop-stratified reach table built bottom-up over ``(node, hops left)``.
All forwarders are treated as transmitting constantly when computing the
interference that degrades each link.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterator, Optional, Sequence

import numpy as np

from pmots.kernels import wsn_criteria, wsn_link_matrix, wsn_reach
from pmots.tabu import ProblemAdapter

ForwardingSolution = tuple[float, ...]

ADD_SENTINEL = ("fake-node", "add")
DELETE_SENTINEL = ("fake-node", "delete")


@dataclass(frozen=True)
class LinkModel:
    """Attenuation ``(max(d, d0) / d0) ** -exponent``; link success
    ``exp(-beta * packet_bits / SINR)``."""

    exponent: float = 3.0
    d0_m: float = 1.0
    gamma: float = 1.0 / 16.0
    noise_w: float = 1e-3
    beta: float = 1.0
    packet_bits: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.d0_m <= 0 or self.noise_w < 0 or self.beta < 0 or self.packet_bits <= 0:
            raise ValueError("invalid link model parameters")

    @classmethod
    def with_spreading_factor(cls, factor: float, **kwargs) -> "LinkModel":
        return cls(gamma=1.0 / factor, **kwargs)


@dataclass
class WsnTopology:
    positions: np.ndarray                 # (N, 2) metres
    sources: tuple[int, ...]
    destinations: tuple[int, ...]
    tx_power_w: np.ndarray                # (N,)
    tx_energy_j: np.ndarray               # (N,)
    communicating: np.ndarray = field(default=None)  # (N,) bool
    density: Optional[float] = None
    radius_m: Optional[float] = None

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        n = len(self.positions)
        self.tx_power_w = np.broadcast_to(np.asarray(self.tx_power_w, dtype=np.float64), (n,)).copy()
        self.tx_energy_j = np.broadcast_to(np.asarray(self.tx_energy_j, dtype=np.float64), (n,)).copy()
        if self.communicating is None:
            self.communicating = np.ones(n, dtype=bool)
        self.communicating = np.asarray(self.communicating, dtype=bool)
        self.sources = tuple(int(s) for s in self.sources)
        self.destinations = tuple(int(d) for d in self.destinations)
        if n < 2:
            raise ValueError("need at least two nodes")
        if not self.destinations or not self.sources:
            raise ValueError("need at least one source and one destination")
        ends = self.sources + self.destinations
        if any(not 0 <= i < n for i in ends):
            raise ValueError("source/destination id out of range")
        if set(self.sources) & set(self.destinations):
            raise ValueError("sources and destinations must be disjoint")
        if not all(self.communicating[i] for i in ends):
            raise ValueError("sources and destinations must be communicating nodes")
        if np.any(self.tx_power_w <= 0) or np.any(self.tx_energy_j < 0):
            raise ValueError("transmit power must be > 0 and energy >= 0")

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def eligible(self) -> tuple[int, ...]:
        ends = set(self.sources) | set(self.destinations)
        return tuple(i for i in range(self.n_nodes) if i not in ends)


def generate_topology(
    density: float,
    radius_m: float,
    n: int,
    seed: int,
    tx_power_w: float = 0.1,
    tx_energy_j: float = 1.0,
) -> WsnTopology:
    """``n`` uniform points on a centred disk of area ``n / density``.

    Nodes within ``radius_m`` of the centre communicate; the source and
    destination are the farthest-apart communicating pair.
    """
    if density <= 0 or n < 2:
        raise ValueError("need density > 0 and n >= 2")
    rng = np.random.default_rng(seed)
    disk_r = math.sqrt(n / (density * math.pi))
    r = disk_r * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    comm = np.hypot(pos[:, 0], pos[:, 1]) <= radius_m
    idx = np.flatnonzero(comm)
    if len(idx) < 2:
        raise ValueError(f"only {len(idx)} node(s) within radius {radius_m} m; need 2")
    best, pair = -1.0, (int(idx[0]), int(idx[1]))
    for i, j in combinations(idx, 2):
        d = float(np.hypot(*(pos[i] - pos[j])))
        if d > best:
            best, pair = d, (int(i), int(j))
    return WsnTopology(pos, (pair[0],), (pair[1],), tx_power_w, tx_energy_j, comm, density, radius_m)


def attenuation_matrix(topology: WsnTopology, link: LinkModel) -> np.ndarray:
    """``a[k, j]`` from ``k`` to ``j``; the diagonal is 0."""
    pos = topology.positions
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    a = (np.maximum(d, link.d0_m) / link.d0_m) ** (-link.exponent)
    np.fill_diagonal(a, 0.0)
    return a


@dataclass
class Criteria:
    robustness: float
    delay: float
    energy: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.robustness, self.delay, self.energy)


def robustness_from_reach(reach_s: np.ndarray) -> float:
    return float(np.prod(1.0 - reach_s))


def arrival_distribution(reach_s: np.ndarray) -> np.ndarray:
    """``R_h``: first arrival exactly at ``h`` hops, ``h = 1..hmax``."""
    missed = np.concatenate([[1.0], np.cumprod(1.0 - reach_s)[:-1]])
    return reach_s * missed


def delay_from_reach(reach_s: np.ndarray) -> float:
    hops = np.arange(len(reach_s))
    return float(np.sum(hops.astype(np.float64) ** 2 * arrival_distribution(reach_s)))


class WsnProblem(ProblemAdapter):
    """Search over forwarding probabilities of the eligible (non-endpoint) nodes.

    A solution is a length-``N`` tuple of floats; endpoints are always 0.
    """

    def __init__(
        self,
        topology: WsnTopology,
        link: LinkModel | None = None,
        levels: Sequence[float] = (0.0, 1.0),
        hmax: int = 4,
        default_level: float | None = None,
        max_active: int | None = None,
        two_objective: bool = False,
        first_path_forwarders: int = 1,
        infeasible_tol: float = 0.0,
    ) -> None:
        self.topology = topology
        self.link = link or LinkModel()
        levels = tuple(sorted(float(v) for v in levels))
        if len(levels) < 2 or levels[0] != 0.0 or levels[-1] != 1.0 or len(set(levels)) != len(levels):
            raise ValueError("levels must be distinct, start at 0 and end at 1")
        self.levels = levels
        if hmax < 1:
            raise ValueError("hmax must be >= 1")
        self.hmax = hmax
        self.default_level = levels[-1] if default_level is None else float(default_level)
        if self.default_level not in levels[1:]:
            raise ValueError("default_level must be a non-zero level")
        self.eligible = topology.eligible
        if max_active is not None and not 0 <= max_active <= len(self.eligible):
            raise ValueError("max_active must lie in [0, eligible count]")
        self.max_active = max_active
        self.two_objective = two_objective
        self.first_path_forwarders = first_path_forwarders
        self.infeasible_tol = infeasible_tol
        self.objective_names = ("f_d", "f_e") if two_objective else ("f_r", "f_d", "f_e")
        self.atten = attenuation_matrix(topology, self.link)
        self._pairs = [(s, d) for s in topology.sources for d in topology.destinations]
        # grouped by destination so the kernels reuse one reach table per destination
        by_dest = sorted(self._pairs, key=lambda sd: sd[1])
        self._pair_src = np.array([s for s, _ in by_dest], dtype=np.int64)
        self._pair_dst = np.array([d for _, d in by_dest], dtype=np.int64)
        self._relay_mask = np.ones(topology.n_nodes)
        self._relay_mask[list(topology.sources + topology.destinations)] = 0.0

    @property
    def cap(self) -> int:
        return len(self.eligible) if self.max_active is None else self.max_active

    def empty_solution(self) -> ForwardingSolution:
        return (0.0,) * self.topology.n_nodes

    def solution_from(self, assignment: dict[int, float]) -> ForwardingSolution:
        x = [0.0] * self.topology.n_nodes
        for i, v in assignment.items():
            if i not in self.eligible:
                raise ValueError(f"node {i} cannot forward")
            if float(v) not in self.levels:
                raise ValueError(f"{v} is not a configured level")
            x[i] = float(v)
        return tuple(x)

    def _x(self, solution: ForwardingSolution) -> np.ndarray:
        x = np.asarray(solution, dtype=np.float64)
        if x.shape != (self.topology.n_nodes,):
            raise ValueError("solution length must equal node count")
        return x * self._relay_mask

    # -- link layer --------------------------------------------------------

    def interference_matrix(self, solution: ForwardingSolution) -> np.ndarray:
        """``I[i, j]``: expected interference at ``j`` on the link from ``i``."""
        x = self._x(solution)
        emit = self.topology.tx_power_w * x                      # P_k x_k
        total = emit @ self.atten                                # sum over k of P_k a_kj x_k
        return self.link.gamma * (total[None, :] - emit[:, None] * self.atten)

    def expected_interference(self, i: int, j: int, solution: ForwardingSolution) -> float:
        if i == j:
            raise ValueError("i and j must differ")
        return float(self.interference_matrix(solution)[i, j])

    def link_matrix(self, solution: ForwardingSolution) -> np.ndarray:
        """Link success probabilities ``p[i, j]``; the diagonal is 0."""
        return wsn_link_matrix(self._x(solution), self.atten, self.topology.tx_power_w,
                               self.link.gamma, self.link.noise_w, self.link.beta * self.link.packet_bits)

    def link_success(self, i: int, j: int, solution: ForwardingSolution) -> float:
        if i == j:
            raise ValueError("i and j must differ")
        return float(self.link_matrix(solution)[i, j])

    # -- criteria ------------------------------------------------------------

    def reach_table(self, solution: ForwardingSolution, destination: Optional[int] = None,
                    hmax: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """``(reach, spent)``, each ``(N, hmax)``: hop-``h`` arrival probability
        and expected relay energy from every start node to ``destination``."""
        dest = self.topology.destinations[0] if destination is None else destination
        return wsn_reach(self.link_matrix(solution), self._x(solution), dest,
                         self.topology.tx_energy_j, self.hmax if hmax is None else hmax)

    def criteria(self, solution: ForwardingSolution, hmax: Optional[int] = None) -> Criteria:
        """Criteria averaged over all source/destination pairs."""
        row = self._criteria_batch(self._x(solution)[None, :], hmax)[0]
        return Criteria(float(row[0]), float(row[1]), float(row[2]))

    def _criteria_batch(self, xs: np.ndarray, hmax: Optional[int] = None) -> np.ndarray:
        return wsn_criteria(xs, self.atten, self.topology.tx_power_w, self.topology.tx_energy_j,
                            self.link.gamma, self.link.noise_w, self.link.beta * self.link.packet_bits,
                            self._pair_src, self._pair_dst, self.hmax if hmax is None else hmax)

    def robustness(self, solution: ForwardingSolution) -> float:
        return self.criteria(solution).robustness

    def delay(self, solution: ForwardingSolution) -> float:
        return self.criteria(solution).delay

    def energy(self, solution: ForwardingSolution) -> float:
        return self.criteria(solution).energy

    def evaluate(self, solution):
        return self.evaluate_many([solution])[0]

    def evaluate_many(self, solutions):
        if not solutions:
            return []
        xs = np.asarray(solutions, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.topology.n_nodes:
            raise ValueError("solution length must equal node count")
        rows = self._criteria_batch(xs * self._relay_mask)
        if not self.two_objective:
            return [(float(r[0]), float(r[1]), float(r[2])) for r in rows]
        return [None if r[0] > self.infeasible_tol else (float(r[1]), float(r[2])) for r in rows]

    # -- search moves ------------------------------------------------------

    def neighborhood(self, solution: ForwardingSolution):
        fwd = [i for i in self.eligible if solution[i] > 0]
        idle = [i for i in self.eligible if solution[i] == 0]
        out = []
        for i in fwd:
            for j in idle:
                nb = list(solution)
                nb[j], nb[i] = solution[i], 0.0
                out.append((("swap", i, j), tuple(nb)))
        if len(fwd) < self.cap:
            for j in idle:
                nb = list(solution)
                nb[j] = self.default_level
                out.append((("add", j), tuple(nb)))
        for i in fwd:
            nb = list(solution)
            nb[i] = 0.0
            out.append((("delete", i), tuple(nb)))
        for i in fwd:
            for v in self.levels[1:]:
                if v != solution[i]:
                    nb = list(solution)
                    nb[i] = v
                    out.append((("level", i, v), tuple(nb)))
        return out

    def move_attribute(self, move, solution):
        kind = move[0]
        if kind == "add":
            return ADD_SENTINEL
        if kind == "delete":
            return DELETE_SENTINEL
        return ("node", move[1], solution[move[1]])

    def blocking_attributes(self, move, solution):
        kind = move[0]
        if kind == "swap":
            return (("node", move[2], solution[move[1]]),)
        if kind == "add":
            return (ADD_SENTINEL, ("node", move[1], self.default_level))
        if kind == "delete":
            return (DELETE_SENTINEL,)
        return (("node", move[1], move[2]),)

    def subset_label(self, solution):
        return sum(1 for i in self.eligible if solution[i] > 0)

    def initial_front(self, k, rng):
        first = self.first_path_forwarders
        if first < 0 or first + k - 1 > self.cap:
            raise ValueError(
                f"cannot start {k} paths at {first}..{first + k - 1} forwarders with at most {self.cap}"
            )
        front = []
        for path in range(k):
            chosen = rng.choice(len(self.eligible), size=first + path, replace=False)
            front.append(self.solution_from({self.eligible[int(c)]: self.default_level for c in chosen}))
        return front

    # -- enumeration -------------------------------------------------------------

    def count_solutions(self, min_active: int = 0, max_active: Optional[int] = None) -> int:
        n = len(self.eligible)
        hi = self.cap if max_active is None else min(max_active, n)
        nz = len(self.levels) - 1
        return sum(comb(n, f) * nz ** f for f in range(max(min_active, 0), hi + 1))

    def enumerate_solutions(self, min_active: int = 0, max_active: Optional[int] = None) -> Iterator[ForwardingSolution]:
        """Lexicographic over the eligible nodes' levels (0 first)."""
        n_nodes = self.topology.n_nodes
        elig = self.eligible
        hi = self.cap if max_active is None else min(max_active, len(elig))
        x = [0.0] * n_nodes

        def rec(pos: int, active: int):
            if active + (len(elig) - pos) < min_active:
                return
            if pos == len(elig):
                yield tuple(x)
                return
            node = elig[pos]
            for v in self.levels:
                if v > 0 and active >= hi:
                    break
                x[node] = v
                yield from rec(pos + 1, active + (v > 0))
            x[node] = 0.0

        if min_active <= hi:
            yield from rec(0, 0)


def neighborhood_size(n_eligible: int, n_forwarders: int, n_levels: int) -> int:
    f, n = n_forwarders, n_eligible
    return f * (n - f) + (n - f) + f + f * (n_levels - 2)


# -- Monte-Carlo oracle ----------------------------------------------------------

@dataclass
class MonteCarloEstimate:
    mean: np.ndarray      # (3,) f_R, f_D, f_E
    stderr: np.ndarray    # (3,)
    trials: int


def _tree_size(n_relays: int, hmax: int) -> int:
    return sum(sum(n_relays ** k for k in range(h)) for h in range(1, hmax + 1))


def monte_carlo_oracle(
    problem: WsnProblem,
    solution: ForwardingSolution,
    trials: int,
    seed: int,
    max_tree: int = 200_000,
) -> MonteCarloEstimate:
    """Simulate broadcast copies and estimate ``(f_R, f_D, f_E)``.

    Each hop budget ``h`` gets an independent unrolled broadcast tree: a node
    reaches the destination directly with probability ``p[j, D]`` on its last
    hop, or hands a fresh copy to every relay ``r`` whose link succeeds and
    which decides to forward.  Energy ``e_r`` is spent by every such relay.
    The earliest ``h`` whose tree delivers is the arrival hop.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    p = problem.link_matrix(solution)
    x = problem._x(solution)
    energy = problem.topology.tx_energy_j
    hmax = problem.hmax
    means, variances = [], []

    for s, d in problem._pairs:
        relays = {j: [r for r in range(len(x)) if r != j and r != d and x[r] > 0 and p[j, r] > 0]
                  for j in range(len(x))}
        widest = max((len(v) for v in relays.values()), default=0)
        if _tree_size(widest, hmax) > max_tree:
            raise ValueError(f"broadcast tree too large to simulate ({_tree_size(widest, hmax)} nodes)")

        def simulate(j: int, h: int):
            if h == 1:
                return rng.random(trials) < p[j, d], np.zeros(trials)
            arrived = np.zeros(trials, dtype=bool)
            spent = np.zeros(trials)
            for r in relays[j]:
                active = (rng.random(trials) < p[j, r]) & (rng.random(trials) < x[r])
                sub_arrived, sub_spent = simulate(r, h - 1)
                arrived |= active & sub_arrived
                spent += np.where(active, energy[r] + sub_spent, 0.0)
            return arrived, spent

        first = np.zeros(trials, dtype=np.int64)   # 0 = never
        total_energy = np.zeros(trials)
        for h in range(1, hmax + 1):
            arrived, spent = simulate(s, h)
            first = np.where((first == 0) & arrived, h, first)
            total_energy += spent
        samples = np.column_stack([
            (first == 0).astype(np.float64),
            np.where(first > 0, (first - 1.0) ** 2, 0.0),
            total_energy,
        ])
        means.append(samples.mean(axis=0))
        variances.append(samples.var(axis=0, ddof=1) / trials if trials > 1 else np.zeros(3))

    k = len(means)
    mean = np.mean(means, axis=0)
    stderr = np.sqrt(np.sum(variances, axis=0)) / k
    return MonteCarloEstimate(mean, stderr, trials)


def agreement_standard_errors(dp: Sequence[float], estimate: MonteCarloEstimate) -> np.ndarray:
    """Standard errors used by :func:`z_scores`."""
    se = np.array(estimate.stderr, dtype=np.float64)
    p = min(max(float(dp[0]), 0.0), 1.0)
    se[0] = math.sqrt(p * (1.0 - p) / estimate.trials)
    return se


def z_scores(dp: Sequence[float], estimate: MonteCarloEstimate) -> np.ndarray:
    """``(dp - mc) / se`` per criterion.

    ``f_R`` is a Bernoulli mean, so its standard error is taken under the DP
    value, ``sqrt(p (1 - p) / trials)``: rare failures that a finite sample
    never observes still get a finite score.  The other criteria use the
    sample standard error.  A zero standard error gives 0 when the values
    agree and ``inf`` otherwise.
    """
    dp = np.asarray(dp, dtype=np.float64)
    diff = dp - estimate.mean
    se = agreement_standard_errors(dp, estimate)
    out = np.empty_like(diff)
    for i, (dv, s) in enumerate(zip(diff, se)):
        if s > 0:
            out[i] = dv / s
        else:
            out[i] = 0.0 if abs(dv) <= 1e-12 * max(1.0, abs(estimate.mean[i])) else math.inf
    return out
