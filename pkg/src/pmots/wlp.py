"""Wireless LAN access-point planning.

A solution is a length-``M`` tuple over the candidate sites; each entry is
``None`` (no AP) or ``(power_index, direction_index)``.  Received power per
site/setting/block comes from a log-distance path-loss model with wall
losses and an optional cosine-lobe antenna.  The three criteria (coverage,
interference, QoS) are root-weighted-square sums of per-block penalties.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from pmots.kernels import wlp_block_stats, wlp_criteria, wlp_throughput
from pmots.tabu import ProblemAdapter

Assignment = Optional[tuple[int, int]]
WlpSolution = tuple[Assignment, ...]

ADD_SENTINEL = ("fake-ap", "add")
DELETE_SENTINEL = ("fake-ap", "delete")


@dataclass(frozen=True)
class PenaltyProfile:
    """Piecewise-linear penalty: 0 on the good side of the thresholds, ``delta``
    on the bad side, linear in between.

    With ``maximize=True`` large utilities are good (0 above ``s_max``);
    otherwise the profile is mirrored (0 below ``s_min``).
    """

    s_min: float
    s_max: float
    delta: float = 1.0
    maximize: bool = True

    def __post_init__(self) -> None:
        if not self.s_min < self.s_max:
            raise ValueError(f"s_min ({self.s_min}) must be < s_max ({self.s_max})")
        if not self.delta > 0:
            raise ValueError("delta must be > 0")


def penalty(u, profile: PenaltyProfile):
    """Penalty of utility ``u`` (scalar or array) under ``profile``; lies in ``[0, delta]``."""
    u_arr = np.asarray(u, dtype=np.float64)
    lo, hi, delta = profile.s_min, profile.s_max, profile.delta
    if profile.maximize:
        out = np.where(u_arr >= hi, 0.0, np.where(u_arr <= lo, delta, delta * (hi - u_arr) / (hi - lo)))
    else:
        out = np.where(u_arr <= lo, 0.0, np.where(u_arr >= hi, delta, delta * (u_arr - lo) / (hi - lo)))
    return float(out) if out.ndim == 0 else out


def criterion(penalties, weights) -> float:
    """``sqrt(sum(weights * penalties**2))``."""
    p = np.asarray(penalties, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if p.shape != w.shape:
        raise ValueError("one penalty per block required")
    return math.sqrt(float(np.sum(w * p * p)))


@dataclass(frozen=True)
class Wall:
    x1: float
    y1: float
    x2: float
    y2: float
    loss_db: float


@dataclass(frozen=True)
class RadioModel:
    pl0_db: float = 40.0
    exponent: float = 3.0
    d0_m: float = 1.0
    noise_floor_dbm: float = -100.0
    front_to_back_db: float = 0.0  # 0 -> omnidirectional


@dataclass
class WlpInstance:
    sites: np.ndarray                      # (M, 2) metres
    powers_dbm: tuple[float, ...]
    directions_deg: tuple[float, ...]
    block_origins: np.ndarray              # (L, 2) pixels
    block_sizes: np.ndarray                # (L, 2) pixels
    pixel_m: float
    coverage: PenaltyProfile
    interference: PenaltyProfile
    qos: PenaltyProfile
    rate_tiers: tuple[tuple[float, float], ...]   # (min SNR dB, rate bit/s), ascending
    users: float = 200.0
    target_throughput_bps: float = 256e3
    radio: RadioModel = field(default_factory=RadioModel)
    walls: tuple[Wall, ...] = ()
    weights: Optional[np.ndarray] = None
    add_power: int = -1                    # -1 -> highest power index
    add_direction: int = 0
    first_path_aps: int = 4
    max_active: Optional[int] = None

    def __post_init__(self) -> None:
        self.sites = np.asarray(self.sites, dtype=np.float64).reshape(-1, 2)
        self.block_origins = np.asarray(self.block_origins, dtype=np.float64).reshape(-1, 2)
        self.block_sizes = np.asarray(self.block_sizes, dtype=np.float64).reshape(-1, 2)
        self.powers_dbm = tuple(float(p) for p in self.powers_dbm)
        self.directions_deg = tuple(float(d) for d in self.directions_deg)
        self.rate_tiers = tuple(sorted((float(s), float(r)) for s, r in self.rate_tiers))
        self.walls = tuple(self.walls)
        if len(self.sites) < 1 or len(self.powers_dbm) < 1 or len(self.directions_deg) < 1:
            raise ValueError("need at least one site, power and direction")
        if len(self.block_origins) < 1 or self.block_origins.shape != self.block_sizes.shape:
            raise ValueError("need at least one block with origin and size")
        if np.any(self.block_sizes <= 0):
            raise ValueError("block sizes must be positive")
        if self.weights is None:
            area = self.block_sizes[:, 0] * self.block_sizes[:, 1]
            self.weights = area * len(area) / area.sum()
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.n_blocks,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive, one per block")
        if self.add_power < 0:
            self.add_power = len(self.powers_dbm) + self.add_power
        if not 0 <= self.add_power < self.n_powers or not 0 <= self.add_direction < self.n_directions:
            raise ValueError("default power/direction index out of range")
        if self.max_active is not None and not 0 <= self.max_active <= self.n_sites:
            raise ValueError("max_active must lie in [0, M]")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_powers(self) -> int:
        return len(self.powers_dbm)

    @property
    def n_directions(self) -> int:
        return len(self.directions_deg)

    @property
    def n_blocks(self) -> int:
        return len(self.block_origins)

    @property
    def cap(self) -> int:
        return self.n_sites if self.max_active is None else self.max_active

    @property
    def block_centers(self) -> np.ndarray:
        return (self.block_origins + self.block_sizes / 2.0) * self.pixel_m

    @classmethod
    def on_grid(cls, width_m: float, height_m: float, pixel_m: float, nx: int, ny: int, **kwargs) -> "WlpInstance":
        """Tile a ``width_m x height_m`` floor with ``nx x ny`` blocks."""
        w_px = int(round(width_m / pixel_m))
        h_px = int(round(height_m / pixel_m))
        if nx < 1 or ny < 1 or nx > w_px or ny > h_px:
            raise ValueError("block grid does not fit the floor")
        xs = np.round(np.linspace(0, w_px, nx + 1)).astype(int)
        ys = np.round(np.linspace(0, h_px, ny + 1)).astype(int)
        origins, sizes = [], []
        for j in range(ny):
            for i in range(nx):
                origins.append((xs[i], ys[j]))
                sizes.append((xs[i + 1] - xs[i], ys[j + 1] - ys[j]))
        return cls(block_origins=np.array(origins), block_sizes=np.array(sizes), pixel_m=pixel_m, **kwargs)


# -- propagation -----------------------------------------------------------

def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def segments_cross(p, q, a, b) -> bool:
    """Proper crossing of segments ``pq`` and ``ab`` (touching does not count)."""
    d1 = _orient(a[0], a[1], b[0], b[1], p[0], p[1])
    d2 = _orient(a[0], a[1], b[0], b[1], q[0], q[1])
    d3 = _orient(p[0], p[1], q[0], q[1], a[0], a[1])
    d4 = _orient(p[0], p[1], q[0], q[1], b[0], b[1])
    return ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4))


def wall_loss(p, q, walls: Sequence[Wall]) -> float:
    return sum(w.loss_db for w in walls if segments_cross(p, q, (w.x1, w.y1), (w.x2, w.y2)))


def antenna_gain_db(offset_deg, front_to_back_db: float):
    """Cosine lobe: 0 dB on boresight, ``-front_to_back_db`` straight behind."""
    return -front_to_back_db * (1.0 - np.cos(np.radians(offset_deg))) / 2.0


def path_loss_db(distance_m, radio: RadioModel):
    d = np.maximum(np.asarray(distance_m, dtype=np.float64), radio.d0_m)
    return radio.pl0_db + 10.0 * radio.exponent * np.log10(d / radio.d0_m)


def generate_coverage_tensor(instance: WlpInstance, walls: Optional[Sequence[Wall]] = None) -> np.ndarray:
    """Received power ``F[k, p, d, l]`` in dBm."""
    walls = instance.walls if walls is None else tuple(walls)
    radio = instance.radio
    centers = instance.block_centers
    powers = np.asarray(instance.powers_dbm)
    dirs = np.asarray(instance.directions_deg)
    out = np.empty((instance.n_sites, instance.n_powers, instance.n_directions, instance.n_blocks))
    for k, site in enumerate(instance.sites):
        delta = centers - site
        dist = np.hypot(delta[:, 0], delta[:, 1])
        bearing = np.degrees(np.arctan2(delta[:, 1], delta[:, 0]))
        loss = path_loss_db(dist, radio)
        if walls:
            loss = loss + np.array([wall_loss(site, c, walls) for c in centers])
        gain = antenna_gain_db(bearing[None, :] - dirs[:, None], radio.front_to_back_db)  # (D, L)
        out[k] = powers[:, None, None] + gain[None, :, :] - loss[None, None, :]
    return out


def tensor_cache_key(instance: WlpInstance) -> str:
    payload = {
        "sites": instance.sites.tolist(),
        "powers": list(instance.powers_dbm),
        "directions": list(instance.directions_deg),
        "origins": instance.block_origins.tolist(),
        "sizes": instance.block_sizes.tolist(),
        "pixel_m": instance.pixel_m,
        "radio": asdict(instance.radio),
        "walls": [asdict(w) for w in instance.walls],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def load_or_build_tensor(instance: WlpInstance, cache_dir: Optional[str | Path] = None) -> np.ndarray:
    if cache_dir is None:
        return generate_coverage_tensor(instance)
    cache = Path(cache_dir) / f"wlp-tensor-{tensor_cache_key(instance)[:32]}.npy"
    if cache.exists():
        return np.load(cache)
    tensor = generate_coverage_tensor(instance)
    cache.parent.mkdir(parents=True, exist_ok=True)
    np.save(cache, tensor)
    return tensor


# -- the problem -------------------------------------------------------------

class WlpProblem(ProblemAdapter):
    objective_names = ("f_cov", "f_i", "f_qos")

    def __init__(self, instance: WlpInstance, tensor: Optional[np.ndarray] = None) -> None:
        self.instance = instance
        self.tensor = generate_coverage_tensor(instance) if tensor is None else np.asarray(tensor, dtype=np.float64)
        expected = (instance.n_sites, instance.n_powers, instance.n_directions, instance.n_blocks)
        if self.tensor.shape != expected:
            raise ValueError(f"tensor shape {self.tensor.shape} != {expected}")
        self._flat = np.ascontiguousarray(self.tensor.reshape(instance.n_sites, -1, instance.n_blocks))
        tiers = instance.rate_tiers
        self._tier_snr = np.array([t[0] for t in tiers], dtype=np.float64)
        self._tier_rate = np.array([t[1] for t in tiers], dtype=np.float64)
        self._profiles = np.array([
            (p.s_min, p.s_max, p.delta, 1.0 if p.maximize else 0.0)
            for p in (instance.coverage, instance.interference, instance.qos)
        ])

    @property
    def noise_floor(self) -> float:
        return self.instance.radio.noise_floor_dbm

    def codes(self, solutions: Sequence[WlpSolution]) -> np.ndarray:
        nd = self.instance.n_directions
        out = np.full((len(solutions), self.instance.n_sites), -1, dtype=np.int64)
        for r, sol in enumerate(solutions):
            for i, a in enumerate(sol):
                if a is not None:
                    out[r, i] = a[0] * nd + a[1]
        return out

    def utilities(self, solutions: Sequence[WlpSolution]):
        """Per-block ``(coverage dBm, interference dBm, throughput bit/s)``, each ``(n, L)``."""
        best, second, server = wlp_block_stats(self.codes(solutions), self._flat, self.noise_floor)
        qos = wlp_throughput(best, server, self.instance.weights, self._tier_snr, self._tier_rate,
                             float(self.instance.users), self.noise_floor)
        return best, second, qos

    def utility_coverage(self, solution: WlpSolution, block: int) -> float:
        return float(self.utilities([solution])[0][0, block])

    def utility_interference(self, solution: WlpSolution, block: int) -> float:
        return float(self.utilities([solution])[1][0, block])

    def utility_qos(self, solution: WlpSolution, block: int) -> float:
        return float(self.utilities([solution])[2][0, block])

    def evaluate_many(self, solutions):
        if not solutions:
            return []
        inst = self.instance
        values = wlp_criteria(self.codes(solutions), self._flat, self.noise_floor, inst.weights, self._profiles,
                              self._tier_snr, self._tier_rate, float(inst.users))
        return [tuple(row) for row in values.tolist()]

    def evaluate(self, solution):
        return self.evaluate_many([solution])[0]

    # -- search moves ------------------------------------------------------

    def neighborhood(self, solution: WlpSolution):
        inst = self.instance
        on = [i for i, a in enumerate(solution) if a is not None]
        off = [i for i, a in enumerate(solution) if a is None]
        default = (inst.add_power, inst.add_direction)
        out = []
        for i in on:
            for j in off:
                nb = list(solution)
                nb[j], nb[i] = solution[i], None
                out.append((("swap", i, j), tuple(nb)))
        if len(on) < inst.cap:
            for j in off:
                nb = list(solution)
                nb[j] = default
                out.append((("add", j), tuple(nb)))
        for i in on:
            nb = list(solution)
            nb[i] = None
            out.append((("delete", i), tuple(nb)))
        for i in on:
            p, d = solution[i]
            for q in range(inst.n_powers):
                if q != p:
                    nb = list(solution)
                    nb[i] = (q, d)
                    out.append((("power", i, q), tuple(nb)))
        for i in on:
            p, d = solution[i]
            for e in range(inst.n_directions):
                if e != d:
                    nb = list(solution)
                    nb[i] = (p, e)
                    out.append((("direction", i, e), tuple(nb)))
        return out

    def move_attribute(self, move, solution):
        kind = move[0]
        if kind == "add":
            return ADD_SENTINEL
        if kind == "delete":
            return DELETE_SENTINEL
        i = move[1]
        p, d = solution[i]
        return ("ap", i, p, d)

    def blocking_attributes(self, move, solution):
        kind = move[0]
        if kind == "swap":
            _, i, j = move
            return (("ap", j, *solution[i]),)
        if kind == "add":
            j = move[1]
            return (ADD_SENTINEL, ("ap", j, self.instance.add_power, self.instance.add_direction))
        if kind == "delete":
            return (DELETE_SENTINEL,)
        i, v = move[1], move[2]
        p, d = solution[i]
        return (("ap", i, v, d),) if kind == "power" else (("ap", i, p, v),)

    def subset_label(self, solution):
        return sum(a is not None for a in solution)

    def initial_front(self, k, rng, n_first: Optional[int] = None):
        inst = self.instance
        n_first = inst.first_path_aps if n_first is None else n_first
        if n_first < 0 or n_first + k - 1 > inst.cap:
            raise ValueError(
                f"cannot start {k} paths at {n_first}..{n_first + k - 1} APs with at most {inst.cap} active sites"
            )
        default = (inst.add_power, inst.add_direction)
        front = []
        for path in range(k):
            chosen = set(int(i) for i in rng.choice(inst.n_sites, size=n_first + path, replace=False))
            front.append(tuple(default if i in chosen else None for i in range(inst.n_sites)))
        return front

    # -- enumeration (oracle support) ----------------------------------------

    def count_solutions(self, min_active: int = 0, max_active: Optional[int] = None) -> int:
        from pmots.oracle import subset_size

        inst = self.instance
        hi = inst.cap if max_active is None else min(max_active, inst.n_sites)
        return sum(subset_size(inst.n_sites, n, inst.n_powers, inst.n_directions)
                   for n in range(max(min_active, 0), hi + 1))

    def enumerate_solutions(self, min_active: int = 0, max_active: Optional[int] = None) -> Iterator[WlpSolution]:
        """All solutions with ``min_active <= N <= max_active`` in lexicographic
        order (``None`` sorts before every setting)."""
        inst = self.instance
        hi = inst.cap if max_active is None else min(max_active, inst.n_sites)
        settings: list[Assignment] = [None] + [(p, d) for p in range(inst.n_powers) for d in range(inst.n_directions)]
        m = inst.n_sites
        prefix: list[Assignment] = []

        def rec(pos: int, active: int):
            remaining = m - pos
            if active + remaining < min_active:
                return
            if pos == m:
                yield tuple(prefix)
                return
            for s in settings:
                if s is not None and active >= hi:
                    break
                prefix.append(s)
                yield from rec(pos + 1, active + (s is not None))
                prefix.pop()

        if min_active <= hi:
            yield from rec(0, 0)


def neighborhood_size(m: int, n: int, n_powers: int, n_directions: int) -> int:
    """Uncapped neighbourhood cardinality for a solution with ``n`` active APs."""
    return n * (m - n) + (m - n) + n + n * (n_powers - 1) + n * (n_directions - 1)


def empty_solution(m: int) -> WlpSolution:
    return (None,) * m


def solution_with(m: int, active: dict[int, tuple[int, int]]) -> WlpSolution:
    return tuple(active.get(i) for i in range(m))


__all__ = [
    "ADD_SENTINEL", "DELETE_SENTINEL", "PenaltyProfile", "RadioModel", "Wall", "WlpInstance", "WlpProblem",
    "WlpSolution", "antenna_gain_db", "criterion", "empty_solution", "generate_coverage_tensor",
    "load_or_build_tensor", "neighborhood_size", "path_loss_db", "penalty", "segments_cross",
    "solution_with", "tensor_cache_key", "wall_loss",
]
