"""Seeded small instances that the exhaustive oracle can solve."""
from __future__ import annotations

import numpy as np

from pmots.wlp import PenaltyProfile, RadioModel, Wall, WlpInstance
from pmots.wsn import LinkModel, WsnProblem, generate_topology


def random_sites(count: int, width_m: float, height_m: float, seed: int, margin_m: float = 2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo = np.array([margin_m, margin_m])
    hi = np.array([width_m - margin_m, height_m - margin_m])
    return rng.uniform(lo, hi, size=(count, 2))


def random_walls(count: int, width_m: float, height_m: float, seed: int,
                 loss_db: tuple[float, float] = (3.0, 10.0)) -> tuple[Wall, ...]:
    rng = np.random.default_rng(seed)
    walls = []
    for _ in range(count):
        x1, x2 = rng.uniform(0, width_m, 2)
        y1, y2 = rng.uniform(0, height_m, 2)
        walls.append(Wall(float(x1), float(y1), float(x2), float(y2), float(rng.uniform(*loss_db))))
    return tuple(walls)


def wlp_fixture(seed: int, n_sites: int = 8, n_walls: int = 3) -> WlpInstance:
    """30 m square floor, 12 x 12 blocks, two powers, omni antennas, at most 4 APs."""
    rng = np.random.default_rng(seed)
    sites = rng.uniform(2, 28, size=(n_sites, 2))
    walls = [Wall(*rng.uniform(0, 30, 4), float(rng.uniform(3, 10))) for _ in range(n_walls)]
    return WlpInstance.on_grid(
        30, 30, 0.5, 12, 12,
        sites=sites, powers_dbm=(10, 17), directions_deg=(0,),
        coverage=PenaltyProfile(-75, -60),
        interference=PenaltyProfile(-85, -65, maximize=False),
        qos=PenaltyProfile(0, 256e3),
        rate_tiers=((5, 1e6), (15, 5.5e6), (25, 11e6)),
        users=60, radio=RadioModel(pl0_db=40, exponent=3.0), walls=walls,
        max_active=4, first_path_aps=2,
    )


FIXTURE_LINK = LinkModel(exponent=3.0, gamma=1.0 / 16.0, noise_w=1e-3, beta=0.5)


def wsn_fixture(seed: int, nodes: int = 10, hmax: int = 3) -> WsnProblem:
    """Binary forwarding over ``nodes - 2`` eligible relays between the farthest pair."""
    return WsnProblem(generate_topology(0.7, 100.0, nodes, seed), FIXTURE_LINK, hmax=hmax)
