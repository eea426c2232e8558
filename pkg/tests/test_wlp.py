from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmots.fixtures import wlp_fixture
from pmots.wlp import (
    ADD_SENTINEL,
    DELETE_SENTINEL,
    PenaltyProfile,
    RadioModel,
    Wall,
    WlpInstance,
    WlpProblem,
    antenna_gain_db,
    criterion,
    empty_solution,
    generate_coverage_tensor,
    load_or_build_tensor,
    neighborhood_size,
    penalty,
    segments_cross,
    solution_with,
    tensor_cache_key,
    wall_loss,
)

COV = PenaltyProfile(-75, -60)
INT = PenaltyProfile(-85, -65, maximize=False)
QOS = PenaltyProfile(0, 256e3)
TIERS = ((5, 1e6), (15, 5.5e6), (25, 11e6))


def instance(sites, centers_px, size_px=(2, 2), pixel_m=1.0, **kw):
    """Blocks of ``size_px`` whose centres sit at ``centers_px`` (pixel units)."""
    centers = np.asarray(centers_px, dtype=np.float64)
    sizes = np.tile(np.asarray(size_px, dtype=np.float64), (len(centers), 1))
    kw.setdefault("powers_dbm", (20,))
    kw.setdefault("directions_deg", (0,))
    kw.setdefault("coverage", COV)
    kw.setdefault("interference", INT)
    kw.setdefault("qos", QOS)
    kw.setdefault("rate_tiers", TIERS)
    return WlpInstance(sites=sites, block_origins=centers - sizes / 2, block_sizes=sizes, pixel_m=pixel_m, **kw)


def problem_with_tensor(tensor, **kw):
    tensor = np.asarray(tensor, dtype=np.float64)
    m, n_p, n_d, n_l = tensor.shape
    inst = instance(np.zeros((m, 2)) + np.arange(m)[:, None], [(10 * l, 0) for l in range(n_l)],
                    powers_dbm=tuple(range(n_p)), directions_deg=tuple(range(n_d)), **kw)
    return WlpProblem(inst, tensor)


def brute_cross(p, q, a, b):
    """Independent proper-intersection test via the parametric line form."""
    (x1, y1), (x2, y2), (x3, y3), (x4, y4) = p, q, a, b
    den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    if den == 0:
        return False
    t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
    u = -((x1 - x2) * (y1 - y3) - (y1 - y2) * (x1 - x3)) / den
    return 0 < t < 1 and 0 < u < 1


class TestPropagation:
    def test_reference_distance(self):
        inst = instance([(0.0, 0.0)], [(1.0, 0.0)], size_px=(0.5, 0.5), radio=RadioModel(pl0_db=40, exponent=3))
        assert generate_coverage_tensor(inst)[0, 0, 0, 0] == pytest.approx(-20.0, abs=1e-12)

    def test_distance_clamped_to_d0(self):
        inst = instance([(5.0, 5.0)], [(5.0, 5.0)], size_px=(0.5, 0.5))
        assert generate_coverage_tensor(inst)[0, 0, 0, 0] == pytest.approx(20.0 - 40.0)

    def test_doubling_distance_exponent_two(self):
        inst = instance([(0.0, 0.0)], [(3.0, 0.0), (6.0, 0.0)], size_px=(0.5, 0.5),
                        radio=RadioModel(exponent=2.0))
        f = generate_coverage_tensor(inst)[0, 0, 0]
        assert f[0] - f[1] == pytest.approx(20 * math.log10(2))
        assert round(f[0] - f[1], 2) == 6.02

    def test_wall_costs_its_loss(self):
        walls = [Wall(5, -10, 5, 10, 5.0), Wall(20, 1, 30, 1, 7.0)]
        centers = [(10.0, 0.0), (3.0, 0.0), (10.0, 3.0), (25.0, 5.0)]
        inst = instance([(0.0, 0.0)], centers, size_px=(0.5, 0.5))
        free = generate_coverage_tensor(inst, walls=())
        walled = generate_coverage_tensor(inst, walls=walls)
        for l, c in enumerate(centers):
            expected = sum(w.loss_db for w in walls
                           if brute_cross((0.0, 0.0), c, (w.x1, w.y1), (w.x2, w.y2)))
            assert free[0, 0, 0, l] - walled[0, 0, 0, l] == pytest.approx(expected)
        assert free[0, 0, 0, 0] - walled[0, 0, 0, 0] == pytest.approx(5.0)

    @settings(max_examples=300)
    @given(st.lists(st.integers(-20, 20).map(float), min_size=8, max_size=8))
    def test_crossing_matches_parametric_oracle(self, c):
        p, q, a, b = (c[0], c[1]), (c[2], c[3]), (c[4], c[5]), (c[6], c[7])
        assert segments_cross(p, q, a, b) == brute_cross(p, q, a, b)

    def test_touching_wall_does_not_count(self):
        assert wall_loss((0, 0), (5, 0), [Wall(5, -1, 5, 1, 9.0)]) == 0.0

    @pytest.mark.parametrize("offset, expected", [(0, 0.0), (180, -12.0), (90, -6.0), (-90, -6.0)])
    def test_cosine_lobe(self, offset, expected):
        assert antenna_gain_db(offset, 12.0) == pytest.approx(expected)

    def test_omni_when_no_front_to_back(self):
        assert antenna_gain_db(137.0, 0.0) == 0.0

    def test_monotone_in_power(self):
        inst = wlp_fixture(1)
        inst = WlpInstance.on_grid(30, 30, 0.5, 6, 6, sites=inst.sites, powers_dbm=(3, 10, 17),
                                   directions_deg=(0, 120, 240), coverage=COV, interference=INT, qos=QOS,
                                   rate_tiers=TIERS, walls=inst.walls, radio=RadioModel(front_to_back_db=8))
        t = generate_coverage_tensor(inst)
        assert np.all(np.diff(t, axis=1) >= 0)

    def test_tensor_cache(self, tmp_path):
        inst = wlp_fixture(2)
        first = load_or_build_tensor(inst, tmp_path)
        files = list(tmp_path.iterdir())
        assert len(files) == 1
        np.testing.assert_array_equal(load_or_build_tensor(inst, tmp_path), first)
        other = wlp_fixture(3)
        assert tensor_cache_key(other) != tensor_cache_key(inst)


class TestPenalty:
    @pytest.mark.parametrize("delta", [1.0, 2.5, 7.0])
    def test_maximize_boundaries(self, delta):
        prof = PenaltyProfile(-80.0, -60.0, delta)
        assert penalty(-60.0, prof) == 0.0
        assert penalty(-80.0, prof) == delta
        assert penalty(-70.0, prof) == delta / 2

    def test_minimize_is_mirrored(self):
        prof = PenaltyProfile(-85.0, -65.0, 2.0, maximize=False)
        assert penalty(-90.0, prof) == 0.0
        assert penalty(-85.0, prof) == 0.0
        assert penalty(-65.0, prof) == 2.0
        assert penalty(-75.0, prof) == 1.0

    @pytest.mark.parametrize("args", [(1.0, 1.0), (2.0, 1.0), (0.0, 1.0, 0.0)])
    def test_invalid_profile(self, args):
        with pytest.raises(ValueError):
            PenaltyProfile(*args)

    @settings(max_examples=300)
    @given(st.floats(-200, 200), st.floats(-200, 200), st.booleans())
    def test_bounds_and_monotone(self, u, v, maximize):
        prof = PenaltyProfile(-50.0, 10.0, 3.0, maximize)
        pu, pv = penalty(u, prof), penalty(v, prof)
        assert 0.0 <= pu <= 3.0
        if u <= v:
            assert (pu >= pv) if maximize else (pu <= pv)


class TestCriterion:
    def test_zero(self):
        assert criterion([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]) == 0.0

    def test_single_block(self):
        assert criterion([4.0], [1.0]) == 4.0

    def test_pythagorean(self):
        assert criterion([3.0, 4.0], [1.0, 1.0]) == 5.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            criterion([1.0], [1.0, 1.0])


class TestUtilities:
    def test_coverage_and_interference(self):
        tensor = np.array([-50.0, -60.0, -70.0]).reshape(3, 1, 1, 1)
        prob = problem_with_tensor(tensor)
        one = solution_with(3, {1: (0, 0)})
        assert prob.utility_coverage(one, 0) == -60.0
        assert prob.utility_interference(one, 0) == prob.noise_floor
        all_on = solution_with(3, {i: (0, 0) for i in range(3)})
        assert prob.utility_coverage(all_on, 0) == -50.0
        assert prob.utility_interference(all_on, 0) == -60.0
        none = empty_solution(3)
        assert prob.utility_coverage(none, 0) == prob.noise_floor
        assert prob.utility_interference(none, 0) == prob.noise_floor

    def test_interference_ties(self):
        prob = problem_with_tensor(np.full((2, 1, 1, 1), -50.0))
        assert prob.utility_interference(solution_with(2, {0: (0, 0), 1: (0, 0)}), 0) == -50.0

    def test_qos_even_split(self):
        prob = problem_with_tensor(np.full((1, 1, 1, 1), -50.0), users=10, rate_tiers=((5, 11e6),))
        assert prob.utility_qos(solution_with(1, {0: (0, 0)}), 0) == pytest.approx(1.1e6)
        assert prob.utility_qos(empty_solution(1), 0) == 0.0

    def test_qos_apportionment(self):
        # site 0 serves blocks 0-2, site 1 serves block 3: weights 3:1, eight users
        tensor = np.array([[-40.0, -40.0, -40.0, -90.0], [-90.0, -90.0, -90.0, -40.0]]).reshape(2, 1, 1, 4)
        prob = problem_with_tensor(tensor, users=8, rate_tiers=((5, 12e6),))
        sol = solution_with(2, {0: (0, 0), 1: (0, 0)})
        d = [prob.utility_qos(sol, l) for l in range(4)]
        assert d == pytest.approx([2e6, 2e6, 2e6, 6e6])

    def test_tier_lookup(self):
        # SNR 12 dB sits in the 5 dB tier, 30 dB in the top one; the lone user sits on the only site
        tensor = np.array([[-88.0, -70.0]]).reshape(1, 1, 1, 2)
        prob = problem_with_tensor(tensor, users=1)
        sol = solution_with(1, {0: (0, 0)})
        assert prob.utility_qos(sol, 0) == pytest.approx(1e6)
        assert prob.utility_qos(sol, 1) == pytest.approx(11e6)


class TestEvaluate:
    def test_empty_plan(self):
        inst = wlp_fixture(0)
        prob = WlpProblem(inst)
        f_cov, f_i, f_qos = prob.evaluate(empty_solution(inst.n_sites))
        assert f_cov == pytest.approx(math.sqrt(inst.weights.sum()) * inst.coverage.delta)
        assert f_i == 0.0
        assert f_qos == pytest.approx(math.sqrt(inst.weights.sum()) * inst.qos.delta)

    def test_full_coverage_from_one_ap(self):
        inst = instance([(5.0, 5.0)], [(4.0, 4.0), (6.0, 4.0), (4.0, 6.0), (6.0, 6.0)])
        prob = WlpProblem(inst)
        assert prob.evaluate(solution_with(1, {0: (0, 0)}))[0] == 0.0

    def test_batch_matches_single(self):
        prob = WlpProblem(wlp_fixture(4))
        rng = np.random.default_rng(0)
        sols = [random_solution(rng, 8, 2, 1, 4) for _ in range(30)]
        assert prob.evaluate_many(sols) == [prob.evaluate(s) for s in sols]

    @pytest.mark.parametrize("seed", range(3))
    def test_bounds(self, seed):
        inst = wlp_fixture(seed)
        prob = WlpProblem(inst)
        rng = np.random.default_rng(seed)
        top = math.sqrt(inst.weights.sum())
        for _ in range(50):
            f = prob.evaluate(random_solution(rng, 8, 2, 1, 4))
            assert all(0.0 <= v <= top * 1.0 + 1e-12 for v in f)

    @pytest.mark.parametrize("seed", range(4))
    def test_adding_an_ap_is_monotone(self, seed):
        inst = wlp_fixture(seed)
        prob = WlpProblem(inst)
        rng = np.random.default_rng(100 + seed)
        for _ in range(40):
            sol = random_solution(rng, 8, 2, 1, 7)
            off = [i for i, a in enumerate(sol) if a is None]
            if not off:
                continue
            grown = list(sol)
            grown[int(rng.choice(off))] = (int(rng.integers(2)), 0)
            before, after = prob.evaluate(sol), prob.evaluate(tuple(grown))
            assert after[0] <= before[0]
            assert after[1] >= before[1]

    def test_weights_default_to_normalized_area(self):
        inst = WlpInstance.on_grid(10, 10, 1, 3, 3, sites=[(1, 1)], powers_dbm=(10,), directions_deg=(0,),
                                   coverage=COV, interference=INT, qos=QOS, rate_tiers=TIERS)
        assert inst.weights.sum() == pytest.approx(9.0)
        assert len(set(np.round(inst.weights, 9))) > 1  # 10 px do not split evenly in three


def random_solution(rng, m, n_p, n_d, max_on):
    n = int(rng.integers(0, max_on + 1))
    on = rng.choice(m, size=n, replace=False)
    return solution_with(m, {int(i): (int(rng.integers(n_p)), int(rng.integers(n_d))) for i in on})


def grid_problem(m, n_p, n_d):
    inst = WlpInstance.on_grid(20, 20, 1, 2, 2, sites=np.linspace(1, 19, 2 * m).reshape(m, 2),
                               powers_dbm=tuple(range(n_p)), directions_deg=tuple(range(0, 360, 360 // n_d))[:n_d],
                               coverage=COV, interference=INT, qos=QOS, rate_tiers=TIERS)
    return WlpProblem(inst, tensor=np.zeros((m, n_p, n_d, 4)))


class TestNeighborhood:
    def test_empty_plan_only_adds(self):
        prob = grid_problem(5, 3, 2)
        moves = prob.neighborhood(empty_solution(5))
        assert len(moves) == 5 and {m[0] for m, _ in moves} == {"add"}

    def test_hand_count(self):
        prob = grid_problem(4, 2, 1)
        sol = solution_with(4, {0: (0, 0), 2: (1, 0)})
        moves = prob.neighborhood(sol)
        kinds = [m[0] for m, _ in moves]
        assert len(moves) == 10
        assert [kinds.count(k) for k in ("swap", "add", "delete", "power", "direction")] == [4, 2, 2, 2, 0]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_cardinality_and_closure(self, m, n_p, n_d, seed):
        prob = grid_problem(m, n_p, n_d)
        rng = np.random.default_rng(seed)
        sol = random_solution(rng, m, n_p, n_d, m)
        n = sum(a is not None for a in sol)
        moves = prob.neighborhood(sol)
        assert len(moves) == neighborhood_size(m, n, n_p, n_d)
        for move, nb in moves:
            changed = [i for i in range(m) if nb[i] != sol[i]]
            delta = sum(a is not None for a in nb) - n
            kind = move[0]
            assert delta == {"add": 1, "delete": -1}.get(kind, 0)
            assert len(changed) == (2 if kind == "swap" else 1)
            for i in range(m):
                if nb[i] is not None:
                    assert 0 <= nb[i][0] < n_p and 0 <= nb[i][1] < n_d

    def test_swap_keeps_settings(self):
        prob = grid_problem(3, 3, 2)
        sol = solution_with(3, {0: (2, 1)})
        swaps = [nb for m, nb in prob.neighborhood(sol) if m[0] == "swap"]
        assert swaps == [solution_with(3, {1: (2, 1)}), solution_with(3, {2: (2, 1)})]

    def test_add_uses_default(self):
        prob = grid_problem(2, 3, 2)
        adds = [nb for m, nb in prob.neighborhood(empty_solution(2)) if m[0] == "add"]
        assert adds[0] == solution_with(2, {0: (2, 0)})

    def test_cap_blocks_adds(self):
        inst = wlp_fixture(0)
        prob = WlpProblem(inst)
        full = solution_with(8, {i: (0, 0) for i in range(4)})
        assert not [m for m, _ in prob.neighborhood(full) if m[0] == "add"]


class TestAttributes:
    def setup_method(self):
        self.prob = grid_problem(8, 5, 2)

    def test_swap_stores_deselected_site(self):
        sol = solution_with(8, {7: (2, 1)})
        assert self.prob.move_attribute(("swap", 7, 3), sol) == ("ap", 7, 2, 1)

    def test_additions_share_one_sentinel(self):
        sol = empty_solution(8)
        assert self.prob.move_attribute(("add", 1), sol) == self.prob.move_attribute(("add", 5), sol) == ADD_SENTINEL
        assert self.prob.move_attribute(("delete", 1), solution_with(8, {1: (0, 0)})) == DELETE_SENTINEL

    def test_power_change_stores_old_setting(self):
        sol = solution_with(8, {3: (1, 1)})
        assert self.prob.move_attribute(("power", 3, 4), sol) == ("ap", 3, 1, 1)
        assert self.prob.move_attribute(("direction", 3, 0), sol) == ("ap", 3, 1, 1)

    def test_reverse_move_is_blocked(self):
        sol = solution_with(8, {3: (1, 1)})
        attr = self.prob.move_attribute(("power", 3, 4), sol)
        after = solution_with(8, {3: (4, 1)})
        assert attr in self.prob.blocking_attributes(("power", 3, 1), after)
        add_attr = self.prob.move_attribute(("add", 2), sol)
        assert add_attr in self.prob.blocking_attributes(("add", 5), after)


class TestInitialFront:
    def test_fifteen_paths(self):
        prob = grid_problem(20, 2, 1)
        front = prob.initial_front(15, np.random.default_rng(0), n_first=4)
        assert [prob.subset_label(s) for s in front] == list(range(4, 19))
        default = (prob.instance.add_power, prob.instance.add_direction)
        assert all(a in (None, default) for s in front for a in s)

    def test_single_path(self):
        prob = grid_problem(6, 2, 1)
        front = prob.initial_front(1, np.random.default_rng(1), n_first=3)
        assert [prob.subset_label(s) for s in front] == [3]

    def test_too_many(self):
        with pytest.raises(ValueError):
            grid_problem(5, 1, 1).initial_front(3, np.random.default_rng(0), n_first=4)
