"""Time the compiled kernels against the numpy fallback on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is checked for agreement before timing; the table reports the
best-of-``repeat`` wall time per call and the speedup.  A second table times
one full search per problem under each backend.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pmots import _purepy
from pmots.fixtures import FIXTURE_LINK, wlp_fixture
from pmots.wlp import WlpProblem
from pmots.wsn import WsnProblem, generate_topology

try:
    from pmots import _speedups
except ImportError:
    _speedups = None


def wlp_case(batch: int):
    prob = WlpProblem(wlp_fixture(0))
    rng = np.random.default_rng(0)
    sols = list(prob.enumerate_solutions(0, 4))
    picks = [sols[i] for i in rng.choice(len(sols), size=min(batch, len(sols)), replace=False)]
    codes = prob.codes(picks)
    args = (codes, prob._flat, prob.noise_floor, prob.instance.weights, prob._profiles, prob._tier_snr,
            prob._tier_rate, float(prob.instance.users))
    return {
        "wlp_block_stats": (codes, prob._flat, prob.noise_floor),
        "wlp_criteria": args,
    }


def wsn_case(nodes: int, batch: int):
    prob = WsnProblem(generate_topology(0.7, 100.0, nodes, 1), FIXTURE_LINK, hmax=4)
    rng = np.random.default_rng(1)
    xs = (rng.random((batch, nodes)) < 0.3).astype(np.float64) * prob._relay_mask
    t, link = prob.topology, prob.link
    kbits = link.beta * link.packet_bits
    p = _purepy.wsn_link_matrix(xs[0], prob.atten, t.tx_power_w, link.gamma, link.noise_w, kbits)
    return {
        "wsn_link_matrix": (xs[0], prob.atten, t.tx_power_w, link.gamma, link.noise_w, kbits),
        "wsn_reach": (p, xs[0], t.destinations[0], t.tx_energy_j, prob.hmax),
        "wsn_criteria": (xs, prob.atten, t.tx_power_w, t.tx_energy_j, link.gamma, link.noise_w, kbits,
                         prob._pair_src, prob._pair_dst, prob.hmax),
    }


def dominance_case(n: int):
    rng = np.random.default_rng(2)
    return {"dominator_counts": (rng.random((n, 3)),)}


def agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12)


def bench(cases: dict, repeat: int) -> list[dict]:
    rows = []
    for name, args in cases.items():
        py = getattr(_purepy, name)
        cy = getattr(_speedups, name)
        if not agree(py(*args), cy(*args)):
            raise SystemExit(f"{name}: backends disagree")
        row = {"kernel": name}
        for label, fn in (("python", py), ("cython", cy)):
            timer = timeit.Timer(lambda fn=fn: fn(*args))
            number, _ = timer.autorange()
            row[label] = min(timer.repeat(repeat=repeat, number=number)) / number
        row["speedup"] = row["python"] / row["cython"]
        rows.append(row)
    return rows


END_TO_END = """
import time
from pmots.fixtures import wlp_fixture, wsn_fixture
from pmots.kernels import BACKEND
from pmots.tabu import PmotsConfig, run
from pmots.wlp import WlpProblem
t = time.perf_counter()
run(WlpProblem(wlp_fixture(0)), PmotsConfig(paths=3, iterations=200, max_rank=3, tenure_max=1, seed=0))
t_wlp = time.perf_counter() - t
t = time.perf_counter()
run(wsn_fixture(0), PmotsConfig(paths=3, iterations=300, max_rank=10, tenure_max=2, seed=0))
print(BACKEND, t_wlp, time.perf_counter() - t)
"""


def end_to_end() -> list[dict]:
    """One full search per problem under each backend, each in a fresh interpreter."""
    rows = []
    for pure in ("1", "0"):
        env = {**os.environ, "PMOTS_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        backend, t_wlp, t_wsn = out.stdout.split()
        rows.append({"backend": backend, "wlp_run_s": float(t_wlp), "wsn_run_s": float(t_wsn)})
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--wlp-batch", type=int, default=512)
    parser.add_argument("--wsn-nodes", type=int, default=40)
    parser.add_argument("--wsn-batch", type=int, default=64)
    parser.add_argument("--front", type=int, default=400)
    parser.add_argument("--skip-runs", action="store_true", help="kernels only, no end-to-end searches")
    parser.add_argument("--json", help="also write results here")
    args = parser.parse_args(argv)
    if _speedups is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    cases = {**dominance_case(args.front), **wlp_case(args.wlp_batch), **wsn_case(args.wsn_nodes, args.wsn_batch)}
    rows = bench(cases, args.repeat)
    print(f"{'kernel':<18}{'python':>14}{'cython':>14}{'speedup':>10}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['python'] * 1e3:>11.3f} ms{r['cython'] * 1e3:>11.3f} ms{r['speedup']:>9.1f}x")
    runs = [] if args.skip_runs else end_to_end()
    if runs:
        print(f"\n{'search':<18}{'python':>14}{'cython':>14}{'speedup':>10}")
        by = {r["backend"]: r for r in runs}
        for key, label in (("wlp_run_s", "wlp fixture run"), ("wsn_run_s", "wsn fixture run")):
            py, cy = by["python"][key], by["cython"][key]
            print(f"{label:<18}{py:>12.2f} s{cy:>12.2f} s{py / cy:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"kernels": rows, "runs": runs}, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
