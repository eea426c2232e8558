"""``pmots`` command line: run, oracle, select, validate-wsn.

Exit codes: 0 success, 2 invalid input, 3 runtime failure, 4 enumeration over
the cap, 5 DP/Monte-Carlo disagreement.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import pickle
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from pmots import __version__
from pmots.kernels import BACKEND
from pmots.oracle import CapExceeded, EmptySpace, EnumerationSpec, exhaustive_pareto, subset_size
from pmots.pareto import front_to_csv, front_to_json, read_front_csv, read_front_json, select_representatives
from pmots.scenario import Scenario, ScenarioError, build_problem, build_wlp_instance, content_hash, load_scenario
from pmots.tabu import Engine

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3
EXIT_OVER_CAP = 4
EXIT_DISAGREE = 5

OUTPUT_ENV = "PMOTS_OUTPUT_DIR"
DEFAULT_OUTPUT = "pmots-out"

log = logging.getLogger("pmots")


class _Fail(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _output_dir(args, scenario: Optional[Scenario] = None) -> Path:
    chosen = (args.output_dir
              or (scenario.output_dir if scenario is not None else None)
              or os.environ.get(OUTPUT_ENV)
              or DEFAULT_OUTPUT)
    out = Path(chosen)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, text: str, written: list[Path]) -> Path:
    path = out / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    written.append(path)
    return path


def _file_record(path: Path) -> dict:
    data = path.read_bytes()
    return {"file": path.name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}


def _write_manifest(out: Path, command: str, scenario_path: Optional[str], raw: Optional[bytes],
                    seed: Optional[int], timings: dict, written: list[Path], extra: Optional[dict] = None) -> None:
    manifest = {
        "tool": "pmots",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "scenario": scenario_path,
        "scenario_sha256": content_hash(raw) if raw is not None else None,
        "seed": seed,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
        "outputs": [_file_record(p) for p in written],
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def _load(path: str) -> tuple[Scenario, bytes]:
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        raise _Fail(EXIT_INVALID, "invalid scenario:\n  " + "\n  ".join(exc.errors)) from exc


def _problem(scenario: Scenario):
    try:
        return build_problem(scenario)
    except ScenarioError as exc:
        raise _Fail(EXIT_INVALID, "invalid scenario:\n  " + "\n  ".join(exc.errors)) from exc


# -- commands ----------------------------------------------------------------------

def cmd_run(args) -> int:
    scenario, raw = _load(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    out = _output_dir(args, scenario)
    t0 = time.perf_counter()
    problem = _problem(scenario)
    t_build = time.perf_counter() - t0

    written: list[Path] = []
    checkpoint = out / "checkpoint.pkl"
    every = scenario.search.checkpoint_every
    try:
        if args.resume:
            engine = Engine.load_checkpoint(args.resume, problem)
        else:
            engine = Engine(problem, scenario.pmots_config(seed))
    except (OSError, ValueError, KeyError, EOFError, pickle.UnpicklingError) as exc:
        raise _Fail(EXIT_RUNTIME, f"cannot start search: {exc}") from exc

    trace_path = out / "trace.jsonl"
    t1 = time.perf_counter()
    try:
        with open(trace_path, "a" if args.resume else "w", encoding="utf-8", newline="\n") as trace:
            def progress(stats):
                trace.write(stats.to_json() + "\n")
                trace.flush()
                if every and (stats.iteration + 1) % every == 0:
                    engine.save_checkpoint(checkpoint)

            report = engine.run(progress)
    except Exception as exc:  # any model failure mid-search is a runtime failure
        raise _Fail(EXIT_RUNTIME, f"search failed: {type(exc).__name__}: {exc}") from exc
    written.append(trace_path)
    t_search = time.perf_counter() - t1

    names = list(getattr(problem, "objective_names", ()))
    members = report.archive.members
    if not names:
        names = [f"f_{i + 1}" for i in range(len(members[0].objectives))] if members else []
    _write(out, "front.csv", front_to_csv(members, names), written)
    _write(out, "front.json", front_to_json(members, names), written)
    if every:
        engine.save_checkpoint(checkpoint)
        written.append(checkpoint)

    stalled = report.stalled_paths
    if stalled:
        log.warning("paths %s stalled (empty neighbourhood) at least once", stalled)
    _write_manifest(out, "run", args.scenario, raw, seed,
                    {"build": t_build, "search": t_search}, written,
                    {"front_size": len(members), "evaluations": report.initial_evaluations + report.total_evaluations,
                     "stalled_paths": stalled, "resumed_from": args.resume})
    print(f"front: {len(members)} solutions -> {out / 'front.csv'}")
    return EXIT_OK


def _wlp_count(scenario: Scenario, min_active: int, max_active: Optional[int]):
    """Solution count straight from the instance, without building the coverage tensor."""
    inst = build_wlp_instance(scenario.wlp)
    hi = inst.cap if max_active is None else min(max_active, inst.n_sites)
    per = {n: subset_size(inst.n_sites, n, inst.n_powers, inst.n_directions)
           for n in range(max(min_active, 0), hi + 1)}
    return inst, per


def cmd_oracle(args) -> int:
    scenario, raw = _load(args.scenario)
    spec_section = scenario.oracle
    cap = spec_section.cap if args.cap is None else args.cap
    if spec_section.max_active is not None and spec_section.min_active > spec_section.max_active:
        raise _Fail(EXIT_INVALID, "enumeration space is empty: oracle.min_active exceeds oracle.max_active")

    if scenario.problem == "wlp":
        try:
            inst, per = _wlp_count(scenario, spec_section.min_active, spec_section.max_active)
        except ValueError as exc:
            raise _Fail(EXIT_INVALID, f"invalid scenario:\n  wlp: {exc}") from exc
        total = sum(per.values())
        if total > cap:
            detail = ", ".join(
                f"subset_size({inst.n_sites}, {n}, {inst.n_powers}, {inst.n_directions}) = {c}" for n, c in per.items()
            )
            raise _Fail(EXIT_OVER_CAP, f"enumeration of {total} solutions exceeds the cap of {cap} ({detail})")

    out = _output_dir(args, scenario)
    t0 = time.perf_counter()
    problem = _problem(scenario)
    spec = EnumerationSpec(problem, spec_section.min_active, spec_section.max_active, cap)
    try:
        archive = exhaustive_pareto(spec)
    except CapExceeded as exc:
        raise _Fail(EXIT_OVER_CAP, str(exc)) from exc
    except EmptySpace as exc:
        raise _Fail(EXIT_INVALID, str(exc)) from exc
    except Exception as exc:
        raise _Fail(EXIT_RUNTIME, f"enumeration failed: {type(exc).__name__}: {exc}") from exc
    elapsed = time.perf_counter() - t0

    names = list(problem.objective_names)
    written: list[Path] = []
    _write(out, "front.csv", front_to_csv(archive.members, names), written)
    _write(out, "front.json", front_to_json(archive.members, names), written)
    _write_manifest(out, "oracle", args.scenario, raw, None, {"enumerate": elapsed}, written,
                    {"front_size": len(archive), "enumerated": spec.count(), "cap": cap})
    print(f"exact front: {len(archive)} solutions of {spec.count()} -> {out / 'front.csv'}")
    return EXIT_OK


def cmd_select(args) -> int:
    if args.count < 1:
        raise _Fail(EXIT_INVALID, "N_F must be >= 1")
    try:
        text = Path(args.front).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _Fail(EXIT_INVALID, f"cannot read front: {exc}") from exc
    is_json = args.front.endswith(".json")
    try:
        if is_json:
            names, solutions = read_front_json(text)
            records = json.loads(text)
        else:
            names, solutions, lines = read_front_csv(text)
    except ValueError as exc:
        raise _Fail(EXIT_INVALID, f"malformed front file: {exc}") from exc
    if not solutions:
        raise _Fail(EXIT_INVALID, "front file has no rows")
    if len({s.id for s in solutions}) != len(solutions):
        raise _Fail(EXIT_INVALID, "malformed front file: duplicate ids")

    picked = select_representatives(solutions, args.count)
    position = {s.id: i for i, s in enumerate(solutions)}
    order = [position[s.id] for s in picked]
    if is_json:
        result = json.dumps([records[i] for i in order], indent=1) + "\n"
    else:
        header = text.splitlines()[0]
        result = "\n".join([header, *(lines[i] for i in order)]) + "\n"

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(result)
    else:
        sys.stdout.write(result)
    return EXIT_OK


def cmd_validate_wsn(args) -> int:
    from pmots.wsn import monte_carlo_oracle, agreement_standard_errors, z_scores

    scenario, raw = _load(args.scenario)
    if scenario.problem != "wsn":
        raise _Fail(EXIT_INVALID, f"validate-wsn needs a wsn scenario, got '{scenario.problem}'")
    section = scenario.validate_wsn
    trials = section.trials if args.trials is None else args.trials
    if trials < 1:
        raise _Fail(EXIT_INVALID, "trials must be >= 1")
    seed = section.seed if args.seed is None else args.seed
    out = _output_dir(args, scenario)
    problem = _problem(scenario)

    rng = np.random.default_rng(seed)
    solutions = [("all-zero", problem.empty_solution()),
                 ("all-on", problem.solution_from({i: problem.levels[-1] for i in problem.eligible}))]
    for r in range(section.random_solutions):
        levels = rng.choice(problem.levels, size=len(problem.eligible))
        solutions.append((f"random-{r + 1}", problem.solution_from(dict(zip(problem.eligible, levels)))))

    t0 = time.perf_counter()
    rows = ["solution,criterion,dp,mc_mean,stderr,z"]
    worst = 0.0
    for k, (label, sol) in enumerate(solutions):
        dp = problem.criteria(sol).as_tuple()
        try:
            est = monte_carlo_oracle(problem, sol, trials, seed + k)
        except Exception as exc:
            raise _Fail(EXIT_RUNTIME, f"monte-carlo oracle failed on {label}: {exc}") from exc
        z = z_scores(dp, est)
        se_used = agreement_standard_errors(dp, est)
        for name, d, m, se, zz in zip(("f_r", "f_d", "f_e"), dp, est.mean, se_used, z):
            rows.append(f"{label},{name},{float(d)!r},{float(m)!r},{float(se)!r},{float(zz)!r}")
            worst = max(worst, abs(float(zz)))
    elapsed = time.perf_counter() - t0

    written: list[Path] = []
    _write(out, "validation.csv", "\n".join(rows) + "\n", written)
    _write_manifest(out, "validate-wsn", args.scenario, raw, seed, {"validate": elapsed}, written,
                    {"trials": trials, "max_abs_z": worst})
    print(f"max |z| = {worst:.3f} over {len(solutions)} solutions -> {out / 'validation.csv'}")
    if worst > 3.0:
        log.error("DP and Monte-Carlo disagree (max |z| = %.3f > 3)", worst)
        return EXIT_DISAGREE
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmots", description="Parallel multiobjective Tabu search.")
    parser.add_argument("--version", action="version", version=f"pmots {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="search a scenario and export the front")
    p.add_argument("scenario")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--resume", metavar="CHECKPOINT", help="continue from a saved checkpoint")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="exact front by exhaustive enumeration")
    p.add_argument("scenario")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--cap", type=int, help="override the enumeration cap")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("select", help="pick representative solutions from a front export")
    p.add_argument("front")
    p.add_argument("count", type=int, metavar="N_F")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("validate-wsn", help="compare DP criteria against Monte-Carlo simulation")
    p.add_argument("scenario")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_validate_wsn)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="pmots: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"pmots: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
