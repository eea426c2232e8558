from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import pytest

from pmots.cli import main
from pmots.oracle import EnumerationSpec, exhaustive_pareto
from pmots.pareto import EvaluatedSolution, front_to_csv, front_to_json, read_front_csv, read_front_json
from pmots.scenario import build_problem, load_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

TOY = """\
problem: toy
seed: 1
toy: {size: 16}
search: {paths: 4, iterations: 50, max_rank: 1, tenure_min: 1, tenure_max: 3}
"""


def write(tmp_path, text, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))[1:]


def synthetic_front(n):
    # points on a quarter circle are mutually non-dominated
    import math

    sols = [EvaluatedSolution(i, (i, "tag"), (math.cos(i / (n - 1) * math.pi / 2), math.sin(i / (n - 1) * math.pi / 2)))
            for i in range(n)]
    return sols, ["f_1", "f_2"]


class TestRun:
    def test_toy_front_has_sixteen_rows(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", write(tmp_path, TOY), "-o", str(out)]) == 0
        rows = csv_rows(out / "front.csv")
        assert len(rows) == 16
        assert {(float(r[1]), float(r[2])) for r in rows} == {(float(x), float(15 - x)) for x in range(16)}
        for name in ("front.csv", "front.json", "trace.jsonl", "manifest.json"):
            assert (out / name).is_file()
        trace = (out / "trace.jsonl").read_text().splitlines()
        assert len(trace) == 50
        assert [json.loads(t)["iteration"] for t in trace] == list(range(50))

    def test_inverted_tenure_is_invalid(self, tmp_path, capsys):
        bad = TOY.replace("tenure_min: 1, tenure_max: 3", "tenure_min: 4, tenure_max: 2")
        assert main(["run", write(tmp_path, bad), "-o", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "search" in err and "tenure" in err

    @pytest.mark.parametrize(
        "edit, path",
        [
            (lambda t: t + "bogus: 1\n", "bogus"),
            (lambda t: t.replace("size: 16", "size: 16, colour: red"), "toy.colour"),
            (lambda t: t.replace("paths: 4", "paths: 0"), "search.paths"),
            (lambda t: t.replace("problem: toy", "problem: knapsack"), "problem"),
            (lambda t: t.replace("paths: 4", "paths: '4'"), "search.paths"),
        ],
    )
    def test_validation_reports_field_path(self, tmp_path, capsys, edit, path):
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, edit(TOY)), "-o", str(out)]) == 2
        assert path in capsys.readouterr().err
        assert not (out / "front.csv").exists()

    def test_unparseable_yaml(self, tmp_path):
        assert main(["run", write(tmp_path, "problem: [toy\n"), "-o", str(tmp_path / "o")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.yaml")]) == 2

    def test_rerun_is_byte_identical(self, tmp_path):
        scen = write(tmp_path, TOY)
        assert main(["run", scen, "-o", str(tmp_path / "a")]) == 0
        assert main(["run", scen, "-o", str(tmp_path / "b")]) == 0
        for name in ("front.csv", "front.json", "trace.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override_recorded(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, TOY), "-o", str(out), "--seed", "42"]) == 0
        assert json.loads((out / "manifest.json").read_text())["seed"] == 42

    def test_stalled_paths_warn_but_succeed(self, tmp_path, caplog):
        # a one-point chain has no neighbours at all
        text = TOY.replace("size: 16", "size: 1").replace("paths: 4", "paths: 1")
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, text), "-o", str(out)]) == 0
        assert "stalled" in caplog.text
        assert json.loads((out / "manifest.json").read_text())["stalled_paths"] == [1]

    def test_resume_matches_uninterrupted_run(self, tmp_path):
        full = tmp_path / "full"
        assert main(["run", write(tmp_path, TOY), "-o", str(full)]) == 0
        part = TOY.replace("iterations: 50", "iterations: 50, checkpoint_every: 20")
        out = tmp_path / "part"
        assert main(["run", write(tmp_path, part, "p.yaml"), "-o", str(out)]) == 0
        resumed = tmp_path / "resumed"
        assert main(["run", write(tmp_path, part, "p.yaml"), "-o", str(resumed),
                     "--resume", str(out / "checkpoint.pkl")]) == 0
        assert (resumed / "front.csv").read_bytes() == (full / "front.csv").read_bytes()

    def test_bad_checkpoint_is_runtime_failure(self, tmp_path):
        junk = tmp_path / "junk.pkl"
        junk.write_bytes(b"not a pickle")
        assert main(["run", write(tmp_path, TOY), "-o", str(tmp_path / "o"), "--resume", str(junk)]) == 3


class TestOutputs:
    def test_manifest_contents(self, tmp_path):
        scen = write(tmp_path, TOY)
        out = tmp_path / "o"
        main(["run", scen, "-o", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["scenario_sha256"] == hashlib.sha256(Path(scen).read_bytes()).hexdigest()
        assert manifest["seed"] == 1 and manifest["backend"] in ("cython", "python")
        for rec in manifest["outputs"]:
            assert hashlib.sha256((out / rec["file"]).read_bytes()).hexdigest() == rec["sha256"]

    def test_hash_changes_iff_bytes_change(self, tmp_path):
        def digest(text, name):
            out = tmp_path / name
            main(["run", write(tmp_path, text, name + ".yaml"), "-o", str(out)])
            return json.loads((out / "manifest.json").read_text())["scenario_sha256"]

        same = digest(TOY, "a"), digest(TOY, "b")
        assert same[0] == same[1]
        assert digest(TOY + "# comment\n", "c") != same[0]

    def test_exports_round_trip(self, tmp_path):
        out = tmp_path / "o"
        main(["run", write(tmp_path, TOY), "-o", str(out)])
        names_c, from_csv, _ = read_front_csv((out / "front.csv").read_text())
        names_j, from_json = read_front_json((out / "front.json").read_text())
        assert names_c == names_j
        assert from_csv == from_json
        assert front_to_csv(from_csv, names_c) == (out / "front.csv").read_text()
        assert front_to_json(from_json, names_j) == (out / "front.json").read_text()
        assert b"\r\n" not in (out / "front.csv").read_bytes()

    def test_output_dir_precedence(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("PMOTS_OUTPUT_DIR", str(tmp_path / "env"))
        scen = write(tmp_path, TOY)
        assert main(["run", scen]) == 0
        assert (tmp_path / "env" / "front.csv").is_file()
        with_dir = write(tmp_path, TOY + f"output_dir: {tmp_path / 'field'}\n", "f.yaml")
        assert main(["run", with_dir]) == 0
        assert (tmp_path / "field" / "front.csv").is_file()
        assert main(["run", with_dir, "-o", str(tmp_path / "flag")]) == 0
        assert (tmp_path / "flag" / "front.csv").is_file()
        monkeypatch.delenv("PMOTS_OUTPUT_DIR")
        assert main(["run", scen]) == 0
        assert (tmp_path / "pmots-out" / "front.csv").is_file()


class TestOracle:
    def test_wlp_small_exact_front(self, tmp_path):
        out = tmp_path / "o"
        scen = SCENARIOS / "wlp_small.yaml"
        assert main(["oracle", str(scen), "-o", str(out)]) == 0
        _, written, _ = read_front_csv((out / "front.csv").read_text())
        scenario, _ = load_scenario(scen)
        prob = build_problem(scenario)
        brute = [prob.evaluate(s) for s in prob.enumerate_solutions(0, 4)]
        brute = [v for v in brute if v is not None]
        expected = {v for v in brute if not any(all(a <= b for a, b in zip(w, v)) and w != v for w in brute)}
        assert {s.objectives for s in written} == expected
        assert {s.objectives for s in written} == exhaustive_pareto(EnumerationSpec(prob, 0, 4)).objective_set()

    def test_building_refused_with_count(self, tmp_path, capsys):
        assert main(["oracle", str(SCENARIOS / "wlp_building.yaml"), "-o", str(tmp_path / "o")]) == 4
        err = capsys.readouterr().err
        assert "22108160000" in err.replace(",", "").replace("_", "")

    def test_cap_flag(self, tmp_path, capsys):
        assert main(["oracle", str(SCENARIOS / "wlp_small.yaml"), "-o", str(tmp_path / "o"), "--cap", "100"]) == 4
        assert "100" in capsys.readouterr().err

    def test_empty_space(self, tmp_path):
        text = (SCENARIOS / "wlp_small.yaml").read_text() + "oracle: {min_active: 3, max_active: 2}\n"
        assert main(["oracle", write(tmp_path, text), "-o", str(tmp_path / "o")]) == 2

    def test_toy(self, tmp_path):
        out = tmp_path / "o"
        assert main(["oracle", write(tmp_path, TOY), "-o", str(out)]) == 0
        assert len(csv_rows(out / "front.csv")) == 16

    def test_wsn(self, tmp_path):
        out = tmp_path / "o"
        assert main(["oracle", str(SCENARIOS / "wsn_small.yaml"), "-o", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["enumerated"] == 2 ** 8


class TestSelect:
    @pytest.mark.parametrize("n, n_f, expected", [(148, 15, 15), (10, 15, 10), (10, 1, 1), (3, 3, 3)])
    def test_row_counts(self, tmp_path, capsys, n, n_f, expected):
        sols, names = synthetic_front(n)
        front = tmp_path / "front.csv"
        front.write_text(front_to_csv(sols, names))
        assert main(["select", str(front), str(n_f)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == expected + 1

    def test_rows_verbatim_in_selection_order(self, tmp_path):
        sols, names = synthetic_front(40)
        text = front_to_csv(sols, names)
        # hand-formatted numbers must survive untouched
        text = text.replace("1.0,", "1.000,", 1)
        front = tmp_path / "front.csv"
        front.write_text(text)
        out = tmp_path / "picked.csv"
        assert main(["select", str(front), "6", "-o", str(out)]) == 0
        picked = out.read_text().splitlines()
        source = text.splitlines()
        assert picked[0] == source[0]
        assert all(line in source[1:] for line in picked[1:])
        assert len(set(picked[1:])) == 6

    def test_json_front(self, tmp_path):
        sols, names = synthetic_front(20)
        front = tmp_path / "front.json"
        front.write_text(front_to_json(sols, names))
        out = tmp_path / "picked.json"
        assert main(["select", str(front), "5", "-o", str(out)]) == 0
        picked = json.loads(out.read_text())
        originals = json.loads(front.read_text())
        assert len(picked) == 5 and all(p in originals for p in picked)

    def test_csv_and_json_agree(self, tmp_path):
        sols, names = synthetic_front(30)
        (tmp_path / "f.csv").write_text(front_to_csv(sols, names))
        (tmp_path / "f.json").write_text(front_to_json(sols, names))
        main(["select", str(tmp_path / "f.csv"), "7", "-o", str(tmp_path / "a.csv")])
        main(["select", str(tmp_path / "f.json"), "7", "-o", str(tmp_path / "a.json")])
        ids_csv = [int(r[0]) for r in csv_rows(tmp_path / "a.csv")]
        ids_json = [r["id"] for r in json.loads((tmp_path / "a.json").read_text())]
        assert ids_csv == ids_json

    @pytest.mark.parametrize(
        "content",
        ["", "id,f_1,f_2,encoding\n0,1.0\n", "x,y\n1,2\n", "id,f_1,f_2,encoding\n0,abc,1.0,[]\n",
         "id,f_1,f_2,encoding\n0,1.0,2.0,[]\n0,2.0,1.0,[]\n", "id,f_1,f_2,encoding\n"],
    )
    def test_malformed(self, tmp_path, content):
        front = tmp_path / "front.csv"
        front.write_text(content)
        assert main(["select", str(front), "3"]) == 2

    def test_bad_count(self, tmp_path):
        sols, names = synthetic_front(5)
        (tmp_path / "f.csv").write_text(front_to_csv(sols, names))
        assert main(["select", str(tmp_path / "f.csv"), "0"]) == 2
        assert main(["select", str(tmp_path / "f.csv"), "many"]) == 2

    def test_missing_front(self, tmp_path):
        assert main(["select", str(tmp_path / "none.csv"), "3"]) == 2


class TestValidateWsn:
    def test_zero_trials(self, tmp_path):
        assert main(["validate-wsn", str(SCENARIOS / "wsn_small.yaml"), "--trials", "0",
                     "-o", str(tmp_path / "o")]) == 2

    def test_wrong_problem(self, tmp_path):
        assert main(["validate-wsn", write(tmp_path, TOY), "-o", str(tmp_path / "o")]) == 2

    def test_report(self, tmp_path):
        out = tmp_path / "o"
        code = main(["validate-wsn", str(SCENARIOS / "wsn_small.yaml"), "--trials", "20000", "-o", str(out)])
        assert code == 0
        with open(out / "validation.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 * 5
        zero = {r["criterion"]: r for r in rows if r["solution"] == "all-zero"}
        for name in ("f_d", "f_e"):
            assert float(zero[name]["dp"]) == 0.0 == float(zero[name]["mc_mean"])
            assert float(zero[name]["z"]) == 0.0
        assert max(abs(float(r["z"])) for r in rows) <= 3.0

    def test_disagreement_exit_code(self, tmp_path, monkeypatch):
        import pmots.wsn as wsn

        real = wsn.monte_carlo_oracle

        def skewed(*args, **kwargs):
            est = real(*args, **kwargs)
            return wsn.MonteCarloEstimate(tuple(m + 0.5 for m in est.mean), est.stderr, est.trials)

        monkeypatch.setattr(wsn, "monte_carlo_oracle", skewed)
        code = main(["validate-wsn", str(SCENARIOS / "wsn_small.yaml"), "--trials", "2000", "-o", str(tmp_path / "o")])
        assert code == 5


class TestParser:
    def test_no_command(self):
        assert main([]) == 2

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "pmots" in capsys.readouterr().out
