import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from collabnav.cli import SUMMARY_HEADER, main, parse_seeds, UsageError

DATA = resources.files("collabnav") / "data"
GRAPH = str(DATA / "scout_graph.json")
SCENARIO = str(DATA / "scout_scenario.json")
SCENE = str(DATA / "scout_scene.json")


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_parse_seeds():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("7") == [7]
    with pytest.raises(UsageError):
        parse_seeds("3..1")
    with pytest.raises(UsageError):
        parse_seeds("a..b")


def test_run_both_planners_writes_every_trial(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--graph", GRAPH, "--scenario", SCENARIO, "--planner", "both",
               "--seeds", "0..9", "--rollouts", "32", "--out", str(out)])
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert len([n for n in names if n.startswith("metrics_")]) == 20
    assert len([n for n in names if n.startswith("events_")]) == 20
    assert "metrics_independent_9.csv" in names and "summary.csv" in names
    rows = list(csv.DictReader(io.StringIO((out / "summary.csv").read_text())))
    assert list(rows[0]) == SUMMARY_HEADER
    assert [(r["planner"], r["agent"]) for r in rows] == [
        ("collaborative", "jackal"), ("collaborative", "husky"), ("collaborative", "TEAM"),
        ("independent", "jackal"), ("independent", "husky"), ("independent", "TEAM")]
    assert all(r["trials"] == "10" and r["complete"] == "10" for r in rows)
    assert "20 trials, 0 failed" in capsys.readouterr().out


def test_continuous_needs_a_scene(tmp_path, capsys):
    rc = main(["run", "--graph", GRAPH, "--scenario", SCENARIO, "--fidelity", "continuous",
               "--out", str(tmp_path)])
    assert rc == 2
    assert "--scene" in capsys.readouterr().err


def test_continuous_run_writes_trajectories(tmp_path):
    rc = main(["run", "--graph", GRAPH, "--scenario", SCENARIO, "--scene", SCENE,
               "--fidelity", "continuous", "--rollouts", "32", "--seeds", "1", "--out", str(tmp_path)])
    assert rc == 0
    header = (tmp_path / "trajectories_collaborative_1.csv").read_text().splitlines()[0]
    assert header == "t,agent,x,y"


def test_failed_trial_exits_one(tmp_path):
    g = write(tmp_path, "g.json", {"nodes": [{"id": "A", "x": 0, "y": 0}, {"id": "B", "x": 10, "y": 0},
                                             {"id": "C", "x": 20, "y": 0}],
                                   "edges": [{"u": "A", "v": "B", "rho": 0.999}, {"u": "B", "v": "C"}]})
    sc = write(tmp_path, "s.json", {"agents": [{"id": "r", "speed": 1, "start": "A", "goal": "C"}]})
    rc = main(["run", "--graph", g, "--scenario", sc, "--out", str(tmp_path / "o")])
    assert rc == 1
    metrics = (tmp_path / "o" / "metrics_collaborative_0.csv").read_text()
    assert "Failed:PlanningStuck" in metrics


def test_oracle_output(capsys):
    assert main(["oracle", "--graph", GRAPH, "--scenario", SCENARIO]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[0]["oracle_s"]) == pytest.approx(145.625)
    assert float(rows[0]["collaborative_ratio"]) >= 1.0 - 1e-9
    assert float(rows[0]["independent_ratio"]) >= float(rows[0]["collaborative_ratio"])


def test_oracle_without_unknowns_agrees_everywhere(tmp_path, capsys):
    g = write(tmp_path, "g.json", {"nodes": [{"id": "A", "x": 0, "y": 0}, {"id": "B", "x": 30, "y": 0},
                                             {"id": "C", "x": 30, "y": 40}],
                                   "edges": [{"u": "A", "v": "B"}, {"u": "B", "v": "C"}, {"u": "A", "v": "C"}]})
    sc = write(tmp_path, "s.json", {"agents": [{"id": "p", "speed": 1, "start": "A", "goal": "C"},
                                               {"id": "q", "speed": 2, "start": "C", "goal": "B"}]})
    assert main(["oracle", "--graph", g, "--scenario", sc]) == 0
    row = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))[0]
    assert row["oracle_s"] == row["collaborative_s"] == row["independent_s"] == "50.000000"


def test_oracle_refuses_large_instances(tmp_path, capsys):
    nodes = [{"id": n, "x": 10 * i, "y": 0} for i, n in enumerate("ABCD")]
    edges = [{"u": "A", "v": "B", "rho": 0.5}, {"u": "B", "v": "C", "rho": 0.5},
             {"u": "C", "v": "D", "rho": 0.5}, {"u": "A", "v": "D"}]
    g = write(tmp_path, "g.json", {"nodes": nodes, "edges": edges})
    sc = write(tmp_path, "s.json", {"agents": [{"id": "r", "speed": 1, "start": "A", "goal": "D"}]})
    assert main(["oracle", "--graph", g, "--scenario", sc]) == 2
    assert "too large" in capsys.readouterr().err


def test_validate(tmp_path, capsys):
    assert main(["validate", "--graph", GRAPH, "--scene", SCENE]) == 0
    assert capsys.readouterr().out.strip().endswith("0 violations")
    bad = write(tmp_path, "g.json", {"nodes": [{"id": "A", "x": 0, "y": 0}, {"id": "B", "x": 1, "y": 0}],
                                     "edges": [{"u": "A", "v": "B", "rho": 1.2}]})
    assert main(["validate", "--graph", bad]) == 1
    assert "rho" in capsys.readouterr().out
    inside = write(tmp_path, "scene.json", {"bounds": [-10, -55, 160, 75],
                                            "obstacles": [{"circle": [40, 0, 2]}]})
    assert main(["validate", "--graph", GRAPH, "--scene", inside]) == 1
    out = capsys.readouterr().out
    assert "node X" in out and out.strip().endswith("1 violations")


def test_missing_file_and_bad_flags(tmp_path, capsys):
    assert main(["run", "--graph", str(tmp_path / "nope.json"), "--scenario", SCENARIO]) == 2
    assert "--graph" in capsys.readouterr().err
    assert main(["run", "--graph", GRAPH]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "collabnav", "validate", "--graph", GRAPH],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0 violations"
