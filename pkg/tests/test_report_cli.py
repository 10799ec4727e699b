"""Comparison report and command-line interface."""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from helpers import make_line_instance
from metroworks.cli import main
from metroworks.gantt import csv_to_svg
from metroworks.model import save_instance
from metroworks.negotiation import evaluate_plan, make_cell_solver, run
from metroworks.report import (
    compare, delta, report_to_csv, report_to_json, single_run_report,
    sp1_components, sp2_components, sp3_components,
)
from metroworks.sp1 import position_based_plan


def _toy():
    return make_line_instance(
        stations=4, horizon=6, N=2,
        interventions=[(1, 1, 8, 6), (3, 2, 3, 6)],
        activatable_pairs=[(1, 2, 4.0, 8.0), (2, 3, 4.0, 8.0)],
        walk_pairs=[(1, 2, 10.0)],
        demand={"am": {(1, 4): 300, (4, 1): 200}, "off": {(1, 4): 30}},
        utilization={1: 1.0, 2: 1.0, 3: 1.0, 4: 0.5, 5: 0.5, 6: 0.5},
    )


def test_identical_records_give_zero_deltas():
    instance = _toy()
    result = run(instance, iterations=1, seed=1)
    record = result.history[0]
    from metroworks.report import _assemble
    report = _assemble(instance, [{"best": record, "first": record}])
    for scope, rows in report.deltas.items():
        for row, refs in rows.items():
            assert refs["first"] in (0.0, None)
            if refs["first"] is None:  # n/a only when both sides are zero-free
                assert report.values[scope][row]["best"] != 0.0


def test_delta_semantics():
    assert delta(8.0, 10.0) == pytest.approx(-0.2)
    assert delta(0.0, 0.0) == 0.0
    assert delta(5.0, 0.0) is None


def test_component_blocks_match_table_layout():
    instance = _toy()
    result = run(instance, iterations=1, seed=1)
    record = result.history[0]
    sp1 = sp1_components(instance, record)
    assert set(sp1) == {"weighted_completion_time", "impact_on_passengers", "total"}
    sp2 = sp2_components(instance, record)
    assert set(sp2) == set(instance.periods)
    assert set(sp2["am"]) == {"activation_cost", "pedestrian_cost", "metro_cost",
                              "bus_cost", "train_cost", "additional_cost", "unmet_cost"}
    sp3 = sp3_components(instance, record)
    assert set(sp3["am"]) == {"line_capacity", "links_capacity", "capacity_surplus"}


def test_compare_produces_all_references():
    instance = _toy()
    result = run(instance, iterations=2, seed=1)
    report = compare(instance, result, n_instances=2, seed=50)
    assert report.n_instances == 2
    assert report.references == ["first", "position", "priority"]
    csv_text = report_to_csv(report)
    assert csv_text.startswith("scope,component,best,first,position,priority")
    payload = json.loads(report_to_json(report))
    assert payload["n_instances"] == 2


def test_gantt_csv_has_one_bar_per_cell(tmp_path):
    csv_text = "week,link_id,intervention_id,priority\n1,1,1,8\n2,3,2,3\n3,3,2,3\n"
    svg = csv_to_svg(csv_text)
    assert svg.count("<rect") == 3
    assert svg.startswith("<svg")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

@pytest.fixture()
def instance_file(tmp_path):
    instance = _toy()
    path = tmp_path / "toy.json"
    save_instance(instance, path)
    return path


def test_cli_validate_ok(instance_file, capsys):
    assert main(["validate", str(instance_file)]) == 0
    assert "ok:" in capsys.readouterr().out


def test_cli_validate_broken_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert main(["validate", str(bad)]) == 1


def test_cli_usage_error():
    assert main(["negotiate"]) == 64  # missing required arguments
    assert main([]) == 64


def test_cli_plan_baseline(instance_file, capsys):
    assert main(["plan", str(instance_file), "--baseline", "priority"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("week,link_id,intervention_id,priority")


def test_cli_plan_optimal_writes_file(instance_file, tmp_path):
    out = tmp_path / "plan.csv"
    assert main(["plan", str(instance_file), "--out", str(out)]) == 0
    assert out.read_text().startswith("week,link_id")


def test_cli_negotiate_report_gantt_roundtrip(instance_file, tmp_path, capsys):
    rundir = tmp_path / "run"
    code = main(["negotiate", str(instance_file), "--iterations", "2",
                 "--seed", "7", "--out", str(rundir)])
    assert code == 0
    expected = {"instance.json", "run.jsonl", "history.json", "plan_best.csv",
                "plan_first.csv", "gantt_best.svg", "cells_best.csv",
                "cells_first.csv", "unmet_best.csv", "unmet_first.csv",
                "designs_best.csv", "designs_first.csv", "report.csv",
                "demand_am.csv", "demand_off.csv"}
    assert expected <= {p.name for p in rundir.iterdir()}

    # report regeneration from the exported files is byte-identical
    out_file = tmp_path / "report.csv"
    assert main(["report", str(rundir), "--against", "first",
                 "--out", str(out_file)]) == 0
    assert out_file.read_bytes() == (rundir / "report.csv").read_bytes()

    svg_out = tmp_path / "plan.svg"
    assert main(["gantt", str(rundir / "plan_best.csv"), "--out", str(svg_out)]) == 0
    assert svg_out.read_text().startswith("<svg")


def test_cli_negotiate_deterministic_directories(instance_file, tmp_path, capsys):
    dirs = []
    for name in ("a", "b"):
        rundir = tmp_path / name
        assert main(["negotiate", str(instance_file), "--iterations", "2",
                     "--seed", "3", "--out", str(rundir)]) == 0
        dirs.append(rundir)
    files_a = sorted(p.name for p in dirs[0].iterdir())
    files_b = sorted(p.name for p in dirs[1].iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name


def test_cli_report_rejects_unknown_reference(instance_file, tmp_path, capsys):
    rundir = tmp_path / "run"
    main(["negotiate", str(instance_file), "--iterations", "1",
          "--seed", "7", "--out", str(rundir)])
    assert main(["report", str(rundir), "--against", "bogus"]) == 64


def test_cli_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "metroworks.cli"],
                          capture_output=True, text=True)
    assert proc.returncode == 64


def test_cli_solver_failure_exit_code(tmp_path):
    # two far-apart links both pinned to week 1 by their deadlines violate
    # the adjacency rule, so no feasible possession plan exists
    instance = make_line_instance(
        stations=4, N=3, horizon=6,
        interventions=[(1, 1, 5, 1), (5, 1, 5, 1)])
    path = tmp_path / "impossible.json"
    save_instance(instance, path)
    assert main(["plan", str(path)]) == 2


def test_budget_environment_variables(monkeypatch):
    from metroworks.cli import _budget_kwargs
    monkeypatch.setenv("METROWORKS_MAX_NODES", "123")
    monkeypatch.setenv("METROWORKS_TIME_LIMIT", "4.5")
    assert _budget_kwargs() == {"max_nodes": 123, "time_limit": 4.5}
    monkeypatch.delenv("METROWORKS_MAX_NODES")
    monkeypatch.delenv("METROWORKS_TIME_LIMIT")
    assert _budget_kwargs() == {}


def test_cli_validate_shipped_genoa(capsys):
    data = Path(__file__).resolve().parents[1] / "src" / "metroworks" / "data" / "genoa.json"
    assert main(["validate", str(data)]) == 0
    out = capsys.readouterr().out
    assert "21 nodes, 122 links" in out
