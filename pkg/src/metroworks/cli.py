"""Command-line front end.

Subcommands: validate, plan, negotiate, report, gantt. Exit codes: 0 on
success, 1 on validation/parse problems, 2 on solver failures, 64 on usage
errors. The environment variables METROWORKS_MAX_NODES and
METROWORKS_TIME_LIMIT cap every MILP solve (node count / seconds).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import milp
from .gantt import csv_to_svg, plan_to_svg
from .model import Instance, ParseError, ValidationError, load_instance, save_instance
from .negotiation import evaluate_plan, make_cell_solver, run, history_to_dict
from .report import (
    REFERENCES, report_to_csv, report_to_json, single_run_report, _assemble,
)
from .sp1 import (
    InfeasibleSchedule, plan_to_csv, position_based_plan, priority_based_plan,
    solve_sp1, PossessionPlan,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _budget_kwargs() -> dict:
    kwargs = {}
    nodes = os.environ.get("METROWORKS_MAX_NODES")
    seconds = os.environ.get("METROWORKS_TIME_LIMIT")
    if nodes:
        kwargs["max_nodes"] = int(nodes)
    if seconds:
        kwargs["time_limit"] = float(seconds)
    return kwargs


def _apply_budget() -> None:
    budget = _budget_kwargs()
    if budget:
        original = milp.solve

        def budgeted(model, **kwargs):
            merged = dict(budget)
            merged.update(kwargs)
            return original(model, **merged)

        milp.solve = budgeted  # narrow: the CLI process only


def build_parser() -> _Parser:
    parser = _Parser(prog="metroworks",
                     description="Metro maintenance possessions with multimodal mitigation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate an instance file")
    p.add_argument("instance")

    p = sub.add_parser("plan", help="solve the allocation problem or a baseline")
    p.add_argument("instance")
    p.add_argument("--baseline", choices=["position", "priority"])
    p.add_argument("--out", help="write the plan CSV here (default: stdout)")

    p = sub.add_parser("negotiate", help="run the full negotiation loop")
    p.add_argument("instance")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--nominal", action="store_true",
                   help="use nominal demand instead of a sampled draw")
    p.add_argument("--timings", action="store_true",
                   help="include wall times in the run log (breaks byte determinism)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="regenerate the comparison report from a run directory")
    p.add_argument("rundir")
    p.add_argument("--against", default="first",
                   help="comma list from first,position,priority")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="write here instead of stdout")

    p = sub.add_parser("gantt", help="render a plan CSV as an SVG chart")
    p.add_argument("plan_csv")
    p.add_argument("--out", required=True)
    p.add_argument("--horizon", type=int, default=None)
    return parser


def _load(path: str) -> Instance:
    return load_instance(path)


def cmd_validate(args) -> int:
    instance = _load(args.instance)
    graph = instance.graph
    print(f"ok: {instance.name}: {len(graph.nodes)} nodes, {len(graph.links)} links, "
          f"{len(instance.interventions)} interventions, horizon {instance.horizon}")
    return EXIT_OK


def cmd_plan(args) -> int:
    instance = _load(args.instance)
    if args.baseline == "position":
        plan = position_based_plan(instance)
    elif args.baseline == "priority":
        plan = priority_based_plan(instance)
    else:
        plan = solve_sp1(instance)
    csv_text = plan_to_csv(instance, plan)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _write_cells(instance: Instance, record, out: Path, label: str) -> None:
    lines = ["week,period,link,flow,capacity,activated,units"]
    for (week, period), cell in sorted(record.cells.items()):
        sol = cell.mitigation
        for lid in instance.graph.link_ids():
            flow = sol.flows.get(lid, 0.0)
            units = sol.units.get(lid, 0)
            act = sol.activations.get(lid, 0)
            if flow or units or act:
                lines.append(f"{week},{period},{lid},{flow!r},{sol.capacities[lid]!r},{act},{units}")
    (out / f"cells_{label}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["week,period,origin,destination,unmet"]
    for (week, period), cell in sorted(record.cells.items()):
        for (o, d), value in sorted(cell.mitigation.unmet.items()):
            lines.append(f"{week},{period},{o},{d},{value!r}")
    (out / f"unmet_{label}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["week,period,line_index,stop_sequence,capacity"]
    from .sp3 import extract_lines
    for (week, period), cell in sorted(record.cells.items()):
        for index, line in enumerate(extract_lines(cell.design, instance.graph)):
            stops = "-".join(str(n) for n in line.nodes)
            lines.append(f"{week},{period},{index},{stops},{line.capacity!r}")
    (out / f"designs_{label}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_demand(instance: Instance, demands, out: Path) -> None:
    order = instance.graph.node_ids()
    for period, matrix in sorted(demands.items()):
        lines = ["origin," + ",".join(str(n) for n in order)]
        for i, origin in enumerate(order):
            row = ",".join(str(int(v)) for v in matrix.entries[i])
            lines.append(f"{origin},{row}")
        (out / f"demand_{period}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_negotiate(args) -> int:
    instance = _load(args.instance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run(instance, iterations=args.iterations, seed=args.seed,
                 sampled=not args.nominal, log_path=out / "run.jsonl",
                 include_timings=args.timings)
    save_instance(instance, out / "instance.json")
    (out / "history.json").write_text(
        json.dumps(history_to_dict(result), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "plan_best.csv").write_text(plan_to_csv(instance, result.best.plan), encoding="utf-8")
    (out / "plan_first.csv").write_text(plan_to_csv(instance, result.first.plan), encoding="utf-8")
    (out / "gantt_best.svg").write_text(plan_to_svg(instance, result.best.plan), encoding="utf-8")
    _write_cells(instance, result.best, out, "best")
    _write_cells(instance, result.first, out, "first")
    _write_demand(instance, result.demands, out)
    report = single_run_report(instance, result)
    (out / "report.csv").write_text(report_to_csv(report), encoding="utf-8")
    best = result.best
    print(f"best iteration: {best.r} of {len(result.history)} "
          f"(sp2 aggregate {best.sp2_aggregate:.3f})")
    return EXIT_OK


def cmd_report(args) -> int:
    rundir = Path(args.rundir)
    instance = load_instance(rundir / "instance.json")
    against = [token.strip() for token in args.against.split(",") if token.strip()]
    bad = [token for token in against if token not in REFERENCES]
    if bad:
        print(f"unknown references: {bad}", file=sys.stderr)
        return EXIT_USAGE
    from .model import DemandMatrix
    import numpy as np

    demands = {}
    for period in instance.periods:
        path = rundir / f"demand_{period}.csv"
        rows = [line.split(",")[1:] for line in
                path.read_text(encoding="utf-8").strip().splitlines()[1:]]
        demands[period] = DemandMatrix(
            period=period, nodes=tuple(instance.graph.node_ids()),
            entries=np.array([[int(v) for v in row] for row in rows], dtype=np.int64))

    history = json.loads((rundir / "history.json").read_text(encoding="utf-8"))
    solver = make_cell_solver(instance, demands)
    records = {}
    for raw in history["iterations"]:
        plan = PossessionPlan(
            x=frozenset(tuple(c) for c in raw["x"]),
            y=frozenset(tuple(c) for c in raw["y"]),
            t={int(k): v for k, v in raw["t"].items()},
            iteration=raw["r"], objective=raw["sp1_objective"])
        records[raw["r"]] = plan
    best_r = history["best_index"] + 1
    scenarios = {"best": evaluate_plan(instance, records[best_r], solver, r=best_r)}
    if "first" in against:
        scenarios["first"] = evaluate_plan(instance, records[1], solver, r=1)
    if "position" in against:
        scenarios["position"] = evaluate_plan(instance, position_based_plan(instance), solver)
    if "priority" in against:
        scenarios["priority"] = evaluate_plan(instance, priority_based_plan(instance), solver)
    report = _assemble(instance, [scenarios])
    text = report_to_csv(report) if args.format == "csv" else report_to_json(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gantt(args) -> int:
    text = Path(args.plan_csv).read_text(encoding="utf-8")
    Path(args.out).write_text(csv_to_svg(text, args.horizon), encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:
        return stop.code if stop.code is not None else EXIT_USAGE
    _apply_budget()
    handlers = {
        "validate": cmd_validate,
        "plan": cmd_plan,
        "negotiate": cmd_negotiate,
        "report": cmd_report,
        "gantt": cmd_gantt,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (milp.NumericalFailure, InfeasibleSchedule) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
