"""KPI comparison reporting against the reference strategies.

Builds the three comparison blocks of the case study: allocation objectives
(weighted completion time, impact on passengers), per-period mitigation
objectives (activation cost, generalized cost split by link category, unmet
demand cost) and per-period design objectives (line capacity, provided link
capacity, surplus). Deltas are (best - reference)/reference; a zero reference
is reported as n/a. Multi-instance comparisons average the per-instance
deltas (means of ratios).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .model import ACTIVATABLE, METRO, WALK, Instance, sample_od
from .negotiation import (
    IterationRecord, NegotiationResult, evaluate_plan, make_cell_solver, run,
)
from .sp1 import position_based_plan, priority_based_plan

SP1_ROWS = ("weighted_completion_time", "impact_on_passengers", "total")
SP2_ROWS = ("activation_cost", "pedestrian_cost", "metro_cost", "bus_cost",
            "train_cost", "additional_cost", "unmet_cost")
SP3_ROWS = ("line_capacity", "links_capacity", "capacity_surplus")
REFERENCES = ("first", "position", "priority")


def _category(instance: Instance, link_id: int) -> str:
    link = instance.graph.links[link_id]
    if link.mode == WALK:
        return "pedestrian_cost"
    if link.mode == METRO:
        return "metro_cost"
    if link.mode == ACTIVATABLE:
        return "additional_cost"
    return "train_cost" if link.service == "train" else "bus_cost"


def sp1_components(instance: Instance, record: IterationRecord) -> dict[str, float]:
    completion = sum(iv.priority * (record.plan.t[iv.id] + iv.duration)
                     for iv in instance.interventions)
    impact = sum(instance.utilization(k) for (_, k) in record.plan.x)
    alpha = instance.alpha
    return {
        "weighted_completion_time": float(completion),
        "impact_on_passengers": float(impact),
        "total": alpha[0] * completion + alpha[1] * impact,
    }


def sp2_components(instance: Instance, record: IterationRecord) -> dict[str, dict[str, float]]:
    beta = instance.beta
    out = {b: {row: 0.0 for row in SP2_ROWS} for b in instance.periods}
    for (week, period), cell in sorted(record.cells.items()):
        block = out[period]
        sol = cell.mitigation
        for lid, flow in sol.flows.items():
            if flow:
                block[_category(instance, lid)] += beta[0] * instance.graph.links[lid].eta * flow
        unit_cost = sum(instance.graph.links[lid].activation_cost * n
                        for lid, n in sol.units.items())
        block["activation_cost"] += beta[1] * unit_cost + beta[2] * sum(sol.activations.values())
        block["unmet_cost"] += beta[3] * sol.total_unmet()
    return out


def sp3_components(instance: Instance, record: IterationRecord) -> dict[str, dict[str, float]]:
    out = {b: {row: 0.0 for row in SP3_ROWS} for b in instance.periods}
    for (week, period), cell in sorted(record.cells.items()):
        block = out[period]
        block["line_capacity"] += cell.design.total_line_capacity()
        block["links_capacity"] += cell.design.total_provided()
        block["capacity_surplus"] += cell.design.total_surplus()
    return out


def delta(best: float, reference: float) -> float | None:
    if reference == 0.0:
        return None if best != 0.0 else 0.0
    return (best - reference) / reference


@dataclass
class ComparisonReport:
    periods: list[str]
    references: list[str]
    n_instances: int
    values: dict = field(default_factory=dict)   # scope -> row -> scenario -> mean value
    deltas: dict = field(default_factory=dict)   # scope -> row -> reference -> mean delta

    def scope_names(self) -> list[str]:
        return ["sp1"] + [f"sp2_{b}" for b in self.periods] + [f"sp3_{b}" for b in self.periods]


def _scenario_components(instance: Instance, record: IterationRecord) -> dict[str, dict[str, float]]:
    blocks = {"sp1": sp1_components(instance, record)}
    for period, rows in sp2_components(instance, record).items():
        blocks[f"sp2_{period}"] = rows
    for period, rows in sp3_components(instance, record).items():
        blocks[f"sp3_{period}"] = rows
    return blocks


def single_run_report(instance: Instance, result: NegotiationResult,
                      baselines: dict[str, IterationRecord] | None = None) -> ComparisonReport:
    """Report for one run: best iteration against the first and, when
    supplied, the two reference strategies."""
    scenarios = {"best": result.best, "first": result.first}
    scenarios.update(baselines or {})
    return _assemble(instance, [scenarios])


def _assemble(instance: Instance, per_instance: list[dict[str, IterationRecord]]) -> ComparisonReport:
    references = [name for name in REFERENCES if all(name in s for s in per_instance)]
    report = ComparisonReport(periods=list(instance.periods), references=references,
                              n_instances=len(per_instance))
    component_values: dict = {}
    for scenarios in per_instance:
        for name, record in scenarios.items():
            blocks = _scenario_components(instance, record)
            for scope, rows in blocks.items():
                for row, value in rows.items():
                    component_values.setdefault(scope, {}).setdefault(row, {}) \
                        .setdefault(name, []).append(value)
    for scope, rows in component_values.items():
        for row, by_scenario in rows.items():
            for name, values in by_scenario.items():
                report.values.setdefault(scope, {}).setdefault(row, {})[name] = \
                    sum(values) / len(values)
            best_values = by_scenario.get("best", [])
            for ref in report.references:
                ref_values = by_scenario.get(ref, [])
                per_run = [delta(b, r) for b, r in zip(best_values, ref_values)]
                usable = [d for d in per_run if d is not None]
                report.deltas.setdefault(scope, {}).setdefault(row, {})[ref] = \
                    (sum(usable) / len(usable)) if usable else None
    return report


def compare(instance: Instance, result: NegotiationResult, n_instances: int,
            seed: int, progress=None) -> ComparisonReport:
    """Average the best-vs-reference deltas over freshly sampled instances.

    `result` supplies the negotiation configuration (iteration count); each
    sampled instance runs its own negotiation and evaluates both reference
    strategies on the same sampled demand.
    """
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    iterations = len(result.history)
    per_instance = []
    for i in range(n_instances):
        solver = make_cell_solver(instance, sample_od(instance, seed + i))
        run_result = run(instance, iterations=iterations, seed=seed + i,
                         sampled=True, solver=solver)
        scenarios = {
            "best": run_result.best,
            "first": run_result.first,
            "position": evaluate_plan(instance, position_based_plan(instance), solver),
            "priority": evaluate_plan(instance, priority_based_plan(instance), solver),
        }
        per_instance.append(scenarios)
        if progress is not None:
            progress(i, run_result)
    return _assemble(instance, per_instance)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    return repr(round(value, 9))


def report_to_csv(report: ComparisonReport) -> str:
    refs = report.references
    header = ["scope", "component", "best"] + list(refs) + [f"delta_vs_{r}" for r in refs]
    lines = [",".join(header)]
    for scope in report.scope_names():
        rows = report.values.get(scope, {})
        for row in rows:
            record = [scope, row, _fmt(rows[row].get("best"))]
            record += [_fmt(rows[row].get(r)) for r in refs]
            record += [_fmt(report.deltas[scope][row].get(r)) for r in refs]
            lines.append(",".join(record))
    return "\n".join(lines) + "\n"


def report_to_json(report: ComparisonReport) -> str:
    payload = {
        "n_instances": report.n_instances,
        "references": list(report.references),
        "values": report.values,
        "deltas": report.deltas,
    }
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"
