"""Weighted tabu-search negotiation across the three subproblems.

Each refinement iteration books possessions once for the whole horizon, then
mitigates and designs services for every (week, period) cell, and finally
feeds three performance indicators back into the next booking round: the
summed unmet-demand ratio, the activation cost spent on temporary links, and
the capacity surplus of the designed lines. History plans are weighted by
those indicators (recent iterations weigh more) and enter the next
allocation objective as a repulsion term, steering the search away from
poorly-performing possession patterns.

Demand is sampled once per run and held fixed across iterations; randomness
lives across problem instances, not refinement rounds. Cells repeat heavily
between iterations (same interruption pattern, same week class), so solved
cells are memoized; the per-iteration solve counters still report the full
1 + 2*|periods|*|weeks| logical solves.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .model import ACTIVATABLE, DemandMatrix, Instance, effective_demand, sample_od
from .sp1 import PossessionPlan, TabuCoefficients, solve_sp1
from .sp2 import MitigationSolution, solve_sp2, unmet_fraction
from .sp3 import ServiceDesign, solve_sp3


@dataclass
class CellResult:
    week: int
    period: str
    mitigation: MitigationSolution
    design: ServiceDesign


@dataclass
class IterationRecord:
    r: int
    plan: PossessionPlan
    cells: dict[tuple[int, str], CellResult] = field(default_factory=dict)
    chi: float = 0.0                  # summed unmet-demand ratio
    activation_cost: float = 0.0      # total temporary-link activation spend
    surplus: float = 0.0              # total designed-line capacity surplus
    sp1_objective: float = 0.0
    sp2_aggregate: float = 0.0
    solve_counts: dict[str, int] = field(default_factory=dict)

    def kpi_sum(self) -> float:
        return self.chi + self.activation_cost + self.surplus


@dataclass
class NegotiationResult:
    history: list[IterationRecord]
    best_index: int
    demands: dict[str, DemandMatrix]
    sampled: bool
    seed: int | None

    @property
    def best(self) -> IterationRecord:
        return self.history[self.best_index]

    @property
    def first(self) -> IterationRecord:
        return self.history[0]


def _zero_record(instance: Instance) -> IterationRecord:
    plan = PossessionPlan(x=frozenset(), y=frozenset(), t={}, iteration=0)
    return IterationRecord(r=0, plan=plan)


def gamma(history: list[IterationRecord], r: int) -> dict[int, float]:
    """History weights: gamma^p = (chi + c + mu) / (r - p), gamma^0 = 0.

    `history` holds record p at index p, index 0 being the all-zero
    initialization round.
    """
    if r < 1:
        raise ValueError("gamma is defined for r >= 1")
    weights = {0: 0.0}
    for p in range(1, r):
        weights[p] = history[p].kpi_sum() / (r - p)
    return weights


def tabu_coefficients(instance: Instance, history: list[IterationRecord],
                      r: int) -> TabuCoefficients:
    """Per-cell repulsion penalties from all previous possession patterns.

    Matching a history plan on a cell (both interrupted, or both free) adds
    that plan's gamma weight; the two branches are stored separately so both
    stay nonnegative.
    """
    weights = gamma(history, r)
    cells = [(l, k) for l in instance.maintenance_links() for k in instance.weeks()]
    if_interrupted: dict[tuple[int, int], float] = {}
    if_free: dict[tuple[int, int], float] = {}
    for p, weight in weights.items():
        if weight == 0.0:
            continue
        plan = history[p].plan
        for cell in cells:
            if cell in plan.x:
                if_interrupted[cell] = if_interrupted.get(cell, 0.0) + weight
            else:
                if_free[cell] = if_free.get(cell, 0.0) + weight
    return TabuCoefficients(if_interrupted=if_interrupted, if_free=if_free)


def _activation_kpi(instance: Instance, mitigation: MitigationSolution,
                    include_bus: bool = False) -> float:
    """Activation cost Sum c*z over the temporary links (bus upgrades excluded
    by default, as in the feedback-term definition)."""
    total = 0.0
    for lid, units in mitigation.units.items():
        link = instance.graph.links[lid]
        if link.mode == ACTIVATABLE or (include_bus and link.mode == "bus"):
            total += link.activation_cost * units
    return total


class _CellSolver:
    """Memoizing per-cell SP2+SP3 solver for one fixed demand set."""

    def __init__(self, instance: Instance, demands: dict[str, DemandMatrix]):
        self.instance = instance
        self.demands = demands
        self.effective: dict[tuple[int, str], DemandMatrix] = {}
        for b in instance.periods:
            for k in instance.weeks():
                self.effective[(k, b)] = effective_demand(
                    demands[b], instance.utilization, k)
        self.cache: dict = {}
        self.physical_solves = 0

    def solve_cell(self, plan: PossessionPlan, week: int, period: str) -> CellResult:
        instance = self.instance
        cut = frozenset(l for l in instance.maintenance_links()
                        if plan.interrupted(l, week))
        key = (cut, period, instance.utilization(week))
        hit = self.cache.get(key)
        if hit is None:
            demand = self.effective[(week, period)]
            mitigation = solve_sp2(instance, plan, week, period, demand)
            design = solve_sp3(instance, mitigation.required, week, period)
            self.cache[key] = (mitigation, design)
            self.physical_solves += 1
            hit = (mitigation, design)
        mitigation = dataclasses.replace(hit[0], week=week, period=period)
        design = dataclasses.replace(hit[1], week=week, period=period)
        return CellResult(week=week, period=period, mitigation=mitigation, design=design)


def evaluate_plan(instance: Instance, plan: PossessionPlan, solver: _CellSolver,
                  r: int = 0, sp1_objective: float | None = None) -> IterationRecord:
    """Run SP2 and SP3 for every cell of a fixed possession plan."""
    record = IterationRecord(r=r, plan=plan,
                             sp1_objective=plan.objective if sp1_objective is None
                             else sp1_objective)
    weeks = list(instance.weeks())
    for k in weeks:
        for b in instance.periods:
            cell = solver.solve_cell(plan, k, b)
            record.cells[(k, b)] = cell
            record.chi += unmet_fraction(cell.mitigation, solver.effective[(k, b)])
            record.activation_cost += _activation_kpi(instance, cell.mitigation)
            record.surplus += cell.design.total_surplus()
            record.sp2_aggregate += cell.mitigation.objective
    record.solve_counts = {
        "sp1": 1,
        "sp2": len(weeks) * len(instance.periods),
        "sp3": len(weeks) * len(instance.periods),
    }
    return record


def select_best(history: list[IterationRecord]) -> int:
    """Index of the iteration minimizing the aggregate mitigation objective;
    ties go to the earliest iteration."""
    if not history:
        raise ValueError("empty history")
    best = 0
    for i, record in enumerate(history):
        if record.sp2_aggregate < history[best].sp2_aggregate - 1e-12:
            best = i
    return best


def run(instance: Instance, iterations: int | None = None, seed: int | None = None,
        sampled: bool = True, log_path: str | Path | None = None,
        include_timings: bool = False, progress=None,
        solver: "_CellSolver | None" = None) -> NegotiationResult:
    """Execute the full negotiation loop and pick the best iteration.

    `sampled=False` runs on the nominal matrices (no randomness); otherwise
    one o/d sample is drawn up front with `seed`. The run log (JSON lines,
    one record per iteration) is byte-stable unless `include_timings` is set.
    A pre-built cell solver may be passed in to share its memo with later
    baseline evaluations on the same demand.
    """
    R = iterations if iterations is not None else instance.iterations
    if R < 1:
        raise ValueError("at least one iteration is required")
    seed = instance.seed if seed is None else seed
    if solver is None:
        demands = sample_od(instance, seed) if sampled else dict(instance.demand)
        solver = _CellSolver(instance, demands)
    else:
        demands = solver.demands

    internal: list[IterationRecord] = [_zero_record(instance)]
    log_lines: list[str] = []
    for r in range(1, R + 1):
        started = time.monotonic()
        tabu = tabu_coefficients(instance, internal, r)
        plan = solve_sp1(instance, tabu, iteration=r)
        record = evaluate_plan(instance, plan, solver, r=r)
        internal.append(record)
        entry = {
            "r": r,
            "sp1_objective": round(plan.objective, 9),
            "chi": round(record.chi, 9),
            "activation_cost": round(record.activation_cost, 9),
            "surplus": round(record.surplus, 9),
            "sp2_aggregate": round(record.sp2_aggregate, 9),
        }
        if include_timings:
            entry["wall_time_s"] = round(time.monotonic() - started, 3)
        log_lines.append(json.dumps(entry, sort_keys=True))
        if progress is not None:
            progress(record)

    history = internal[1:]
    best = select_best(history)
    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return NegotiationResult(history=history, best_index=best, demands=demands,
                             sampled=sampled, seed=seed)


def baseline_records(instance: Instance, solver: _CellSolver,
                     plans: dict[str, PossessionPlan]) -> dict[str, IterationRecord]:
    """Evaluate fixed reference plans on the same demand set."""
    return {name: evaluate_plan(instance, plan, solver)
            for name, plan in sorted(plans.items())}


def history_to_dict(result: NegotiationResult) -> dict:
    """Resumable summary: plans and indicators, without per-cell solutions."""
    return {
        "sampled": result.sampled,
        "seed": result.seed,
        "best_index": result.best_index,
        "iterations": [
            {
                "r": rec.r,
                "x": sorted(list(cell) for cell in rec.plan.x),
                "y": sorted(list(cell) for cell in rec.plan.y),
                "t": {str(k): v for k, v in sorted(rec.plan.t.items())},
                "chi": rec.chi,
                "activation_cost": rec.activation_cost,
                "surplus": rec.surplus,
                "sp1_objective": rec.sp1_objective,
                "sp2_aggregate": rec.sp2_aggregate,
            }
            for rec in result.history
        ],
    }


def resume(instance: Instance, dump: dict, iterations: int,
           log_path: str | Path | None = None) -> NegotiationResult:
    """Continue a dumped run up to `iterations` total refinement rounds.

    Per-cell solutions of the dumped prefix are re-derived lazily: only the
    plans and indicators are needed to rebuild the repulsion history.
    """
    seed = dump.get("seed")
    sampled = dump.get("sampled", True)
    demands = sample_od(instance, seed) if sampled else dict(instance.demand)
    solver = _CellSolver(instance, demands)
    internal = [_zero_record(instance)]
    for raw in dump["iterations"]:
        plan = PossessionPlan(
            x=frozenset(tuple(c) for c in raw["x"]),
            y=frozenset(tuple(c) for c in raw["y"]),
            t={int(k): v for k, v in raw["t"].items()},
            iteration=raw["r"], objective=raw["sp1_objective"])
        internal.append(IterationRecord(
            r=raw["r"], plan=plan, chi=raw["chi"],
            activation_cost=raw["activation_cost"], surplus=raw["surplus"],
            sp1_objective=raw["sp1_objective"], sp2_aggregate=raw["sp2_aggregate"],
            solve_counts={"sp1": 1,
                          "sp2": instance.horizon * len(instance.periods),
                          "sp3": instance.horizon * len(instance.periods)}))
    log_lines = []
    for r in range(len(internal), iterations + 1):
        tabu = tabu_coefficients(instance, internal, r)
        plan = solve_sp1(instance, tabu, iteration=r)
        record = evaluate_plan(instance, plan, solver, r=r)
        internal.append(record)
        log_lines.append(json.dumps({
            "r": r, "sp1_objective": round(plan.objective, 9),
            "chi": round(record.chi, 9),
            "activation_cost": round(record.activation_cost, 9),
            "surplus": round(record.surplus, 9),
            "sp2_aggregate": round(record.sp2_aggregate, 9)}, sort_keys=True))
    history = internal[1:]
    best = select_best(history)
    if history[best].cells == {} and history:
        # the best round lives in the resumed prefix: rebuild its cells
        history[best] = evaluate_plan(instance, history[best].plan, solver,
                                      r=history[best].r,
                                      sp1_objective=history[best].sp1_objective)
    if log_path is not None:
        Path(log_path).write_text("\n".join(log_lines) + "\n", encoding="utf-8")
    return NegotiationResult(history=history, best_index=best, demands=demands,
                             sampled=sampled, seed=seed)


def make_cell_solver(instance: Instance, demands: dict[str, DemandMatrix]) -> _CellSolver:
    return _CellSolver(instance, demands)
