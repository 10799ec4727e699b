"""Maintenance-window allocation (the first subproblem).

Chooses a start week for every intervention so that interruptions meet the
deadline, horizon, concurrency and adjacency rules, minimizing a weighted sum
of priority-weighted completion times, demand-weighted interruption mass and
the negotiation repulsion term. Interruptions are non-preemptive: a link is
closed exactly on the weeks [t, t + duration - 1] of its intervention.

Two reference strategies (by link position and by priority) provide the
baseline plans the paper's comparison tables are built against; they respect
the structural rules but not the deadlines, which are only reported.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import milp
from .model import Instance, Intervention, METRO


class InfeasibleByConstruction(Exception):
    """Some intervention cannot meet its deadline regardless of the schedule."""


class InfeasibleSchedule(Exception):
    """Deadlines, concurrency and adjacency are jointly unsatisfiable."""


@dataclass(frozen=True)
class TabuCoefficients:
    """Per (link, week) repulsion penalties derived from negotiation history.

    `if_interrupted[(l, k)]` is added when the new plan interrupts l in week k
    and the weighted history did so too; `if_free` mirrors the case where the
    history left the cell free. Both are nonnegative; missing cells are zero.
    """

    if_interrupted: dict[tuple[int, int], float] = field(default_factory=dict)
    if_free: dict[tuple[int, int], float] = field(default_factory=dict)

    @staticmethod
    def zero() -> "TabuCoefficients":
        return TabuCoefficients()

    def is_zero(self) -> bool:
        return not any(self.if_interrupted.values()) and not any(self.if_free.values())

    def value(self, interrupted_cells: set[tuple[int, int]], cells) -> float:
        """Evaluate the raw repulsion term for a plan over the given cells."""
        total = 0.0
        for cell in cells:
            if cell in interrupted_cells:
                total += self.if_interrupted.get(cell, 0.0)
            else:
                total += self.if_free.get(cell, 0.0)
        return total


@dataclass(frozen=True)
class PossessionPlan:
    """SP1 output. `x` holds the interrupted (link, week) cells (absent = 0),
    `y` the (intervention, start week) indicators, `t` the start weeks."""

    x: frozenset[tuple[int, int]]
    y: frozenset[tuple[int, int]]
    t: dict[int, int]
    iteration: int = 1
    objective: float | None = None
    components: dict[str, float] = field(default_factory=dict)

    def interrupted(self, link: int, week: int) -> bool:
        return (link, week) in self.x

    def interrupted_links(self, week: int) -> tuple[int, ...]:
        return tuple(sorted(l for (l, k) in self.x if k == week))

    def cut_weeks(self, link: int) -> tuple[int, ...]:
        return tuple(sorted(k for (l, k) in self.x if l == link))

    def completion_week(self) -> int:
        return max((k for (_, k) in self.x), default=0)


def links_adjacent(instance: Instance, a: int, b: int) -> bool:
    """Shared-node adjacency in either orientation (symmetric reading)."""
    la, lb = instance.graph.links[a], instance.graph.links[b]
    return bool({la.tail, la.head} & {lb.tail, lb.head})


# ---------------------------------------------------------------------------
# Model construction
# ---------------------------------------------------------------------------

def build_sp1(instance: Instance, tabu: TabuCoefficients | None = None) -> tuple[milp.MilpModel, dict]:
    """Build the allocation MILP; returns the model and its variable handles.

    The non-preemption rules are imposed through the exact window coupling
    x[l,v] = sum of start indicators whose possession window covers v, which
    has the same feasible set as the pairwise before/after inequalities but a
    much smaller and tighter LP relaxation.
    """
    tabu = tabu or TabuCoefficients.zero()
    for iv in instance.interventions:
        if iv.duration > iv.deadline:
            raise InfeasibleByConstruction(
                f"intervention {iv.id}: duration {iv.duration} > deadline {iv.deadline}")
        if iv.duration > instance.horizon:
            raise InfeasibleByConstruction(
                f"intervention {iv.id}: duration {iv.duration} > horizon {instance.horizon}")

    T = instance.horizon
    weeks = list(instance.weeks())
    metro = [l.id for l in instance.graph.by_mode(METRO)]
    maint = instance.maintenance_links()
    alpha = instance.alpha
    g = instance.utilization

    m = milp.MilpModel(name="sp1")
    x = {(l, k): m.add_variable(milp.BINARY, name=f"x_{l}_{k}") for l in metro for k in weeks}
    y = {(iv.id, k): m.add_variable(milp.BINARY, name=f"y_{iv.id}_{k}")
         for iv in instance.interventions for k in weeks}
    t = {iv.id: m.add_variable(milp.CONTINUOUS, 1.0, float(T), name=f"t_{iv.id}")
         for iv in instance.interventions}

    for iv in instance.interventions:
        m.add_constraint(
            [(t[iv.id], 1.0)] + [(y[iv.id, k], -float(k)) for k in weeks],
            "=", 0.0, name=f"eq2_{iv.id}")
        m.add_constraint([(t[iv.id], 1.0)], "<=", float(T - iv.duration), name=f"eq3_{iv.id}")
        m.add_constraint([(y[iv.id, k], 1.0) for k in weeks], "=", 1.0, name=f"eq10_{iv.id}")

    for l in maint:
        theta = instance.link_deadline(l)
        late = [k for k in weeks if k > theta]
        if late:
            m.add_constraint([(x[l, k], 1.0) for k in late], "=", 0.0, name=f"eq4_{l}")

    for k in weeks:
        m.add_constraint([(x[l, k], 1.0) for l in maint], "<=",
                         float(instance.max_simultaneous), name=f"eq5_{k}")

    for i, a in enumerate(maint):
        for b in maint[i + 1:]:
            if not links_adjacent(instance, a, b):
                for k in weeks:
                    m.add_constraint([(x[a, k], 1.0), (x[b, k], 1.0)], "<=", 1.0,
                                     name=f"eq6_{a}_{b}_{k}")

    # window coupling replacing Eqs (7)-(9): interruption iff a start covers
    for l in maint:
        on_link = instance.interventions_on(l)
        for v in weeks:
            windows = [
                (y[iv.id, k], 1.0)
                for iv in on_link
                for k in range(max(1, v - iv.duration + 1), v + 1)
            ]
            if len(on_link) == 1:
                m.add_constraint([(x[l, v], 1.0)] + [(ref, -c) for ref, c in windows],
                                 "=", 0.0, name=f"window_{l}_{v}")
            else:
                m.add_constraint([(x[l, v], 1.0)] + [(ref, -c) for ref, c in windows],
                                 "<=", 0.0, name=f"window_ub_{l}_{v}")
                for iv in on_link:
                    w = [(y[iv.id, k], 1.0) for k in range(max(1, v - iv.duration + 1), v + 1)]
                    if w:
                        m.add_constraint([(x[l, v], 1.0)] + [(r, -c) for r, c in w],
                                         ">=", 0.0, name=f"window_lb_{l}_{iv.id}_{v}")

    for l in metro:
        if l in maint:
            continue
        for k in weeks:
            m.add_constraint([(x[l, k], 1.0)], "=", 0.0, name=f"eq11_{l}_{k}")

    objective = []
    constant = 0.0
    for iv in instance.interventions:
        objective.append((t[iv.id], alpha[0] * iv.priority))
        constant += alpha[0] * iv.priority * iv.duration
    coeff: dict[int, float] = {}
    for l in maint:
        for k in weeks:
            coeff[x[l, k].index] = alpha[1] * g(k)
    for (l, k), pen in tabu.if_interrupted.items():
        if (l, k) in x:
            coeff[x[l, k].index] = coeff.get(x[l, k].index, 0.0) + alpha[2] * pen
    for (l, k), pen in tabu.if_free.items():
        if (l, k) in x:
            coeff[x[l, k].index] = coeff.get(x[l, k].index, 0.0) - alpha[2] * pen
            constant += alpha[2] * pen
    objective.extend(sorted(coeff.items()))
    m.set_objective(objective, constant=constant)
    return m, {"x": x, "y": y, "t": t}


def solve_sp1(instance: Instance, tabu: TabuCoefficients | None = None,
              iteration: int = 1) -> PossessionPlan:
    model, handles = build_sp1(instance, tabu)
    sol = milp.solve(model)
    if sol.status == milp.INFEASIBLE:
        raise InfeasibleSchedule("no possession plan satisfies deadlines, N and adjacency")
    if sol.status != milp.OPTIMAL:
        raise milp.NumericalFailure(f"unexpected SP1 status {sol.status}")
    x_ones = frozenset(cell for cell, ref in handles["x"].items() if sol.value(ref) > 0.5)
    y_ones = frozenset(cell for cell, ref in handles["y"].items() if sol.value(ref) > 0.5)
    t = {iv_id: int(round(sol.value(ref))) for iv_id, ref in handles["t"].items()}
    plan = PossessionPlan(x=x_ones, y=y_ones, t=t, iteration=iteration,
                          objective=sol.objective,
                          components=plan_components(instance, x_ones, t,
                                                     tabu or TabuCoefficients.zero()))
    violations = check_plan(instance, plan)
    if violations:
        raise milp.NumericalFailure(f"SP1 output failed its own audit: {violations[0]}")
    return plan


def plan_components(instance: Instance, x_ones, t: dict[int, int],
                    tabu: TabuCoefficients) -> dict[str, float]:
    completion = sum(iv.priority * (t[iv.id] + iv.duration) for iv in instance.interventions)
    impact = sum(instance.utilization(k) for (_, k) in x_ones)
    cells = [(l, k) for l in instance.maintenance_links() for k in instance.weeks()]
    tabu_value = tabu.value(set(x_ones), cells)
    alpha = instance.alpha
    return {
        "completion": float(completion),
        "impact": float(impact),
        "tabu": float(tabu_value),
        "total": alpha[0] * completion + alpha[1] * impact + alpha[2] * tabu_value,
    }


def plan_objective(instance: Instance, plan: PossessionPlan,
                   tabu: TabuCoefficients | None = None) -> float:
    """Evaluate the allocation objective for any plan (baselines included)."""
    return plan_components(instance, plan.x, plan.t, tabu or TabuCoefficients.zero())["total"]


# ---------------------------------------------------------------------------
# Independent plan audit
# ---------------------------------------------------------------------------

def check_plan(instance: Instance, plan: PossessionPlan) -> list[str]:
    """Verify every allocation rule literally; each violation names its
    equation. Independent of the MILP path: works from the raw maps only."""
    violations = []
    T = instance.horizon
    weeks = list(instance.weeks())
    maint = set(instance.maintenance_links())

    for iv in instance.interventions:
        starts = [k for (i, k) in plan.y if i == iv.id]
        if len(starts) != 1:
            violations.append(f"eq10: intervention {iv.id} has {len(starts)} start indicators")
            continue
        start = starts[0]
        if plan.t.get(iv.id) != start:
            violations.append(f"eq2: intervention {iv.id} start {plan.t.get(iv.id)} != indicator {start}")
        if start + iv.duration > T:
            violations.append(f"eq3: intervention {iv.id} ends after the horizon")
        link = iv.link
        for v in weeks:
            inside = start <= v <= start + iv.duration - 1
            if inside and not plan.interrupted(link, v):
                violations.append(f"eq9: link {link} open in week {v} during intervention {iv.id}")
            if v < start and plan.interrupted(link, v) and not _covered_by_other(instance, plan, iv, v):
                violations.append(f"eq7: link {link} interrupted in week {v} before intervention {iv.id}")
            if v >= start + iv.duration and plan.interrupted(link, v) \
                    and not _covered_by_other(instance, plan, iv, v):
                violations.append(f"eq8: link {link} interrupted in week {v} after intervention {iv.id}")

    for l in maint:
        theta = instance.link_deadline(l)
        for (link, k) in plan.x:
            if link == l and k > theta:
                violations.append(f"eq4: link {l} interrupted in week {k} past deadline {theta}")

    for k in weeks:
        cut = plan.interrupted_links(k)
        if len(cut) > instance.max_simultaneous:
            violations.append(f"eq5: {len(cut)} simultaneous interruptions in week {k}")
        for i, a in enumerate(cut):
            for b in cut[i + 1:]:
                if not links_adjacent(instance, a, b):
                    violations.append(f"eq6: links {a} and {b} share no node in week {k}")

    for (l, k) in plan.x:
        if l not in maint:
            violations.append(f"eq11: link {l} has no maintenance but is interrupted in week {k}")
    return violations


def _covered_by_other(instance: Instance, plan: PossessionPlan, iv: Intervention, week: int) -> bool:
    """True when another intervention on the same link occupies the week."""
    for other in instance.interventions_on(iv.link):
        if other.id == iv.id:
            continue
        start = plan.t.get(other.id)
        if start is not None and start <= week <= start + other.duration - 1:
            return True
    return False


# ---------------------------------------------------------------------------
# Baseline strategies
# ---------------------------------------------------------------------------

def position_based_plan(instance: Instance) -> PossessionPlan:
    """Greedy in ascending link id: earliest start keeping the horizon,
    concurrency, adjacency and non-preemption rules; deadlines not enforced."""
    order = sorted(instance.interventions, key=lambda iv: (iv.link, iv.id))
    return _greedy_schedule(instance, order)


def priority_based_plan(instance: Instance) -> PossessionPlan:
    """Greedy in descending priority; ties go to the intervention nearest (in
    metro link hops) to the previously scheduled one, then to the lowest link."""
    remaining = list(instance.interventions)
    order = []
    previous: Intervention | None = None
    while remaining:
        best_priority = max(iv.priority for iv in remaining)
        candidates = [iv for iv in remaining if iv.priority == best_priority]
        if previous is None or len(candidates) == 1:
            pick = min(candidates, key=lambda iv: (iv.link, iv.id))
        else:
            pick = min(candidates,
                       key=lambda iv: (_link_distance(instance, previous.link, iv.link),
                                       iv.link, iv.id))
        order.append(pick)
        remaining.remove(pick)
        previous = pick
    return _greedy_schedule(instance, order)


def _greedy_schedule(instance: Instance, order: list[Intervention]) -> PossessionPlan:
    T = instance.horizon
    occupied: dict[int, list[int]] = {k: [] for k in instance.weeks()}  # week -> link ids
    t: dict[int, int] = {}
    for iv in order:
        placed = False
        for start in range(1, T - iv.duration + 1):
            window = range(start, start + iv.duration)
            if all(_week_allows(instance, occupied[w], iv.link) for w in window):
                for w in window:
                    occupied[w].append(iv.link)
                t[iv.id] = start
                placed = True
                break
        if not placed:
            raise InfeasibleSchedule(
                f"baseline cannot place intervention {iv.id} within the horizon")
    x_ones = frozenset(
        (iv.link, w) for iv in order for w in range(t[iv.id], t[iv.id] + iv.duration))
    y_ones = frozenset((iv.id, t[iv.id]) for iv in order)
    plan = PossessionPlan(x=x_ones, y=y_ones, t=t, iteration=0)
    components = plan_components(instance, plan.x, plan.t, TabuCoefficients.zero())
    return PossessionPlan(x=x_ones, y=y_ones, t=t, iteration=0,
                          objective=components["total"], components=components)


def _week_allows(instance: Instance, cut_links: list[int], link: int) -> bool:
    if link in cut_links:
        return False  # the same link cannot host two concurrent possessions
    if len(cut_links) + 1 > instance.max_simultaneous:
        return False
    return all(links_adjacent(instance, link, other) for other in cut_links)


def _link_distance(instance: Instance, a: int, b: int) -> int:
    """Hop distance between two links over the undirected metro graph."""
    la, lb = instance.graph.links[a], instance.graph.links[b]
    targets = {lb.tail, lb.head}
    frontier = deque((n, 0) for n in (la.tail, la.head))
    seen = {la.tail, la.head}
    adjacency: dict[int, set[int]] = {}
    for link in instance.graph.by_mode(METRO):
        adjacency.setdefault(link.tail, set()).add(link.head)
        adjacency.setdefault(link.head, set()).add(link.tail)
    while frontier:
        node, dist = frontier.popleft()
        if node in targets:
            return dist
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, dist + 1))
    return 10 ** 6


# ---------------------------------------------------------------------------
# Plan export
# ---------------------------------------------------------------------------

def plan_to_csv(instance: Instance, plan: PossessionPlan) -> str:
    """CSV with one row per (week, link) possession cell."""
    by_link = {iv.link: iv for iv in instance.interventions}
    rows = ["week,link_id,intervention_id,priority"]
    for (link, week) in sorted(plan.x, key=lambda cell: (cell[1], cell[0])):
        iv = _covering_intervention(instance, plan, link, week) or by_link.get(link)
        rows.append(f"{week},{link},{iv.id if iv else ''},{iv.priority if iv else ''}")
    return "\n".join(rows) + "\n"


def _covering_intervention(instance, plan, link, week):
    for iv in instance.interventions_on(link):
        start = plan.t.get(iv.id)
        if start is not None and start <= week <= start + iv.duration - 1:
            return iv
    return None
