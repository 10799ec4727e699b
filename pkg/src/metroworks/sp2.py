"""Mitigation strategy for one (week, period) cell (the second subproblem).

Routes the period's o/d demand over the whole multimodal graph while the
week's possessed metro links carry zero flow. Capacity can be bought in q0
blocks: activating a dormant link opens it (in both directions, per the twin
rule) and existing bus links can be upgraded asymmetrically. Whatever cannot
be routed economically is left as unmet demand at a per-passenger penalty.

Flows are modeled with one commodity per origin, an exact compaction of the
per-(o,d) formulation; `conservation_audit` reconstructs disaggregated path
flows after every solve and re-checks the node balances per o/d pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import milp
from .model import ACTIVATABLE, BUS, METRO, DemandMatrix, Instance
from .sp1 import PossessionPlan


@dataclass
class MitigationSolution:
    week: int
    period: str
    flows: dict[int, float]                      # f per link
    origin_flows: dict[tuple[int, int], float]   # h per (link, origin commodity)
    activations: dict[int, int]                  # w per activatable link
    units: dict[int, int]                        # total z units per link (S and B)
    unmet: dict[tuple[int, int], float]          # phi per (o, d)
    capacities: dict[int, float]                 # q per link
    objective: float
    components: dict[str, float]
    required: dict[int, float]                   # activated links -> capacity for SP3
    nodes_solved: int = 0

    def z_flags(self, max_units: int) -> dict[tuple[int, int], int]:
        """Per-unit activation indicators z[(link, j)], filled from unit 1 up."""
        flags = {}
        for link, count in sorted(self.units.items()):
            for j in range(1, max_units + 1):
                flags[(link, j)] = 1 if j <= count else 0
        return flags

    def total_unmet(self) -> float:
        return sum(self.unmet.values())


def _twin_pairs(instance: Instance) -> list[tuple[int, int]]:
    """Activatable twin pairs as (low id, high id), ascending."""
    pairs = set()
    for link in instance.graph.by_mode(ACTIVATABLE):
        pairs.add((min(link.id, link.reverse), max(link.id, link.reverse)))
    return sorted(pairs)


def build_sp2(instance: Instance, plan: PossessionPlan, week: int, period: str,
              demand: DemandMatrix) -> tuple[milp.MilpModel, dict]:
    """Build the mitigation MILP for one cell; returns (model, handles).

    Interrupted links are handled as variable fixes (flow bounds at zero), and
    the activation gate uses the tight big-M J*q0 expressed as u <= J*w.
    """
    graph = instance.graph
    beta = instance.beta
    q0 = instance.unit_capacity
    J = instance.max_units
    links = [graph.links[i] for i in graph.link_ids()]
    # on valid plans x is zero off the maintenance set, so ranging over all
    # metro links is equivalent to ranging over it
    cut = {l.id for l in graph.by_mode(METRO) if plan.interrupted(l.id, week)}

    origins = sorted({o for o, _, _ in demand.pairs()})
    out_demand = {o: {} for o in origins}
    for o, d, value in demand.pairs():
        out_demand[o][d] = value

    m = milp.MilpModel(name=f"sp2_w{week}_{period}")
    # discrete variables first: branch-and-bound picks the lowest-index
    # fractional variable, and activation decisions prune far better than
    # unit counts, which in turn beat anything downstream
    pairs = _twin_pairs(instance)
    w_pair = {p: m.add_variable(milp.BINARY, name=f"w_{p[0]}_{p[1]}") for p in pairs}
    u_pair = {p: m.add_variable(milp.INTEGER, 0, J, name=f"u_{p[0]}_{p[1]}") for p in pairs}
    bus_links = [l for l in links if l.mode == BUS]
    u_bus = {l.id: m.add_variable(milp.INTEGER, 0, J, name=f"ub_{l.id}") for l in bus_links}

    # link flows f are not modeled: they are the per-origin sums, substituted
    # into the capacity rows and recovered after the solve
    h: dict[tuple[int, int], milp.VarRef] = {}
    for link in links:
        blocked = link.id in cut
        for o in origins:
            h[(link.id, o)] = m.add_variable(
                milp.CONTINUOUS, 0.0, 0.0 if blocked else np.inf, name=f"h_{link.id}_{o}")

    phi: dict[tuple[int, int], milp.VarRef] = {}
    for o in origins:
        for d, value in sorted(out_demand[o].items()):
            ref = m.add_variable(milp.CONTINUOUS, 0.0, float(value), name=f"phi_{o}_{d}")
            phi[(o, d)] = ref
            m.start_hints[ref.index] = float(value)  # all-unmet is a feasible start

    # flow conservation per (node, origin commodity)
    for o in origins:
        dests = out_demand[o]
        for n in graph.node_ids():
            coeffs = [(h[(l.id, o)], 1.0) for l in graph.forward_star(n)]
            coeffs += [(h[(l.id, o)], -1.0) for l in graph.backward_star(n)]
            if n == o:
                coeffs += [(phi[(o, d)], 1.0) for d in sorted(dests)]
                rhs = float(sum(dests.values()))
            elif n in dests:
                coeffs.append((phi[(o, n)], -1.0))
                rhs = -float(dests[n])
            else:
                rhs = 0.0
            m.add_constraint(coeffs, "=", rhs, name=f"bal_{n}_{o}")

    pair_of_link = {}
    for p in pairs:
        pair_of_link[p[0]] = p
        pair_of_link[p[1]] = p
    total_demand = float(sum(v for _, _, v in demand.pairs()))
    for link in links:
        if link.id in cut:
            continue  # flow already fixed to zero through the h bounds
        flow = [(h[(link.id, o)], 1.0) for o in origins]
        if link.mode == ACTIVATABLE:
            m.add_constraint(flow + [(u_pair[pair_of_link[link.id]], -q0)],
                             "<=", 0.0, name=f"cap_s_{link.id}")
        elif link.mode == BUS:
            m.add_constraint(flow + [(u_bus[link.id], -q0)],
                             "<=", float(link.capacity), name=f"cap_b_{link.id}")
        elif link.capacity < total_demand:
            # fixed-capacity links whose limit no flow pattern can reach
            # (walk links, generous metro) carry no row at all
            m.add_constraint(flow, "<=", float(link.capacity), name=f"cap_{link.id}")
    for p in pairs:
        m.add_constraint([(u_pair[p], 1.0), (w_pair[p], -float(J))], "<=", 0.0,
                         name=f"gate_{p[0]}_{p[1]}")

    objective: list[tuple[milp.VarRef, float]] = []
    for (lid, o), ref in h.items():
        objective.append((ref, beta[0] * graph.links[lid].eta))
    for p in pairs:
        cost = graph.links[p[0]].activation_cost + graph.links[p[1]].activation_cost
        objective.append((u_pair[p], beta[1] * cost))
        objective.append((w_pair[p], beta[2] * 2.0))  # both directions activate
    for l in bus_links:
        objective.append((u_bus[l.id], beta[1] * l.activation_cost))
    for key in sorted(phi):
        objective.append((phi[key], beta[3]))
    m.set_objective(objective)

    handles = {"h": h, "phi": phi, "u_pair": u_pair, "w_pair": w_pair,
               "u_bus": u_bus, "pairs": pairs, "origins": origins, "cut": cut}
    return m, handles


def solve_sp2(instance: Instance, plan: PossessionPlan, week: int, period: str,
              demand: DemandMatrix) -> MitigationSolution:
    model, hd = build_sp2(instance, plan, week, period, demand)
    sol = milp.solve(model)
    if sol.status != milp.OPTIMAL:
        raise milp.NumericalFailure(f"SP2 cell ({week}, {period}) status {sol.status}")
    solution = _extract(instance, sol, hd, week, period)
    residual = conservation_audit(instance, solution, demand)
    if residual > milp.FEAS_TOL:
        raise milp.NumericalFailure(
            f"SP2 cell ({week}, {period}) failed the conservation audit: {residual}")
    return solution


def _extract(instance: Instance, sol: milp.MilpSolution, hd: dict,
             week: int, period: str) -> MitigationSolution:
    graph = instance.graph
    q0 = instance.unit_capacity
    beta = instance.beta
    origin_flows = {
        key: v for key, ref in hd["h"].items() if (v := round(sol.value(ref), 9)) > 0}
    flows = {lid: 0.0 for lid in graph.link_ids()}
    for (lid, _), value in origin_flows.items():
        flows[lid] = round(flows[lid] + value, 9)
    unmet = {key: round(sol.value(ref), 9) for key, ref in hd["phi"].items()
             if sol.value(ref) > milp.FEAS_TOL}
    units: dict[int, int] = {}
    activations: dict[int, int] = {}
    required: dict[int, float] = {}
    for p in hd["pairs"]:
        count = int(round(sol.value(hd["u_pair"][p])))
        active = int(round(sol.value(hd["w_pair"][p])))
        for lid in p:
            activations[lid] = active
            if count:
                units[lid] = count
            if active and count:
                required[lid] = q0 * count
    for lid, ref in hd["u_bus"].items():
        count = int(round(sol.value(ref)))
        if count:
            units[lid] = count

    capacities: dict[int, float] = {}
    for lid in graph.link_ids():
        link = graph.links[lid]
        if link.mode == ACTIVATABLE:
            capacities[lid] = q0 * units.get(lid, 0)
        elif link.mode == BUS:
            capacities[lid] = link.capacity + q0 * units.get(lid, 0)
        else:
            capacities[lid] = link.capacity

    flow_cost = sum(graph.links[lid].eta * fv for lid, fv in flows.items())
    unit_cost = sum(graph.links[lid].activation_cost * n for lid, n in units.items())
    fixed_cost = float(sum(activations.values()))
    unmet_total = sum(unmet.values())
    components = {
        "flow_cost": beta[0] * flow_cost,
        "unit_cost": beta[1] * unit_cost,
        "activation_cost": beta[2] * fixed_cost,
        "unmet_cost": beta[3] * unmet_total,
    }
    return MitigationSolution(
        week=week, period=period, flows=flows, origin_flows=origin_flows,
        activations=activations, units=units, unmet=unmet, capacities=capacities,
        objective=sol.objective, components=components, required=required,
        nodes_solved=sol.nodes)


def reference_size(instance: Instance, demand: DemandMatrix) -> dict[str, int]:
    """Size of the reference per-(o,d) formulation for one cell.

    The solved model compacts commodities by origin, which is equivalent;
    this reports the footprint of the uncompacted formulation (path flows per
    o/d pair, per-unit activation flags, a capacity variable per adjustable
    link) with nonnegativity rows counted, the convention under which the
    published instance sizes were evidently measured.
    """
    graph = instance.graph
    n_links = len(graph.links)
    n_nodes = len(graph.nodes)
    pairs = sum(1 for _ in demand.pairs())
    n_s = len(graph.by_mode(ACTIVATABLE))
    n_b = len(graph.by_mode(BUS))
    J = instance.max_units
    h = n_links * pairs
    variables = h + n_links + (n_s + n_b) * J + n_s + pairs + n_links
    constraints = (
        n_nodes * pairs      # flow conservation per node and pair
        + n_links            # link-flow definition
        + n_links            # capacity rows
        + 2 * n_s            # activated capacity definition and its gate
        + n_b                # upgraded bus capacity definition
        + (n_links - n_s - n_b)  # nominal capacity assignment
        + n_s                # twin symmetry
        + len(instance.maintenance_links())  # interrupted-flow rows
        + h + n_links + pairs                # nonnegativity rows
    )
    return {"variables": variables, "constraints": constraints}


def unmet_fraction(solution: MitigationSolution, demand: DemandMatrix) -> float:
    """Sum of phi/d over the cell's positive o/d pairs (a sum, not a mean)."""
    total = 0.0
    for o, d, value in demand.pairs():
        total += solution.unmet.get((o, d), 0.0) / value
    return total


# ---------------------------------------------------------------------------
# Disaggregated conservation audit
# ---------------------------------------------------------------------------

def disaggregate(instance: Instance, solution: MitigationSolution,
                 demand: DemandMatrix) -> dict[tuple[int, int], dict[int, float]]:
    """Decompose each origin commodity into per-(o,d) link flows.

    Served demand is routed along positive-flow links by repeated path
    tracing; generalized costs are strictly positive so optimal commodity
    flows are acyclic and the decomposition is exact.
    """
    graph = instance.graph
    out_demand: dict[int, dict[int, float]] = {}
    for o, d, value in demand.pairs():
        out_demand.setdefault(o, {})[d] = value - solution.unmet.get((o, d), 0.0)

    per_pair: dict[tuple[int, int], dict[int, float]] = {}
    for o in sorted(out_demand):
        residual = {lid: fv for (lid, org), fv in solution.origin_flows.items() if org == o}
        for d in sorted(out_demand[o]):
            remaining = out_demand[o][d]
            flows: dict[int, float] = {}
            while remaining > 1e-9:
                path = _trace_path(graph, residual, o, d)
                if path is None:
                    raise milp.NumericalFailure(
                        f"cannot decompose commodity {o}->{d}: no residual path")
                amount = min(remaining, min(residual[lid] for lid in path))
                for lid in path:
                    residual[lid] -= amount
                    if residual[lid] < 1e-9:
                        residual.pop(lid)
                    flows[lid] = flows.get(lid, 0.0) + amount
                remaining -= amount
            if flows:
                per_pair[(o, d)] = flows
        leftover = sum(residual.values())
        if leftover > 1e-6:
            raise milp.NumericalFailure(
                f"origin {o}: {leftover} units of flow not attributable to any pair")
    return per_pair


def _trace_path(graph, residual: dict[int, float], origin: int, dest: int):
    """Shortest positive-residual path by link count (deterministic BFS)."""
    parents: dict[int, int] = {}
    frontier = [origin]
    seen = {origin}
    while frontier:
        nxt = []
        for n in frontier:
            for link in graph.forward_star(n):
                if residual.get(link.id, 0.0) > 1e-9 and link.head not in seen:
                    seen.add(link.head)
                    parents[link.head] = link.id
                    if link.head == dest:
                        path = []
                        node = dest
                        while node != origin:
                            lid = parents[node]
                            path.append(lid)
                            node = graph.links[lid].tail
                        return list(reversed(path))
                    nxt.append(link.head)
        frontier = nxt
    return None


def conservation_audit(instance: Instance, solution: MitigationSolution,
                       demand: DemandMatrix) -> float:
    """Max balance residual over (node, o/d pair) of the reconstructed flows,
    plus consistency of aggregate link flows; 0 means perfectly conserved."""
    graph = instance.graph
    per_pair = disaggregate(instance, solution, demand)
    worst = 0.0
    for o, d, value in demand.pairs():
        flows = per_pair.get((o, d), {})
        served = value - solution.unmet.get((o, d), 0.0)
        for n in graph.node_ids():
            outflow = sum(flows.get(l.id, 0.0) for l in graph.forward_star(n))
            inflow = sum(flows.get(l.id, 0.0) for l in graph.backward_star(n))
            if n == o:
                target = served
            elif n == d:
                target = -served
            else:
                target = 0.0
            worst = max(worst, abs(outflow - inflow - target))
    totals: dict[int, float] = {}
    for flows in per_pair.values():
        for lid, fv in flows.items():
            totals[lid] = totals.get(lid, 0.0) + fv
    for lid, fv in solution.flows.items():
        worst = max(worst, abs(totals.get(lid, 0.0) - fv))
        cap = solution.capacities[lid]
        if fv > cap + milp.FEAS_TOL:
            worst = max(worst, fv - cap)
    return worst
