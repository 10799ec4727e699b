"""Temporary bus-line design (the third subproblem).

Covers the per-link capacities requested by the mitigation stage with at most
S bus lines over the activatable subgraph. Each line is a simple path chosen
together with its origin, destination and capacity; a link's requirement may
be split across the lines that include it. Lines are dimensioned to the
largest capacity they provide, and the objective penalizes line capacity,
total provided capacity and the surplus of line capacity over what each
member link actually needs.

Only one direction of each line is modeled; the twin rule mirrors membership
and capacities onto the opposite links. Cycles, which the path-balance
equations alone cannot exclude, are cut lazily: whenever extraction finds a
member set that is not a simple path, that exact configuration is forbidden
and the model is re-solved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import milp
from .model import ACTIVATABLE, Instance, MultimodalGraph


#: tie-breaking cost per membership flag; the true objective is piecewise in
#: capacity steps far above this, so it only orders otherwise-equal optima
#: (notably: one line beats several identical copies covering the same links)
_TIE_EPS = 1e-3


class MalformedPath(Exception):
    """A line's links do not form a simple path (solver or model bug)."""


class DesignInfeasible(Exception):
    """Required capacity cannot be covered by any arrangement of S lines."""


@dataclass(frozen=True)
class Line:
    nodes: tuple[int, ...]
    capacity: float

    def stops(self) -> tuple[int, ...]:
        return self.nodes


@dataclass
class ServiceDesign:
    week: int
    period: str
    num_lines: int
    membership: dict[tuple[int, int], int] = field(default_factory=dict)    # (link, s) -> 0/1
    origin_nodes: dict[tuple[int, int], int] = field(default_factory=dict)  # (node, s) -> 0/1
    destination_nodes: dict[tuple[int, int], int] = field(default_factory=dict)
    line_capacity: dict[int, float] = field(default_factory=dict)           # s -> q_s
    provided: dict[tuple[int, int], float] = field(default_factory=dict)    # (link, s) -> eps
    surplus: dict[tuple[int, int], float] = field(default_factory=dict)     # (link, s) -> mu
    objective: float = 0.0
    components: dict[str, float] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not any(self.membership.values())

    def total_surplus(self) -> float:
        return sum(self.surplus.values())

    def total_provided(self) -> float:
        return sum(self.provided.values())

    def total_line_capacity(self) -> float:
        return sum(self.line_capacity.values())


def empty_design(week: int, period: str) -> ServiceDesign:
    return ServiceDesign(week=week, period=period, num_lines=0,
                         components={"line_capacity": 0.0, "provided": 0.0, "surplus": 0.0})


def _pair_of(graph: MultimodalGraph, link_id: int) -> tuple[int, int]:
    link = graph.links[link_id]
    return (min(link_id, link.reverse), max(link_id, link.reverse))


def _candidate_pairs(graph: MultimodalGraph, required: dict[int, float],
                     v: tuple[float, float, float]):
    """Twin pairs a line may use. When v1 <= 2*min(v2, v3) a detour through a
    non-required link always costs at least the line it could save, so the
    required pairs alone support an optimal design; otherwise fall back to
    every activatable pair in the components touching a requirement."""
    req_pairs = sorted({_pair_of(graph, lid) for lid in required})
    if v[0] <= 2.0 * min(v[1], v[2]) + 1e-12:
        return req_pairs
    all_pairs = sorted({_pair_of(graph, l.id) for l in graph.by_mode(ACTIVATABLE)})
    adj: dict[int, set[tuple[int, int]]] = {}
    for p in all_pairs:
        link = graph.links[p[0]]
        adj.setdefault(link.tail, set()).add(p)
        adj.setdefault(link.head, set()).add(p)
    keep: set[tuple[int, int]] = set()
    frontier = [graph.links[p[0]].tail for p in req_pairs] + \
               [graph.links[p[0]].head for p in req_pairs]
    seen_nodes = set(frontier)
    while frontier:
        node = frontier.pop()
        for p in adj.get(node, ()):
            if p not in keep:
                keep.add(p)
                for endpoint in (graph.links[p[0]].tail, graph.links[p[0]].head):
                    if endpoint not in seen_nodes:
                        seen_nodes.add(endpoint)
                        frontier.append(endpoint)
    return sorted(keep)


def build_sp3(graph: MultimodalGraph, required: dict[int, float], num_lines: int,
              q0: float, v: tuple[float, float, float],
              forbidden: list[list[int]] | None = None):
    """Build the design MILP; returns (model, handles) or None when nothing
    is required. `forbidden` holds lazily-banned directed-link sets."""
    required = {lid: cap for lid, cap in required.items() if cap > 0}
    if not required:
        return None
    for lid in required:
        if graph.links[lid].mode != ACTIVATABLE:
            raise ValueError(f"required capacity on non-activatable link {lid}")

    pairs = _candidate_pairs(graph, required, v)
    req_by_pair: dict[tuple[int, int], float] = {}
    for lid, cap in required.items():
        p = _pair_of(graph, lid)
        req_by_pair[p] = max(req_by_pair.get(p, 0.0), float(cap))
    nodes = sorted({graph.links[p[0]].tail for p in pairs} |
                   {graph.links[p[0]].head for p in pairs})
    dlinks = sorted(lid for p in pairs for lid in p)
    big_m = max(max(req_by_pair.values()), q0)
    lines = range(num_lines)

    m = milp.MilpModel(name="sp3")
    omega = {(lid, s): m.add_variable(milp.BINARY, name=f"w_{lid}_{s}")
             for s in lines for lid in dlinks}
    xi = {(n, s): m.add_variable(milp.BINARY, name=f"xi_{n}_{s}")
          for s in lines for n in nodes}
    zeta = {(n, s): m.add_variable(milp.BINARY, name=f"ze_{n}_{s}")
            for s in lines for n in nodes}
    eps = {(p, s): m.add_variable(milp.CONTINUOUS, 0.0, big_m, name=f"eps_{p[0]}_{s}")
           for s in lines for p in pairs}
    mu = {(p, s): m.add_variable(milp.CONTINUOUS, 0.0, big_m, name=f"mu_{p[0]}_{s}")
          for s in lines for p in pairs}
    q = {s: m.add_variable(milp.CONTINUOUS, 0.0, big_m, name=f"q_{s}") for s in lines}

    out_pairs = {n: [] for n in nodes}
    in_pairs = {n: [] for n in nodes}
    for p in pairs:
        for lid in p:
            link = graph.links[lid]
            out_pairs[link.tail].append(lid)
            in_pairs[link.head].append(lid)

    for s in lines:
        for n in nodes:
            coeffs = [(omega[(lid, s)], 1.0) for lid in out_pairs[n]]
            coeffs += [(omega[(lid, s)], -1.0) for lid in in_pairs[n]]
            coeffs += [(xi[(n, s)], -1.0), (zeta[(n, s)], 1.0)]
            m.add_constraint(coeffs, "=", 0.0, name=f"path_{n}_{s}")
            m.add_constraint([(xi[(n, s)], 1.0), (zeta[(n, s)], 1.0)], "<=", 1.0,
                             name=f"endpoints_{n}_{s}")
        m.add_constraint([(xi[(n, s)], 1.0) for n in nodes], "<=", 1.0, name=f"one_origin_{s}")
        m.add_constraint([(zeta[(n, s)], 1.0) for n in nodes], "<=", 1.0, name=f"one_dest_{s}")
        for p in pairs:
            fwd, rev = p
            member = [(omega[(fwd, s)], 1.0), (omega[(rev, s)], 1.0)]
            m.add_constraint(member, "<=", 1.0, name=f"one_dir_{p[0]}_{s}")
            m.add_constraint([(eps[(p, s)], 1.0)] + [(r, -big_m) for r, _ in member],
                             "<=", 0.0, name=f"eps_gate_{p[0]}_{s}")
            m.add_constraint([(eps[(p, s)], 1.0)] + [(r, -q0) for r, _ in member],
                             ">=", 0.0, name=f"eps_min_{p[0]}_{s}")
            m.add_constraint([(q[s], 1.0), (eps[(p, s)], -1.0)], ">=", 0.0,
                             name=f"line_cap_{p[0]}_{s}")
            m.add_constraint(
                [(mu[(p, s)], 1.0), (q[s], -1.0), (eps[(p, s)], 1.0)]
                + [(r, -big_m) for r, _ in member],
                ">=", -big_m, name=f"surplus_lb_{p[0]}_{s}")
            m.add_constraint([(mu[(p, s)], 1.0)] + [(r, -big_m) for r, _ in member],
                             "<=", 0.0, name=f"surplus_gate_{p[0]}_{s}")
        if s + 1 in q:  # interchangeable line slots: order by capacity
            m.add_constraint([(q[s], 1.0), (q[s + 1], -1.0)], ">=", 0.0, name=f"sym_{s}")

    for p, cap in sorted(req_by_pair.items()):
        m.add_constraint([(eps[(p, s)], 1.0) for s in lines], ">=", cap,
                         name=f"cover_{p[0]}")

    # banned pair sets: configurations proven not to be simple paths in any
    # orientation (cycles, branches, disconnected members)
    for bad_index, bad_pairs in enumerate(forbidden or []):
        for s in lines:
            coeffs = [(omega[(lid, s)], 1.0) for p in bad_pairs for lid in p]
            m.add_constraint(coeffs, "<=", float(len(bad_pairs) - 1),
                             name=f"nocycle_{bad_index}_{s}")

    objective = [(q[s], v[0]) for s in lines]
    objective += [(eps[key], 2.0 * v[1]) for key in sorted(eps)]
    objective += [(mu[key], 2.0 * v[2]) for key in sorted(mu)]
    objective += [(ref, _TIE_EPS) for _, ref in sorted(omega.items())]
    m.set_objective(objective)
    handles = {"omega": omega, "xi": xi, "zeta": zeta, "eps": eps, "mu": mu, "q": q,
               "pairs": pairs, "nodes": nodes, "dlinks": dlinks}
    return m, handles


def solve_sp3(instance: Instance, required: dict[int, float], week: int,
              period: str) -> ServiceDesign:
    """Solve the design problem with lazy cycle elimination."""
    graph = instance.graph
    forbidden: list[list[tuple[int, int]]] = []
    for _ in range(40):
        built = build_sp3(graph, required, instance.max_lines, instance.unit_capacity,
                          instance.v, forbidden)
        if built is None:
            return empty_design(week, period)
        model, hd = built
        sol = milp.solve(model)
        if sol.status == milp.INFEASIBLE:
            raise DesignInfeasible(
                f"cell ({week}, {period}): required capacities not coverable by "
                f"{instance.max_lines} lines")
        if sol.status != milp.OPTIMAL:
            raise milp.NumericalFailure(f"SP3 cell ({week}, {period}) status {sol.status}")
        design = _extract(graph, instance, sol, hd, week, period)
        try:
            extract_lines(design, graph)
            return design
        except MalformedPath as bad:
            forbidden.append(sorted({_pair_of(graph, lid) for lid in bad.args[1]}))
    raise MalformedPath(f"cycle elimination did not converge for cell ({week}, {period})", [])


def _extract(graph, instance, sol, hd, week, period) -> ServiceDesign:
    S = instance.max_lines
    design = ServiceDesign(week=week, period=period, num_lines=S)
    for (lid, s), ref in hd["omega"].items():
        val = int(round(sol.value(ref)))
        # OR-merge so a zero twin never erases its partner's mirror
        design.membership[(lid, s)] = max(design.membership.get((lid, s), 0), val)
        rev = graph.links[lid].reverse
        design.membership[(rev, s)] = max(design.membership.get((rev, s), 0), val)
    for (n, s), ref in hd["xi"].items():
        design.origin_nodes[(n, s)] = int(round(sol.value(ref)))
    for (n, s), ref in hd["zeta"].items():
        design.destination_nodes[(n, s)] = int(round(sol.value(ref)))
    for s in range(S):
        design.line_capacity[s] = round(sol.value(hd["q"][s]), 9)
    for (p, s), ref in hd["eps"].items():
        value = round(sol.value(ref), 9)
        for lid in p:
            design.provided[(lid, s)] = value
    for (p, s), ref in hd["mu"].items():
        value = round(sol.value(ref), 9)
        for lid in p:
            design.surplus[(lid, s)] = value
    design.components = {
        "line_capacity": design.total_line_capacity(),
        "provided": design.total_provided(),
        "surplus": design.total_surplus(),
    }
    # report the objective in model terms, without the tie-breaking epsilon
    design.objective = (instance.v[0] * design.components["line_capacity"]
                        + instance.v[1] * design.components["provided"]
                        + instance.v[2] * design.components["surplus"])
    return design


def extract_lines(design: ServiceDesign, graph: MultimodalGraph) -> list[Line]:
    """Walk each line's membership from its origin; mirrored twins implied.

    Raises MalformedPath (carrying the offending directed-link set) when the
    member links of some line do not form a single simple path.
    """
    lines = []
    for s in range(design.num_lines):
        members = sorted(lid for (lid, ls), val in design.membership.items()
                         if ls == s and val)
        if not members:
            continue
        origins = [n for (n, ls), val in design.origin_nodes.items() if ls == s and val]
        if len(origins) != 1:
            raise MalformedPath(f"line {s}: {len(origins)} origins", members)
        dests = [n for (n, ls), val in design.destination_nodes.items() if ls == s and val]
        if len(dests) != 1:
            raise MalformedPath(f"line {s}: {len(dests)} destinations", members)
        member_set = set(members)
        sequence = [origins[0]]
        seen = {origins[0]}
        used = set()
        node = origins[0]
        while node != dests[0]:
            steps = [l for l in graph.forward_star(node)
                     if l.id in member_set and l.id not in used and l.head not in seen]
            if len(steps) != 1:
                raise MalformedPath(f"line {s}: no unique continuation at node {node}", members)
            link = steps[0]
            used.add(link.id)
            used.add(link.reverse)
            node = link.head
            seen.add(node)
            sequence.append(node)
        if used != member_set:
            raise MalformedPath(f"line {s}: disconnected members remain", members)
        lines.append(Line(nodes=tuple(sequence), capacity=design.line_capacity[s]))
    return lines
