"""Shared builders for small synthetic instances used across the test suite."""

from __future__ import annotations

import numpy as np

from metroworks.model import (
    BUS, METRO, WALK, ACTIVATABLE, WALK_CAPACITY,
    DemandMatrix, Instance, Intervention, Link, MultimodalGraph, Node,
    UtilizationProfile, validate_instance,
)

TABLE_WEIGHTS = {
    "alpha": (1.0, 50.0, 100.0),
    "beta": (0.03, 1.5, 1.0, 1.0),
    "v": (1.0, 1.0, 1.0),
}


def make_line_instance(
    stations=4,
    interventions=(),
    horizon=8,
    N=2,
    J=2,
    S=2,
    q0=100.0,
    metro_capacity=1000.0,
    metro_eta=2.0,
    activatable_pairs=(),     # (a, b, eta, activation_cost)
    walk_pairs=(),            # (a, b, eta)
    bus_pairs=(),             # (a, b, eta, capacity, activation_cost)
    demand=None,              # {period: {(o, d): value}}
    utilization=None,         # {week: rate}; default all ones
    weights=None,
    name="toy",
) -> Instance:
    """A metro line 1-2-...-n with optional extra links and sparse demand."""
    nodes = {i: Node(i, f"S{i}") for i in range(1, stations + 1)}
    links: dict[int, Link] = {}
    nid = 1
    for a in range(1, stations):
        fwd, rev = nid, nid + 1
        links[fwd] = Link(fwd, a, a + 1, METRO, metro_eta, capacity=metro_capacity)
        links[rev] = Link(rev, a + 1, a, METRO, metro_eta, capacity=metro_capacity)
        nid += 2

    for a, b, eta, cost in activatable_pairs:
        fwd, rev = nid, nid + 1
        links[fwd] = Link(fwd, a, b, ACTIVATABLE, eta, activation_cost=cost, reverse=rev)
        links[rev] = Link(rev, b, a, ACTIVATABLE, eta, activation_cost=cost, reverse=fwd)
        nid += 2
    for a, b, eta in walk_pairs:
        fwd, rev = nid, nid + 1
        links[fwd] = Link(fwd, a, b, WALK, eta, capacity=WALK_CAPACITY)
        links[rev] = Link(rev, b, a, WALK, eta, capacity=WALK_CAPACITY)
        nid += 2
    for a, b, eta, cap, cost in bus_pairs:
        fwd, rev = nid, nid + 1
        links[fwd] = Link(fwd, a, b, BUS, eta, capacity=cap, activation_cost=cost)
        links[rev] = Link(rev, b, a, BUS, eta, capacity=cap, activation_cost=cost)
        nid += 2

    graph = MultimodalGraph(nodes=nodes, links=links)
    order = tuple(graph.node_ids())
    index = {n: i for i, n in enumerate(order)}
    demand = demand or {"peak": {}}
    matrices = {}
    for period, entries in demand.items():
        mat = np.zeros((len(order), len(order)), dtype=np.int64)
        for (o, d), value in entries.items():
            mat[index[o], index[d]] = value
        matrices[period] = DemandMatrix(period=period, nodes=order, entries=mat)

    rates = utilization or {k: 1.0 for k in range(1, horizon + 1)}
    w = weights or TABLE_WEIGHTS
    instance = Instance(
        graph=graph,
        interventions=[Intervention(i + 1, link, dur, pri, dl)
                       for i, (link, dur, pri, dl) in enumerate(interventions)],
        horizon=horizon,
        periods=sorted(matrices),
        demand=matrices,
        utilization=UtilizationProfile(dict(rates)),
        max_simultaneous=N,
        max_units=J,
        max_lines=S,
        unit_capacity=q0,
        alpha=w["alpha"],
        beta=w["beta"],
        v=w["v"],
        name=name,
    )
    validate_instance(instance)
    return instance
