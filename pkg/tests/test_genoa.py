"""The shipped Genoa instance: published structure, estimated behavior."""

from __future__ import annotations

from pathlib import Path

import pytest

from metroworks.genoa import (
    INTERVENTIONS, activatable_link_id, make_genoa_instance, metro_link_id,
)
from metroworks.model import (
    ACTIVATABLE, BUS, METRO, WALK, effective_demand, load_instance,
)
from metroworks.sp1 import (
    PossessionPlan, position_based_plan, priority_based_plan, solve_sp1,
)
from metroworks.sp2 import reference_size, solve_sp2, unmet_fraction

DATA = Path(__file__).resolve().parents[1] / "src" / "metroworks" / "data" / "genoa.json"


@pytest.fixture(scope="module")
def genoa():
    return make_genoa_instance()


def test_published_graph_sizes(genoa):
    graph = genoa.graph
    assert len(graph.nodes) == 21
    assert len(graph.links) == 122
    assert len(graph.by_mode(METRO)) == 14
    assert len(graph.by_mode(BUS)) == 16      # alternative-service links
    assert len(graph.by_mode(WALK)) == 28
    assert len(graph.by_mode(ACTIVATABLE)) == 64


def test_published_interventions(genoa):
    table = [(iv.link, iv.duration, iv.priority, iv.deadline) for iv in genoa.interventions]
    assert table == INTERVENTIONS
    assert genoa.maintenance_links() == [1, 2, 3, 4, 5, 7, 9, 12, 13]


def test_demand_totals_match_appendix(genoa):
    assert genoa.demand["morning"].total() == 17_116
    assert genoa.demand["evening"].total() == 21_600
    assert genoa.demand["offpeak"].total() == 5_777


def test_utilization_shape(genoa):
    g = genoa.utilization
    for k in range(1, 11):
        matching = k + 10
        if matching != 14:
            assert g(k) == pytest.approx(2.0 * g(matching))
    peak = max(genoa.weeks(), key=g)
    assert peak == 14


def test_effective_demand_shape(genoa):
    nominal = genoa.demand["morning"]
    high = effective_demand(nominal, genoa.utilization, 2)
    low = effective_demand(nominal, genoa.utilization, 12)
    assert high.entries.sum() > low.entries.sum()
    assert high.demand(1, 2) == round(nominal.demand(1, 2) * genoa.utilization(2))


def test_shipped_file_round_trips(genoa):
    loaded = load_instance(DATA)
    assert loaded.graph.links == genoa.graph.links
    assert loaded.demand == genoa.demand
    assert loaded.interventions == genoa.interventions
    assert (loaded.alpha, loaded.beta, loaded.v) == (genoa.alpha, genoa.beta, genoa.v)


def test_reference_model_size_bands(genoa):
    size = reference_size(genoa, genoa.demand["morning"])
    assert abs(size["variables"] - 52_260) <= 0.15 * 52_260
    assert abs(size["constraints"] - 61_231) <= 0.15 * 61_231


def test_sp1_variable_count_band(genoa):
    from metroworks.sp1 import build_sp1
    model, _ = build_sp1(genoa)
    assert abs(model.num_variables() - 482) <= 0.15 * 482
    assert model.num_constraints() > 500


def test_deadline_trio_finishes_by_week_ten(genoa):
    plan = solve_sp1(genoa)
    for iv in genoa.interventions:
        if iv.link in (3, 5, 7):
            assert plan.t[iv.id] + iv.duration - 1 <= 10


def test_baselines_complete_within_week_13(genoa):
    for plan in (position_based_plan(genoa), priority_based_plan(genoa)):
        assert plan.completion_week() <= 13


def test_priority_baseline_schedules_link3_first(genoa):
    plan = priority_based_plan(genoa)
    iv3 = next(iv for iv in genoa.interventions if iv.link == 3)
    assert plan.t[iv3.id] == min(plan.t.values())


def test_nonadjacent_pair_example(genoa):
    # links 1 (Brignole-De Ferrari) and 13 (Dinegro-Brin) share no node
    from metroworks.sp1 import check_plan
    plan = PossessionPlan(
        x=frozenset({(1, 4), (13, 4)}),
        y=frozenset({(1, 4), (9, 4)}), t={1: 4, 9: 4})
    violations = check_plan(genoa, plan)
    assert any(v.startswith("eq6") for v in violations)


def test_offpeak_always_fully_served(genoa):
    # cut the busiest central link in a high week and the bottleneck in a low
    # one: off-peak demand is low and fully served either way
    cases = [
        (PossessionPlan(x=frozenset({(metro_link_id(2, 3), 2)}), y=frozenset(), t={}), 2),
        (PossessionPlan(x=frozenset({(metro_link_id(7, 6), 12)}), y=frozenset(), t={}), 12),
    ]
    for plan, week in cases:
        demand = effective_demand(genoa.demand["offpeak"], genoa.utilization, week)
        sol = solve_sp2(genoa, plan, week, "offpeak", demand)
        assert sol.total_unmet() == 0
        assert unmet_fraction(sol, demand) == 0.0


def test_week12_morning_required_triple(genoa):
    # the published weeks-12/13 interruption at nominal morning demand loads
    # the three bridging pairs around Principe
    cut = metro_link_id(7, 6)
    plan = PossessionPlan(x=frozenset({(cut, 12), (cut, 13)}), y=frozenset(), t={})
    sol = solve_sp2(genoa, plan, 12, "morning", genoa.demand["morning"])
    req = {}
    for a, b in ((5, 6), (6, 7), (6, 8)):
        lid = activatable_link_id(genoa, a, b)
        req[(a, b)] = sol.required.get(lid, 0.0)
    assert 800.0 <= req[(6, 7)] <= 1200.0              # Dinegro-side pool
    assert 800.0 <= req[(5, 6)] <= 1200.0              # bottleneck overflow
    assert 640.0 <= req[(6, 8)] <= 960.0               # direct Brin relief
