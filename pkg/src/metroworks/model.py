"""Domain model: multimodal network, problem instance, loading and demand sampling.

The network is a directed graph whose links are partitioned by mode:
metro (the line under maintenance), bus (existing services whose capacity
can be raised in blocks), walk (transfer/bypass links) and activatable
(dormant links that can be opened as temporary bus bridges). A single node
id may be shared by several modes; transfers are explicit walk links.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

METRO = "metro"
BUS = "bus"
WALK = "walk"
ACTIVATABLE = "activatable"
MODES = (METRO, BUS, WALK, ACTIVATABLE)

#: walk links are treated as effectively uncapacitated at this value
WALK_CAPACITY = 1.0e5


class ParseError(Exception):
    """Instance file is not well-formed (bad JSON, missing keys, bad types)."""


class ValidationError(Exception):
    """Instance violates a model invariant; `rule` names the violated rule."""

    def __init__(self, rule: str, message: str):
        self.rule = rule
        super().__init__(f"{rule}: {message}")


@dataclass(frozen=True)
class Node:
    id: int
    name: str


@dataclass(frozen=True)
class Link:
    """Directed link. `capacity` is passengers/hour (None on activatable links,
    which only have capacity once units are activated). `eta` is the generalized
    cost per passenger. `activation_cost` is the cost of one q0-block of
    capacity and is present exactly on bus and activatable links. `service`
    is a reporting tag ("train" marks the rail-backbone subset of bus links)."""

    id: int
    tail: int
    head: int
    mode: str
    eta: float
    capacity: float | None = None
    activation_cost: float | None = None
    reverse: int | None = None
    service: str | None = None


@dataclass(frozen=True)
class Intervention:
    id: int
    link: int
    duration: int          # whole weeks
    priority: int          # 1..10
    deadline: int          # week index, 1-based


@dataclass
class UtilizationProfile:
    """Weekly demand multipliers g(k), defined for every week of the horizon."""

    rates: dict[int, float]

    def __call__(self, week: int) -> float:
        return self.rates[week]


@dataclass
class DemandMatrix:
    """Origin/destination rates (passengers/hour) for one period of the day.

    `entries[i, j]` is the demand from `nodes[i]` to `nodes[j]`; the diagonal
    is zero. `week` is set on matrices that have been scaled to a specific week.
    """

    period: str
    nodes: tuple[int, ...]
    entries: np.ndarray
    week: int | None = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.int64)
        self._index = {n: i for i, n in enumerate(self.nodes)}

    def demand(self, origin: int, dest: int) -> int:
        return int(self.entries[self._index[origin], self._index[dest]])

    def pairs(self):
        """Yield (origin, dest, demand) over positive off-diagonal entries."""
        for i, o in enumerate(self.nodes):
            row = self.entries[i]
            for j, d in enumerate(self.nodes):
                if i != j and row[j] > 0:
                    yield o, d, int(row[j])

    def total(self) -> int:
        return int(self.entries.sum())

    def __eq__(self, other):
        if not isinstance(other, DemandMatrix):
            return NotImplemented
        return (
            self.period == other.period
            and self.nodes == other.nodes
            and self.week == other.week
            and np.array_equal(self.entries, other.entries)
        )


@dataclass
class MultimodalGraph:
    nodes: dict[int, Node]
    links: dict[int, Link]

    def __post_init__(self):
        self._out: dict[int, list[Link]] = {n: [] for n in self.nodes}
        self._in: dict[int, list[Link]] = {n: [] for n in self.nodes}
        for link in self.links.values():
            self._out[link.tail].append(link)
            self._in[link.head].append(link)
        for adj in (self._out, self._in):
            for n in adj:
                adj[n].sort(key=lambda l: l.id)

    def forward_star(self, node: int) -> list[Link]:
        return self._out[node]

    def backward_star(self, node: int) -> list[Link]:
        return self._in[node]

    def by_mode(self, mode: str) -> list[Link]:
        return sorted((l for l in self.links.values() if l.mode == mode), key=lambda l: l.id)

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def link_ids(self) -> list[int]:
        return sorted(self.links)


@dataclass
class Instance:
    graph: MultimodalGraph
    interventions: list[Intervention]
    horizon: int
    periods: list[str]
    demand: dict[str, DemandMatrix]
    utilization: UtilizationProfile
    max_simultaneous: int              # N
    max_units: int                     # J
    max_lines: int                     # S
    unit_capacity: float               # q0
    alpha: tuple[float, float, float]
    beta: tuple[float, float, float, float]
    v: tuple[float, float, float]
    big_m_policy: str = "tight"
    iterations: int = 10               # R
    seed: int = 0
    name: str = "instance"

    def maintenance_links(self) -> list[int]:
        """Link ids needing maintenance, ascending (the set L_A)."""
        return sorted({iv.link for iv in self.interventions})

    def weeks(self) -> range:
        return range(1, self.horizon + 1)

    def interventions_on(self, link_id: int) -> list[Intervention]:
        return [iv for iv in self.interventions if iv.link == link_id]

    def link_deadline(self, link_id: int) -> int:
        """Deadline attached to a maintenance link: max over its interventions."""
        return max(iv.deadline for iv in self.interventions_on(link_id))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_instance(instance: Instance) -> None:
    """Check every model invariant; raise ValidationError naming the rule."""
    graph = instance.graph
    for link in graph.links.values():
        if link.tail not in graph.nodes or link.head not in graph.nodes:
            raise ValidationError("link-endpoints", f"link {link.id} references unknown node")
        if link.mode not in MODES:
            raise ValidationError("link-mode", f"link {link.id} has unknown mode {link.mode!r}")
        if link.eta < 0:
            raise ValidationError("link-eta", f"link {link.id} has negative generalized cost")
        if link.mode == ACTIVATABLE:
            if link.capacity is not None:
                raise ValidationError(
                    "activatable-capacity", f"activatable link {link.id} must not carry a nominal capacity")
        else:
            if link.capacity is None or link.capacity < 0:
                raise ValidationError(
                    "link-capacity", f"link {link.id} needs a nonnegative nominal capacity")
        if link.mode in (BUS, ACTIVATABLE):
            if link.activation_cost is None or link.activation_cost < 0:
                raise ValidationError(
                    "activation-cost", f"link {link.id} needs a nonnegative activation cost")
        elif link.activation_cost is not None:
            raise ValidationError(
                "activation-cost", f"link {link.id} ({link.mode}) must not carry an activation cost")

    seen = {}
    for link in graph.links.values():
        key = (link.tail, link.head, link.mode)
        if key in seen:
            raise ValidationError(
                "link-unique", f"links {seen[key]} and {link.id} duplicate {key}")
        seen[key] = link.id

    for link in graph.by_mode(ACTIVATABLE):
        if link.reverse is None:
            raise ValidationError("activatable-twin", f"activatable link {link.id} has no reverse twin")
        twin = graph.links.get(link.reverse)
        if twin is None or twin.mode != ACTIVATABLE or twin.tail != link.head or twin.head != link.tail:
            raise ValidationError(
                "activatable-twin", f"link {link.id}: reverse {link.reverse} is not its activatable twin")
        if twin.reverse != link.id:
            raise ValidationError("activatable-twin", f"links {link.id}/{twin.id} twin pointers disagree")

    ids = [iv.id for iv in instance.interventions]
    if len(ids) != len(set(ids)):
        raise ValidationError("intervention-unique", "duplicate intervention ids")
    for iv in instance.interventions:
        link = graph.links.get(iv.link)
        if link is None:
            raise ValidationError("intervention-link", f"intervention {iv.id} references unknown link {iv.link}")
        if link.mode != METRO:
            raise ValidationError(
                "intervention-mode", f"intervention {iv.id} targets non-metro link {iv.link}")
        if iv.duration < 1:
            raise ValidationError("intervention-duration", f"intervention {iv.id} has duration < 1")
        if not 1 <= iv.deadline <= instance.horizon:
            raise ValidationError(
                "intervention-deadline", f"intervention {iv.id} deadline outside the horizon")
        if iv.duration > iv.deadline:
            raise ValidationError(
                "intervention-deadline",
                f"intervention {iv.id}: duration {iv.duration} exceeds deadline {iv.deadline}")
        if not 1 <= iv.priority <= 10:
            raise ValidationError("intervention-priority", f"intervention {iv.id} priority outside 1..10")

    if instance.horizon < 1:
        raise ValidationError("horizon", "horizon must be at least one week")
    for k in instance.weeks():
        if k not in instance.utilization.rates:
            raise ValidationError("utilization", f"utilization rate missing for week {k}")
        if instance.utilization(k) < 0:
            raise ValidationError("utilization", f"utilization rate negative for week {k}")

    if not instance.periods:
        raise ValidationError("periods", "at least one period of the day is required")
    node_order = tuple(instance.graph.node_ids())
    for period in instance.periods:
        matrix = instance.demand.get(period)
        if matrix is None:
            raise ValidationError("demand", f"no demand matrix for period {period!r}")
        if matrix.nodes != node_order:
            raise ValidationError("demand", f"period {period!r}: node order differs from the graph")
        if matrix.entries.shape != (len(node_order), len(node_order)):
            raise ValidationError("demand", f"period {period!r}: matrix shape mismatch")
        if (matrix.entries < 0).any():
            raise ValidationError("demand", f"period {period!r}: negative demand entry")
        if np.diagonal(matrix.entries).any():
            raise ValidationError("demand", f"period {period!r}: nonzero diagonal")

    if instance.max_simultaneous < 1:
        raise ValidationError("params", "N must be >= 1")
    if instance.max_units < 1:
        raise ValidationError("params", "J must be >= 1")
    if instance.max_lines < 1:
        raise ValidationError("params", "S must be >= 1")
    if instance.unit_capacity <= 0:
        raise ValidationError("params", "q0 must be positive")
    if instance.iterations < 1:
        raise ValidationError("params", "R must be >= 1")
    if instance.big_m_policy != "tight":
        raise ValidationError("params", f"unsupported big-M policy {instance.big_m_policy!r}")
    for name, weights in (("alpha", instance.alpha), ("beta", instance.beta), ("v", instance.v)):
        if any(w < 0 for w in weights):
            raise ValidationError("weights", f"{name} weights must be nonnegative")


# ---------------------------------------------------------------------------
# Loading / saving
# ---------------------------------------------------------------------------

def _require(mapping, key, where):
    try:
        return mapping[key]
    except (KeyError, TypeError):
        raise ParseError(f"missing key {key!r} in {where}") from None


def _load_demand_matrix(period: str, payload, node_order: tuple[int, ...], base: Path) -> DemandMatrix:
    if isinstance(payload, dict) and "csv" in payload:
        rows = _read_demand_csv(base / payload["csv"], node_order)
    elif isinstance(payload, dict) and "matrix" in payload:
        rows = payload["matrix"]
    else:
        raise ParseError(f"demand for period {period!r} needs a 'matrix' or 'csv' entry")
    try:
        entries = np.asarray(rows, dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"demand matrix for period {period!r} is not numeric: {exc}") from None
    if entries.ndim != 2:
        raise ParseError(f"demand matrix for period {period!r} is not two-dimensional")
    return DemandMatrix(period=period, nodes=node_order, entries=entries)


def _read_demand_csv(path: Path, node_order: tuple[int, ...]):
    if not path.exists():
        raise ParseError(f"demand side-file not found: {path}")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = [int(tok) for tok in lines[0].split(",")[1:]]
    if tuple(header) != node_order:
        raise ParseError(f"demand CSV {path} header does not match the node order")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        rows.append([float(tok) for tok in cells[1:]])
    return rows


def load_instance(path: str | Path) -> Instance:
    """Parse and fully validate an instance file (see README for the schema)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from None
    return instance_from_dict(raw, base=path.parent, name=path.stem)


def instance_from_dict(raw: dict, base: Path | None = None, name: str = "instance") -> Instance:
    base = base or Path(".")
    nodes = {}
    for entry in _require(raw, "nodes", "instance"):
        node = Node(id=int(_require(entry, "id", "node")), name=str(entry.get("name", "")))
        if node.id in nodes:
            raise ParseError(f"duplicate node id {node.id}")
        nodes[node.id] = node

    links = {}
    for entry in _require(raw, "links", "instance"):
        link = Link(
            id=int(_require(entry, "id", "link")),
            tail=int(_require(entry, "tail", "link")),
            head=int(_require(entry, "head", "link")),
            mode=str(_require(entry, "mode", "link")),
            eta=float(_require(entry, "eta", "link")),
            capacity=None if entry.get("capacity") is None else float(entry["capacity"]),
            activation_cost=(
                None if entry.get("activation_cost") is None else float(entry["activation_cost"])),
            reverse=None if entry.get("reverse") is None else int(entry["reverse"]),
            service=entry.get("service"),
        )
        if link.id in links:
            raise ParseError(f"duplicate link id {link.id}")
        links[link.id] = link

    interventions = [
        Intervention(
            id=int(_require(entry, "id", "intervention")),
            link=int(_require(entry, "link", "intervention")),
            duration=int(_require(entry, "duration", "intervention")),
            priority=int(_require(entry, "priority", "intervention")),
            deadline=int(_require(entry, "deadline", "intervention")),
        )
        for entry in _require(raw, "interventions", "instance")
    ]

    horizon = int(_require(raw, "horizon", "instance"))
    periods = [str(p) for p in _require(raw, "periods", "instance")]

    util_raw = _require(raw, "utilization", "instance")
    if isinstance(util_raw, list):
        rates = {k + 1: float(g) for k, g in enumerate(util_raw)}
    else:
        rates = {int(k): float(g) for k, g in util_raw.items()}
    utilization = UtilizationProfile(rates=rates)

    graph = MultimodalGraph(nodes=nodes, links=links)
    node_order = tuple(graph.node_ids())
    demand_raw = _require(raw, "demand", "instance")
    demand = {
        period: _load_demand_matrix(period, _require(demand_raw, period, "demand"), node_order, base)
        for period in periods
    }

    params = _require(raw, "params", "instance")
    weights = _require(raw, "weights", "instance")
    alpha = tuple(float(w) for w in _require(weights, "alpha", "weights"))
    beta = tuple(float(w) for w in _require(weights, "beta", "weights"))
    v = tuple(float(w) for w in _require(weights, "v", "weights"))
    if len(alpha) != 3 or len(beta) != 4 or len(v) != 3:
        raise ParseError("weights must have alpha[3], beta[4], v[3]")

    instance = Instance(
        graph=graph,
        interventions=interventions,
        horizon=horizon,
        periods=periods,
        demand=demand,
        utilization=utilization,
        max_simultaneous=int(_require(params, "N", "params")),
        max_units=int(_require(params, "J", "params")),
        max_lines=int(_require(params, "S", "params")),
        unit_capacity=float(_require(params, "q0", "params")),
        alpha=alpha,
        beta=beta,
        v=v,
        big_m_policy=str(params.get("big_m", "tight")),
        iterations=int(params.get("R", 10)),
        seed=int(params.get("seed", 0)),
        name=name,
    )
    validate_instance(instance)
    return instance


def instance_to_dict(instance: Instance) -> dict:
    return {
        "nodes": [
            {"id": n.id, "name": n.name} for n in sorted(instance.graph.nodes.values(), key=lambda n: n.id)
        ],
        "links": [
            {
                "id": l.id,
                "tail": l.tail,
                "head": l.head,
                "mode": l.mode,
                "eta": l.eta,
                "capacity": l.capacity,
                "activation_cost": l.activation_cost,
                "reverse": l.reverse,
                "service": l.service,
            }
            for l in sorted(instance.graph.links.values(), key=lambda l: l.id)
        ],
        "interventions": [
            {
                "id": iv.id,
                "link": iv.link,
                "duration": iv.duration,
                "priority": iv.priority,
                "deadline": iv.deadline,
            }
            for iv in instance.interventions
        ],
        "horizon": instance.horizon,
        "periods": list(instance.periods),
        "demand": {
            period: {"matrix": instance.demand[period].entries.tolist()}
            for period in instance.periods
        },
        "utilization": {str(k): instance.utilization(k) for k in instance.weeks()},
        "params": {
            "N": instance.max_simultaneous,
            "J": instance.max_units,
            "S": instance.max_lines,
            "q0": instance.unit_capacity,
            "R": instance.iterations,
            "seed": instance.seed,
            "big_m": instance.big_m_policy,
        },
        "weights": {
            "alpha": list(instance.alpha),
            "beta": list(instance.beta),
            "v": list(instance.v),
        },
    }


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(instance_to_dict(instance), indent=1, sort_keys=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Demand sampling and scaling
# ---------------------------------------------------------------------------

def sample_od(instance: Instance, seed: int) -> dict[str, DemandMatrix]:
    """Draw one random o/d matrix per period.

    Each entry is Gaussian with mean d and standard deviation 0.1*d, clamped
    at zero and rounded to the nearest integer; zero entries stay zero. The
    same seed always produces the same matrices (periods are drawn in the
    instance's period order, entries row-major).
    """
    rng = np.random.default_rng(seed)
    sampled = {}
    for period in instance.periods:
        nominal = instance.demand[period]
        mean = nominal.entries.astype(np.float64)
        draw = rng.normal(loc=mean, scale=0.1 * mean)
        entries = np.rint(np.clip(draw, 0.0, None)).astype(np.int64)
        entries[mean == 0] = 0
        sampled[period] = DemandMatrix(period=period, nodes=nominal.nodes, entries=entries)
    return sampled


def effective_demand(nominal: DemandMatrix, g: UtilizationProfile, week: int) -> DemandMatrix:
    """Scale a matrix by the week's utilization rate, rounding to integers."""
    rate = g(week)
    entries = np.rint(nominal.entries.astype(np.float64) * rate).astype(np.int64)
    return DemandMatrix(period=nominal.period, nodes=nominal.nodes, entries=entries, week=week)
