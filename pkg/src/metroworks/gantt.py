"""Possession-plan Gantt chart as a standalone SVG.

One row per maintained link, one column per week, one bar per occupied
(link, week) cell, shaded by intervention priority. The output is plain
deterministic text so identical plans render byte-identical files.
"""

from __future__ import annotations

CELL_W = 34
CELL_H = 26
LEFT = 150
TOP = 40

_PALETTE = ["#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5",
            "#08519c", "#08306b", "#042142", "#021025", "#000000"]


def _shade(priority: int | None) -> str:
    if priority is None:
        return "#999999"
    return _PALETTE[max(1, min(10, priority)) - 1]


def plan_rows(rows: list[tuple[int, int, int | None, int | None]],
              horizon: int, labels: dict[int, str] | None = None) -> str:
    """Render bars from (week, link, intervention, priority) tuples."""
    labels = labels or {}
    links = sorted({link for _, link, _, _ in rows})
    width = LEFT + horizon * CELL_W + 20
    height = TOP + len(links) * CELL_H + 30
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:11px;}</style>',
        f'<text x="{LEFT}" y="16">Possession plan (one bar per interrupted link-week)</text>',
    ]
    for col in range(1, horizon + 1):
        x = LEFT + (col - 1) * CELL_W
        out.append(f'<text x="{x + 10}" y="{TOP - 6}">{col}</text>')
        out.append(f'<line x1="{x}" y1="{TOP}" x2="{x}" y2="{TOP + len(links) * CELL_H}" '
                   'stroke="#dddddd" stroke-width="1"/>')
    for row, link in enumerate(links):
        y = TOP + row * CELL_H
        label = labels.get(link, f"link {link}")
        out.append(f'<text x="8" y="{y + 17}">{label}</text>')
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{LEFT + horizon * CELL_W}" y2="{y}" '
                   'stroke="#eeeeee" stroke-width="1"/>')
    for week, link, intervention, priority in sorted(rows):
        row = links.index(link)
        x = LEFT + (week - 1) * CELL_W
        y = TOP + row * CELL_H
        title = f"link {link}, week {week}"
        if intervention is not None:
            title += f", intervention {intervention} (priority {priority})"
        out.append(
            f'<rect x="{x + 2}" y="{y + 3}" width="{CELL_W - 4}" height="{CELL_H - 6}" '
            f'fill="{_shade(priority)}"><title>{title}</title></rect>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plan_to_svg(instance, plan) -> str:
    """Gantt for a possession plan, labeling links with their sections."""
    labels = {}
    for link_id in instance.maintenance_links():
        link = instance.graph.links[link_id]
        tail = instance.graph.nodes[link.tail].name
        head = instance.graph.nodes[link.head].name
        labels[link_id] = f"{link_id}: {tail} - {head}"
    rows = []
    for (link, week) in sorted(plan.x):
        iv = next((iv for iv in instance.interventions_on(link)
                   if plan.t.get(iv.id) is not None
                   and plan.t[iv.id] <= week < plan.t[iv.id] + iv.duration), None)
        rows.append((week, link, iv.id if iv else None, iv.priority if iv else None))
    return plan_rows(rows, instance.horizon, labels)


def csv_to_svg(csv_text: str, horizon: int | None = None) -> str:
    """Gantt straight from an exported plan CSV (week,link_id,intervention_id,priority)."""
    rows = []
    for line in csv_text.strip().splitlines()[1:]:
        week, link, intervention, priority = (line.split(",") + ["", ""])[:4]
        rows.append((int(week), int(link),
                     int(intervention) if intervention else None,
                     int(priority) if priority else None))
    if horizon is None:
        horizon = max((w for w, _, _, _ in rows), default=1)
    return plan_rows(rows, horizon)
