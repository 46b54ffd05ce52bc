"""Static SVG drawing of a network and the two chosen lines."""
from __future__ import annotations

from xml.sax.saxutils import escape

import networkx as nx

from .instance import TransitInstance
from .solution import DesignSolution

WIDTH = 800.0
MARGIN = 30.0


class RenderError(ValueError):
    pass


def _line_order(inst: TransitInstance, edges) -> list[int]:
    """Node sequence of a path given by its edge ids."""
    G = nx.Graph()
    for e in edges:
        G.add_edge(*inst.edges[e].endpoints)
    if G.number_of_edges() == 0:
        return []
    ends = sorted(n for n, d in G.degree() if d == 1)
    if not ends or not nx.is_connected(G):
        # not a simple path; draw edges in id order as a fallback
        seq = []
        for e in sorted(edges):
            seq.extend(inst.edges[e].endpoints)
        return seq
    start = ends[0]
    return [start] + [v for _, v in nx.dfs_edges(G, start)]


def render_design(inst: TransitInstance, sol: DesignSolution | None, title: str | None = None) -> str:
    """SVG text; rapid line solid, slow line dashed, rapid nodes filled, slow hollow."""
    pts = [n.position for n in inst.nodes] + [c.position for c in inst.centroids]
    if any(p is None or len(p) != 2 for p in pts):
        raise RenderError("every node and centroid needs coordinates")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1.0)
    scale = (WIDTH - 2 * MARGIN) / span
    height = (y1 - y0) * scale + 2 * MARGIN

    def coords(p) -> tuple[str, str]:
        return f"{MARGIN + (p[0] - x0) * scale:.1f}", f"{height - MARGIN - (p[1] - y0) * scale:.1f}"

    def xy(p) -> str:
        return ",".join(coords(p))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" height="{height:.0f}" '
           f'viewBox="0 0 {WIDTH:.0f} {height:.0f}">']
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append('<g id="network" stroke="#cccccc" stroke-width="1" fill="none">')
    for e in inst.edges:
        (ax, ay), (bx, by) = (coords(inst.nodes[i].position) for i in e.endpoints)
        out.append(f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}"/>')
    out.append("</g>")
    if sol is not None:
        for cls, edges, style in (("rapid-line", sol.rapid_edges, 'stroke="#c0392b" stroke-width="4"'),
                                  ("slow-line", sol.slow_edges,
                                   'stroke="#2471a3" stroke-width="3" stroke-dasharray="8,5"')):
            order = _line_order(inst, edges)
            if order:
                points = " ".join(xy(inst.nodes[i].position) for i in order)
                out.append(f'<g id="{cls}" fill="none" {style}><polyline points="{points}"/></g>')
    stops = set(sol.rapid_stops) | set(sol.slow_stops) if sol is not None else set()
    out.append('<g id="nodes" stroke="#333333">')
    for n in inst.nodes:
        r = 6 if n.id in stops else 3.5
        fill = "#333333" if n.in_rapid else "#ffffff"
        cx, cy = coords(n.position)
        stop = ' class="stop"' if n.id in stops else ""
        out.append(f'<circle{stop} cx="{cx}" cy="{cy}" r="{r}" fill="{fill}" stroke-width="1.5"/>')
    out.append("</g>")
    out.append('<g id="centroids" fill="#7f8c8d">')
    for c in inst.centroids:
        cx, cy = coords(c.position)
        out.append(f'<rect x="{float(cx) - 2:.1f}" y="{float(cy) - 2:.1f}" width="4" height="4"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
