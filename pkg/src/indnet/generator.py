"""Deterministic synthetic instances.

``tiny`` and ``small`` are corridor instances: a rapid corridor with one
chord and a slow ladder that shares some nodes (transfer points) and edges
with it.  Budgets are capped so that the chosen edges can never contain a
cycle besides the line itself: a budget below ``shortest O-D hop count +
girth`` leaves no room for a disjoint cycle.  ``seville-like`` is a
triangulated city whose size and demand ladder mirror the Seville study.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np
from scipy.spatial import Delaunay

from .instance import (Centroid, Edge, InstanceError, InstanceParams, Node, TransitInstance,
                       build_instance)

SIZES = ("tiny", "small", "seville-like")

# pairs with demand >= threshold in the Seville study (5256 pairs, 251 of them zero)
DEMAND_LADDER = {150: 82, 130: 122, 100: 240, 80: 384, 60: 632, 40: 1142}
SEVILLE_PAIRS = 5256
SEVILLE_ZERO_PAIRS = 251


@dataclass(frozen=True)
class CorridorConfig:
    rapid_nodes: int = 5
    ladder_columns: int = 3
    centroids: int = 6
    pairs: int = 4
    rapid_gap: tuple[float, float] = (550.0, 850.0)
    ladder_height: tuple[float, float] = (450.0, 700.0)
    max_rapid_edges: int = 5
    max_slow_edges: int = 5
    min_unchanged_slow_edges: int = 1
    private_utility_factor: float = 4.0
    demand: tuple[int, int] = (5, 60)


TINY = CorridorConfig()
SMALL = CorridorConfig(rapid_nodes=8, ladder_columns=5, centroids=10, pairs=12,
                       max_rapid_edges=8, max_slow_edges=8, min_unchanged_slow_edges=2)


def hop_girth_budget(G: nx.Graph, O, D) -> int:
    """Largest budget that cannot fit a line plus a disjoint cycle."""
    hops = min((nx.shortest_path_length(G, o, d) for o in O for d in D
                if o != d and nx.has_path(G, o, d)), default=None)
    if hops is None:
        raise InstanceError("no origin-destination path")
    girth = nx.girth(G) if hasattr(nx, "girth") else _girth(G)
    if math.isinf(girth):
        return len(G.edges)
    return hops + int(girth) - 1


def _girth(G: nx.Graph) -> float:
    best = math.inf
    for u, v in G.edges:
        H = G.copy()
        H.remove_edge(u, v)
        if nx.has_path(H, u, v):
            best = min(best, nx.shortest_path_length(H, u, v) + 1)
    return best


def _corridor(seed: int, cfg: CorridorConfig, name: str) -> TransitInstance:
    rng = np.random.default_rng(seed)
    nodes: list[dict] = []
    # rapid corridor along the x axis
    x = 0.0
    rapid = []
    for i in range(cfg.rapid_nodes):
        if i:
            x += rng.uniform(*cfg.rapid_gap)
        nodes.append({"pos": (round(x, 1), round(rng.uniform(-120, 120), 1)), "R": True, "S": False})
        rapid.append(i)
    # slow ladder: bottom row reuses interior rapid nodes, top row is slow only
    bottom = rapid[1:1 + cfg.ladder_columns]
    top = []
    for c, b in enumerate(bottom):
        nodes[b]["S"] = True
        bx, by = nodes[b]["pos"]
        nodes.append({"pos": (round(bx + rng.uniform(-150, 150), 1),
                              round(by + rng.uniform(*cfg.ladder_height), 1)), "R": False, "S": True})
        top.append(len(nodes) - 1)
    edges: list[dict] = []

    def add_edge(i, j, R, S, old=False):
        for e in edges:
            if {e["ends"][0], e["ends"][1]} == {i, j}:
                e["R"] |= R
                e["S"] |= S
                e["old"] |= old
                return
        edges.append({"ends": (i, j), "R": R, "S": S, "old": old})

    for a, b in zip(rapid, rapid[1:]):
        add_edge(a, b, True, False)
    chord = int(rng.integers(0, cfg.rapid_nodes - 2))
    add_edge(rapid[chord], rapid[chord + 2], True, False)
    for a, b in zip(top, top[1:]):
        add_edge(a, b, False, True, old=True)
    for a, b in zip(bottom, bottom[1:]):
        add_edge(a, b, False, True)
    for t, b in zip(top, bottom):
        add_edge(t, b, False, True)

    flags = [dict(ro=False, rd=False, so=False, sd=False) for _ in nodes]
    flags[rapid[0]]["ro"] = True
    flags[rapid[-1]]["rd"] = True
    if rng.random() < 0.5:
        flags[top[0]]["so"] = True
        flags[top[-1]]["sd"] = True
    else:
        flags[bottom[0]]["so"] = True
        flags[top[-1]]["sd"] = True

    node_objs = [Node(i, n["pos"], n["R"], n["S"], flags[i]["ro"], flags[i]["rd"],
                      flags[i]["so"], flags[i]["sd"]) for i, n in enumerate(nodes)]
    edge_objs = []
    for eid, e in enumerate(edges):
        i, j = e["ends"]
        length = math.dist(nodes[i]["pos"], nodes[j]["pos"])
        edge_objs.append(Edge(eid, (i, j), e["R"], e["S"], round(length, 1), e["old"]))

    # budgets that rule out a line plus a disjoint cycle
    budgets = {}
    for mode, flag, o_key, d_key in (("rapid", "R", "ro", "rd"), ("slow", "S", "so", "sd")):
        G = nx.Graph()
        G.add_nodes_from(i for i, n in enumerate(nodes) if n[flag])
        G.add_edges_from(e["ends"] for e in edges if e[flag])
        O = [i for i in G if flags[i][o_key]]
        D = [i for i in G if flags[i][d_key]]
        budgets[mode] = hop_girth_budget(G, O, D)
    old_count = sum(1 for e in edges if e["old"])
    params = InstanceParams(
        max_rapid_edges=min(cfg.max_rapid_edges, budgets["rapid"]),
        max_slow_edges=min(cfg.max_slow_edges, budgets["slow"]),
        min_unchanged_slow_edges=min(cfg.min_unchanged_slow_edges, old_count),
        private_utility_factor=cfg.private_utility_factor,
    )

    # centroids sit near stations, away from node positions
    all_pos = [n["pos"] for n in nodes]
    cents = []
    for c in range(cfg.centroids):
        anchor = all_pos[int(rng.integers(0, len(all_pos)))]
        ang = rng.uniform(0, 2 * math.pi)
        r = rng.uniform(80, 380)
        cents.append(Centroid(c, (round(anchor[0] + r * math.cos(ang), 1),
                                  round(anchor[1] + r * math.sin(ang), 1))))
    pairs = []
    candidates = [(o, d) for o in range(cfg.centroids) for d in range(cfg.centroids)
                  if o != d and math.dist(cents[o].position, cents[d].position) > 900]
    order = rng.permutation(len(candidates))
    for pid, idx in enumerate(order[: cfg.pairs]):
        o, d = candidates[int(idx)]
        pairs.append({"id": pid, "origin": o, "dest": d,
                      "demand": int(rng.integers(cfg.demand[0], cfg.demand[1] + 1))})
    return build_instance(params, node_objs, edge_objs, cents, pairs, name=name)


def _ladder_demands(rng: np.random.Generator, n_centroids: int) -> list[dict]:
    """All ordered pairs with demands matching the study's threshold counts exactly."""
    thresholds = sorted(DEMAND_LADDER)
    total = n_centroids * (n_centroids - 1)
    buckets = []
    upper = None
    prev = 0
    for t in reversed(thresholds):
        cnt = DEMAND_LADDER[t] - prev
        prev = DEMAND_LADDER[t]
        hi = 400 if upper is None else upper - 1
        buckets.append((cnt, t, hi))
        upper = t
    n_zero = SEVILLE_ZERO_PAIRS if total == SEVILLE_PAIRS else max(0, round(total * SEVILLE_ZERO_PAIRS / SEVILLE_PAIRS))
    rest = total - prev - n_zero
    if rest < 0:
        raise InstanceError("too few centroids for the demand ladder")
    buckets.append((rest, 1, thresholds[0] - 1))
    values = [0] * n_zero
    for cnt, lo, hi in buckets:
        values += [int(v) for v in rng.integers(lo, hi + 1, size=cnt)]
    values = np.array(values)[rng.permutation(total)]
    pairs = []
    k = 0
    for o in range(n_centroids):
        for d in range(n_centroids):
            if o != d:
                pairs.append({"id": k, "origin": o, "dest": d, "demand": int(values[k])})
                k += 1
    return pairs


def _seville_like(seed: int, name: str) -> TransitInstance:
    rng = np.random.default_rng(seed)
    n_nodes, n_edges, n_rapid, n_transfer, n_cent = 97, 247, 36, 26, 73
    pts = rng.uniform([0, 0], [12000, 9000], size=(n_nodes, 2)).round(1)
    tri = Delaunay(pts)
    cand = set()
    for s in tri.simplices:
        for a, b in ((0, 1), (1, 2), (0, 2)):
            i, j = sorted((int(s[a]), int(s[b])))
            cand.add((i, j))
    cand = sorted(cand, key=lambda e: -math.dist(pts[e[0]], pts[e[1]]))
    G = nx.Graph()
    G.add_nodes_from(range(n_nodes))
    G.add_edges_from(cand)
    for e in list(cand):
        if G.number_of_edges() <= n_edges:
            break
        G.remove_edge(*e)
        if not nx.is_connected(G):
            G.add_edge(*e)
    # rapid corridor: nodes closest to the main diagonal
    direction = np.array([12000.0, 9000.0])
    direction /= np.linalg.norm(direction)
    offs = np.abs(pts[:, 0] * direction[1] - pts[:, 1] * direction[0])
    rapid = set(int(i) for i in np.argsort(offs)[:n_rapid])
    along = {i: float(pts[i] @ direction) for i in rapid}
    rapid_sorted = sorted(rapid, key=along.get)
    rapid_only = set(rapid_sorted[:: max(1, n_rapid // (n_rapid - n_transfer))][: n_rapid - n_transfer])
    slow = set(range(n_nodes)) - rapid_only
    edges = []
    for i, j in sorted(G.edges):
        R = i in rapid and j in rapid
        S = i in slow and j in slow
        if not (R or S):
            S = False
            R = True if (i in rapid and j in rapid) else False
        if not (R or S):
            continue
        edges.append([i, j, R, S])
    # make sure the rapid subgraph is connected along the corridor
    GR = nx.Graph()
    GR.add_nodes_from(rapid)
    GR.add_edges_from((i, j) for i, j, R, _ in edges if R)
    for a, b in zip(rapid_sorted, rapid_sorted[1:]):
        if not nx.has_path(GR, a, b):
            edges.append([min(a, b), max(a, b), True, a in slow and b in slow])
            GR.add_edge(a, b)
    seen = {}
    for e in edges:
        key = (e[0], e[1])
        if key in seen:
            seen[key][2] |= e[2]
            seen[key][3] |= e[3]
        else:
            seen[key] = e
    edges = list(seen.values())
    ro = set(rapid_sorted[:3])
    rd = set(rapid_sorted[-3:])
    slow_sorted = sorted(slow, key=lambda i: pts[i, 0] - pts[i, 1])
    so, sd = set(slow_sorted[:3]), set(slow_sorted[-3:])
    GS = nx.Graph()
    GS.add_nodes_from(slow)
    GS.add_edges_from((i, j) for i, j, _, S in edges if S)
    old_path = nx.shortest_path(GS, slow_sorted[0], slow_sorted[-1])
    old_edges = {tuple(sorted(p)) for p in zip(old_path, old_path[1:])}
    nodes = [Node(i, (float(pts[i, 0]), float(pts[i, 1])), i in rapid, i in slow,
                  i in ro, i in rd, i in so, i in sd) for i in range(n_nodes)]
    edge_objs = [Edge(k, (i, j), R, S, round(math.dist(pts[i], pts[j]), 1), (i, j) in old_edges and S)
                 for k, (i, j, R, S) in enumerate(sorted(edges))]
    cents = []
    while len(cents) < n_cent:
        p = rng.uniform([0, 0], [12000, 9000]).round(1)
        if min(math.dist(p, q) for q in pts) > 1.0:
            cents.append(Centroid(len(cents), (float(p[0]), float(p[1]))))
    pairs = _ladder_demands(rng, n_cent)
    params = InstanceParams()
    return build_instance(params, nodes, edge_objs, cents, pairs, name=name, drop_zero_demand=False)


def generate_synthetic(seed: int, size: str = "tiny") -> TransitInstance:
    """Deterministic instance for ``seed`` and size class ``tiny|small|seville-like``."""
    if size == "tiny":
        return _corridor(seed, TINY, f"tiny-{seed}")
    if size == "small":
        return _corridor(seed, SMALL, f"small-{seed}")
    if size == "seville-like":
        return _seville_like(seed, f"seville-like-{seed}")
    raise InstanceError(f"unknown size class {size!r}; expected one of {SIZES}")


def ladder_file_instance(seed: int = 0, n_centroids: int = 73) -> TransitInstance:
    """Tiny network carrying a full demand matrix built to the threshold ladder."""
    base = generate_synthetic(seed, "tiny")
    rng = np.random.default_rng(seed)
    cents = []
    while len(cents) < n_centroids:
        p = rng.uniform([-3000, -3000], [6000, 3000]).round(1)
        if min(math.dist(p, n.position) for n in base.nodes) > 1.0:
            cents.append(Centroid(len(cents), (float(p[0]), float(p[1]))))
    pairs = _ladder_demands(rng, n_centroids)
    return build_instance(base.params, base.nodes, base.edges, cents, pairs,
                          name=f"ladder-{seed}", drop_zero_demand=False)
