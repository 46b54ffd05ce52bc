"""Exhaustive reference solver for tiny instances.

Enumerates every feasible pair of line designs and routes each O/D pair by a
label-setting search on states ``(node, mode, transfers used, edges used)``.
It shares no code with the MILP path beyond the instance model and the
solution container.
"""
from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Iterator

import networkx as nx

from .instance import RAPID, SLOW, TransitInstance
from .solution import DesignSolution, Leg, build_solution

log = logging.getLogger(__name__)

DEFAULT_CAP = 1_000_000


class OracleCapExceeded(RuntimeError):
    """The design space is larger than the configured cap."""


@dataclass(frozen=True)
class LineDesign:
    """A simple path of one mode with its stop labelling."""

    mode: str
    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    stops: tuple[int, ...]
    nonstops: tuple[int, ...] = ()


@dataclass(frozen=True)
class EnumeratedDesign:
    rapid: LineDesign
    slow: LineDesign | None


def _mode_graph(inst: TransitInstance, mode: str) -> nx.Graph:
    G = nx.Graph()
    G.add_nodes_from(inst.mode_nodes(mode))
    for e in inst.mode_edges(mode):
        i, j = inst.edges[e].endpoints
        G.add_edge(i, j, id=e)
    return G


def _line_paths(inst: TransitInstance, mode: str) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Distinct simple paths that satisfy the endpoint and incidence rules literally."""
    budget = inst.params.max_rapid_edges if mode == RAPID else inst.params.max_slow_edges
    O, D = set(inst.origins(mode)), set(inst.dests(mode))
    G = _mode_graph(inst, mode)
    found = {}
    for o in sorted(O):
        for d in sorted(D):
            if o == d:
                continue
            for nodes in nx.all_simple_paths(G, o, d, cutoff=budget):
                edges = tuple(G.edges[u, v]["id"] for u, v in zip(nodes, nodes[1:]))
                deg: dict[int, int] = {}
                for u in nodes:
                    deg[u] = 2
                deg[nodes[0]] = deg[nodes[-1]] = 1
                if sum(deg.get(i, 0) for i in O) != 1 or sum(deg.get(i, 0) for i in D) != 1:
                    continue
                key = frozenset(edges)
                if key not in found:
                    found[key] = (tuple(nodes), edges)
    return sorted(found.values(), key=lambda t: (len(t[1]), tuple(sorted(t[1])), t[0]))


def rapid_designs(inst: TransitInstance) -> Iterator[LineDesign]:
    p = inst.params
    O, D = set(inst.origins(RAPID)), set(inst.dests(RAPID))
    for nodes, edges in _line_paths(inst, RAPID):
        interior = nodes[1:-1]
        for mask in itertools.product((True, False), repeat=len(interior)):
            stops = [nodes[0]] + [k for k, s in zip(interior, mask) if s] + [nodes[-1]]
            if sum(1 for i in stops if i in O) != 1 or sum(1 for i in stops if i in D) != 1:
                continue
            if any(inst.node_distance(i, j) <= p.min_station_spacing
                   for i, j in itertools.combinations(stops, 2)):
                continue
            nonstops = [k for k, s in zip(interior, mask) if not s]
            yield LineDesign(RAPID, nodes, edges, tuple(sorted(stops)), tuple(sorted(nonstops)))


def slow_designs(inst: TransitInstance) -> Iterator[LineDesign]:
    need = inst.params.min_unchanged_slow_edges
    for nodes, edges in _line_paths(inst, SLOW):
        if sum(1 for e in edges if inst.edges[e].on_old_slow_line) < need:
            continue
        O, D = set(inst.origins(SLOW)), set(inst.dests(SLOW))
        if sum(1 for i in nodes if i in O) != 1 or sum(1 for i in nodes if i in D) != 1:
            continue
        yield LineDesign(SLOW, nodes, edges, tuple(sorted(nodes)))


def enumerate_designs(inst: TransitInstance, cap: int = DEFAULT_CAP,
                      rapid_only: bool = False) -> Iterator[EnumeratedDesign]:
    """All feasible (rapid, slow) design pairs in a fixed canonical order."""
    rapid = list(rapid_designs(inst))
    if rapid_only:
        if len(rapid) > cap:
            raise OracleCapExceeded(f"{len(rapid)} rapid designs exceed cap {cap}")
        for r in rapid:
            yield EnumeratedDesign(r, None)
        return
    slow = list(slow_designs(inst))
    if len(rapid) * len(slow) > cap:
        raise OracleCapExceeded(f"{len(rapid) * len(slow)} design pairs exceed cap {cap}")
    for r in rapid:
        for s in slow:
            yield EnumeratedDesign(r, s)


def best_routing(inst: TransitInstance, design: EnumeratedDesign, pair) -> tuple[tuple[Leg, ...], float] | None:
    """Fastest public route for ``pair`` on ``design``; ``None`` if none beats the car.

    Rules: board at a stop within walking range and ride an arc next; a
    transfer needs stops of both modes at a transfer node, must follow an arc
    and precede one; at most one transfer each way; an edge is used at most
    once per trip (across modes); alight right after an arc.
    """
    if isinstance(pair, int):
        pair = next(d for d in inst.demands if d.id == pair)
    p = inst.params
    stops = {RAPID: set(design.rapid.stops), SLOW: set(design.slow.stops) if design.slow else set()}
    built = {RAPID: set(design.rapid.edges), SLOW: set(design.slow.edges) if design.slow else set()}
    moves: dict[tuple[int, str], list] = {}
    for mode in (RAPID, SLOW):
        for a in inst.mode_arcs(mode):
            if a.edge in built[mode]:
                cost = a.traverse_time + (p.stop_time(mode) if a.tail in stops[mode] else 0.0)
                moves.setdefault((a.tail, mode), []).append((a, cost))
    for v in moves.values():
        v.sort(key=lambda t: t[0].id)
    transfer_ok = {k for k in inst.transfer_nodes if k in stops[RAPID] and k in stops[SLOW]}

    counter = itertools.count()
    heap = []
    for mode in (RAPID, SLOW):
        for k in sorted(stops[mode]):
            wt = inst.walk_time(pair.origin, k, mode)
            if wt is None:
                continue
            state = (k, mode, 0, 0, False, frozenset())
            t0 = wt + p.boarding_time
            heapq.heappush(heap, (t0, next(counter), state, (("walk_in", mode, k, wt),)))
    settled = set()
    while heap:
        t, _, state, trail = heapq.heappop(heap)
        if state in settled:
            continue
        settled.add(state)
        node, mode, sr, rs, after_arc, used = state
        if trail[-1][0] == "walk_out":
            if t > pair.private_utility + 1e-9:
                return None
            return _trail_to_legs(inst, trail), t
        if after_arc:
            wt = inst.walk_time(pair.dest, node, mode)
            if wt is not None and node in stops[mode]:
                end_state = (node, mode, sr, rs, "done", used)
                heapq.heappush(heap, (t + wt, next(counter), end_state,
                                      trail + (("walk_out", mode, node, wt),)))
            if node in transfer_ok:
                if mode == SLOW and sr == 0:
                    nxt = (node, RAPID, 1, rs, False, used)
                    heapq.heappush(heap, (t + p.transfer_time_SR, next(counter), nxt,
                                          trail + (("transfer", "SR", node, 0.0),)))
                if mode == RAPID and rs == 0:
                    nxt = (node, SLOW, sr, 1, False, used)
                    heapq.heappush(heap, (t + p.transfer_time_RS, next(counter), nxt,
                                          trail + (("transfer", "RS", node, 0.0),)))
        for a, cost in moves.get((node, mode), ()):
            if a.edge in used:
                continue
            nxt = (a.head, mode, sr, rs, True, used | {a.edge})
            heapq.heappush(heap, (t + cost, next(counter), nxt, trail + (("arc", mode, a.id, 0.0),)))
    return None


def _trail_to_legs(inst: TransitInstance, trail) -> tuple[Leg, ...]:
    legs = []
    ride_mode, ride_nodes, ride_arcs = None, [], []

    def flush():
        if ride_arcs:
            legs.append(Leg("ride", ride_mode, tuple(ride_nodes), tuple(ride_arcs),
                            float(sum(inst.arcs[a].traverse_time for a in ride_arcs))))

    for step in trail:
        kind = step[0]
        if kind == "walk_in":
            legs.append(Leg("walk_in", step[1], (step[2],), (), step[3]))
            ride_mode, ride_nodes, ride_arcs = step[1], [step[2]], []
        elif kind == "arc":
            a = inst.arcs[step[2]]
            ride_nodes.append(a.head)
            ride_arcs.append(a.id)
        elif kind == "transfer":
            flush()
            legs.append(Leg("transfer", step[1], (step[2],)))
            ride_mode = RAPID if step[1] == "SR" else SLOW
            ride_nodes, ride_arcs = [step[2]], []
        else:
            flush()
            legs.append(Leg("walk_out", step[1], (step[2],), (), step[3]))
    return tuple(legs)


@dataclass
class OracleResult:
    objective: float
    solution: DesignSolution | None
    designs_evaluated: int
    design: EnumeratedDesign | None = None


def evaluate_design(inst: TransitInstance, design: EnumeratedDesign) -> tuple[float, dict]:
    routes = {}
    total = 0.0
    for d in inst.demands:
        r = best_routing(inst, design, d)
        routes[d.id] = r[0] if r else None
        if r:
            total += d.demand
    return total, routes


def _to_solution(inst: TransitInstance, design: EnumeratedDesign, routes) -> DesignSolution:
    slow = design.slow
    return build_solution(inst, design.rapid.edges, design.rapid.stops, design.rapid.nonstops,
                          slow.edges if slow else (), slow.stops if slow else (), routes)


def solve_exact(inst: TransitInstance, cap: int = DEFAULT_CAP, rapid_only: bool = False) -> OracleResult:
    """Maximum coverage over all feasible designs (first maximiser in enumeration order)."""
    best_val, best = -1.0, None
    count = 0
    for design in enumerate_designs(inst, cap, rapid_only=rapid_only):
        count += 1
        val, routes = evaluate_design(inst, design)
        if val > best_val + 1e-9:
            best_val, best = val, (design, routes)
    if best is None:
        return OracleResult(0.0, None, 0)
    return OracleResult(best_val, _to_solution(inst, *best), count, best[0])


@dataclass
class SequentialOracleResult:
    stage1_objective: float
    stage1_optima: list[LineDesign]
    objective: float
    worst_objective: float
    solution: DesignSolution | None


def solve_sequential_exact(inst: TransitInstance, cap: int = DEFAULT_CAP) -> SequentialOracleResult:
    """Two-stage baseline: best rapid line alone, then the best slow refit.

    ``objective`` follows the first stage-one optimum in enumeration order;
    ``worst_objective`` is the minimum over all stage-one optima.
    """
    stage1 = []
    best1 = -1.0
    for design in enumerate_designs(inst, cap, rapid_only=True):
        val, _ = evaluate_design(inst, design)
        if val > best1 + 1e-9:
            best1, stage1 = val, [design.rapid]
        elif abs(val - best1) <= 1e-9:
            stage1.append(design.rapid)
    slow = list(slow_designs(inst))
    outcomes = []
    for rapid in stage1:
        best_val, best = -1.0, None
        for s in slow:
            design = EnumeratedDesign(rapid, s)
            val, routes = evaluate_design(inst, design)
            if val > best_val + 1e-9:
                best_val, best = val, (design, routes)
        outcomes.append((best_val, best))
    if not outcomes or outcomes[0][1] is None:
        return SequentialOracleResult(max(best1, 0.0), stage1, 0.0, 0.0, None)
    first_val, first = outcomes[0]
    return SequentialOracleResult(best1, stage1, first_val, min(v for v, _ in outcomes),
                                  _to_solution(inst, *first))
