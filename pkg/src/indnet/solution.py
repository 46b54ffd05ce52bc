"""Design solutions: extraction from MILP values and independent feasibility checks."""
from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field

import networkx as nx
import numpy as np

from .formulation import MilpModel, VarKey
from .instance import RAPID, SLOW, TransitInstance

log = logging.getLogger(__name__)

INT_TOL = 1e-6
FEAS_TOL = 1e-6


@dataclass(frozen=True)
class Leg:
    """One piece of a public route.

    ``kind`` is ``walk_in``, ``ride``, ``transfer`` or ``walk_out``.  ``mode``
    is the ridden/walked-to mode, or ``SR``/``RS`` for transfers.  Rides list
    their node sequence and arc ids.
    """

    kind: str
    mode: str
    nodes: tuple[int, ...]
    arcs: tuple[int, ...] = ()
    time: float = 0.0


@dataclass(frozen=True)
class PairRoute:
    pair: int
    covered: bool
    legs: tuple[Leg, ...] = ()
    public_time: float | None = None

    @property
    def category(self) -> str | None:
        if not self.covered:
            return None
        modes = {leg.mode for leg in self.legs if leg.kind == "ride"}
        if modes == {RAPID}:
            return "R"
        if modes == {SLOW}:
            return "S"
        return "RS"


@dataclass(frozen=True)
class CoverageStats:
    demand_R: float = 0.0
    demand_S: float = 0.0
    demand_RS: float = 0.0
    pairs_R: int = 0
    pairs_S: int = 0
    pairs_RS: int = 0


@dataclass
class DesignSolution:
    rapid_edges: tuple[int, ...] = ()
    rapid_stops: tuple[int, ...] = ()
    rapid_nonstops: tuple[int, ...] = ()
    slow_edges: tuple[int, ...] = ()
    slow_stops: tuple[int, ...] = ()
    routes: tuple[PairRoute, ...] = ()
    objective: float = 0.0
    stats: CoverageStats = field(default_factory=CoverageStats)

    def rapid_design(self) -> dict:
        return {"edges": list(self.rapid_edges), "stops": list(self.rapid_stops),
                "nonstops": list(self.rapid_nonstops)}

    def route(self, pair: int) -> PairRoute | None:
        for r in self.routes:
            if r.pair == pair:
                return r
        return None

    def to_dict(self) -> dict:
        return {
            "rapid_edges": list(self.rapid_edges),
            "rapid_stops": list(self.rapid_stops),
            "rapid_nonstops": list(self.rapid_nonstops),
            "slow_edges": list(self.slow_edges),
            "slow_stops": list(self.slow_stops),
            "objective": self.objective,
            "stats": asdict(self.stats),
            "routes": [
                {"pair": r.pair, "covered": r.covered, "public_time": r.public_time,
                 "category": r.category,
                 "legs": [{"kind": l.kind, "mode": l.mode, "nodes": list(l.nodes),
                           "arcs": list(l.arcs), "time": l.time} for l in r.legs]}
                for r in self.routes
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DesignSolution":
        routes = tuple(
            PairRoute(r["pair"], r["covered"],
                      tuple(Leg(l["kind"], l["mode"], tuple(l["nodes"]), tuple(l.get("arcs", ())),
                                l.get("time", 0.0)) for l in r.get("legs", ())),
                      r.get("public_time"))
            for r in doc.get("routes", ()))
        return cls(tuple(doc.get("rapid_edges", ())), tuple(doc.get("rapid_stops", ())),
                   tuple(doc.get("rapid_nonstops", ())), tuple(doc.get("slow_edges", ())),
                   tuple(doc.get("slow_stops", ())), routes, doc.get("objective", 0.0),
                   CoverageStats(**doc.get("stats", {})))


class ExtractionError(ValueError):
    """Column values are not a usable integral feasible solution."""


def coverage_stats(inst: TransitInstance, routes) -> CoverageStats:
    demand = {d.id: d.demand for d in inst.demands}
    acc = {"R": [0.0, 0], "S": [0.0, 0], "RS": [0.0, 0]}
    for r in routes:
        c = r.category
        if c is not None:
            acc[c][0] += demand[r.pair]
            acc[c][1] += 1
    return CoverageStats(acc["R"][0], acc["S"][0], acc["RS"][0], acc["R"][1], acc["S"][1], acc["RS"][1])


def route_time(inst: TransitInstance, legs, rapid_stops, slow_stops) -> float:
    """Public trip time of a leg list under the given stop sets."""
    p = inst.params
    t = p.boarding_time
    rapid_stops, slow_stops = set(rapid_stops), set(slow_stops)
    arcs = inst.arcs
    for leg in legs:
        if leg.kind in ("walk_in", "walk_out"):
            t += leg.time
        elif leg.kind == "transfer":
            t += p.transfer_time_SR if leg.mode == "SR" else p.transfer_time_RS
        else:
            stops = rapid_stops if leg.mode == RAPID else slow_stops
            for a in leg.arcs:
                arc = arcs[a]
                t += arc.traverse_time
                if arc.tail in stops:
                    t += p.stop_time(leg.mode)
    return t


def build_solution(inst: TransitInstance, rapid_edges, rapid_stops, rapid_nonstops,
                   slow_edges, slow_stops, routes: dict[int, tuple[Leg, ...] | None]) -> DesignSolution:
    """Assemble a solution; ``routes`` maps pair id to legs (``None`` = uncovered)."""
    prs = []
    for d in inst.demands:
        legs = routes.get(d.id)
        if legs:
            prs.append(PairRoute(d.id, True, tuple(legs),
                                 route_time(inst, legs, rapid_stops, slow_stops)))
        else:
            prs.append(PairRoute(d.id, False))
    demand = {d.id: d.demand for d in inst.demands}
    objective = float(sum(demand[r.pair] for r in prs if r.covered))
    return DesignSolution(tuple(sorted(rapid_edges)), tuple(sorted(rapid_stops)),
                          tuple(sorted(rapid_nonstops)), tuple(sorted(slow_edges)),
                          tuple(sorted(slow_stops)), tuple(prs), objective,
                          coverage_stats(inst, prs))


def _on(values: np.ndarray, model: MilpModel, kind: str, *ids) -> bool:
    key_ok = model.has(kind, *ids)
    return key_ok and values[model.col(kind, *ids)] > 0.5


def extract_solution(inst: TransitInstance, model: MilpModel, values) -> DesignSolution:
    """Decode integral column values of a model built by :func:`build_ind`.

    Flow circulations disjoint from (or hanging off) the origin-destination path
    are discarded; the route is the walk from the boarding station to the
    alighting station with repeated states short-cut.
    """
    x = np.asarray(values, dtype=float)
    if x.shape != (model.n,):
        raise ExtractionError("value vector length does not match the model")
    frac = np.abs(x - np.round(x))
    if np.any(frac[model.integer] > INT_TOL):
        j = int(np.argmax(np.where(model.integer, frac, 0)))
        raise ExtractionError(f"non-integral value {x[j]:.6g} for {model.keys[j]}")
    viol = model.violated_rows(x, FEAS_TOL)
    bviol = np.flatnonzero((x < model.lb - FEAS_TOL) | (x > model.ub + FEAS_TOL))
    if viol or bviol.size:
        what = str(model.tags[viol[0]]) if viol else str(model.keys[int(bviol[0])])
        raise ExtractionError(f"values violate {what}")
    x = np.round(x)
    use_slow = model.has("x_S", inst.slow_edges[0]) if inst.slow_edges else False
    rapid_edges = [e for e in inst.rapid_edges if _on(x, model, "x_R", e)]
    rapid_stops = [i for i in inst.rapid_nodes if _on(x, model, "z_R", i)]
    rapid_nonstops = [i for i in inst.rapid_nodes if _on(x, model, "y_R", i)]
    slow_edges = [e for e in inst.slow_edges if _on(x, model, "x_S", e)] if use_slow else []
    slow_stops = [k for k in inst.slow_nodes if _on(x, model, "z_S", k)] if use_slow else []
    routes = {}
    for d in inst.demands:
        if not model.has("f", d.id) or x[model.col("f", d.id)] < 0.5:
            routes[d.id] = None
            continue
        routes[d.id] = _trace_route(inst, model, x, d, use_slow)
    return build_solution(inst, rapid_edges, rapid_stops, rapid_nonstops, slow_edges,
                          slow_stops, routes)


def model_values(inst: TransitInstance, model: MilpModel, sol: DesignSolution) -> np.ndarray:
    """Column values encoding ``sol`` (design plus each covered route) in ``model``.

    Columns absent from ``model`` (for example projected flows) are skipped.
    """
    x = np.zeros(model.n)

    def put(kind, *ids):
        j = model.index.get(VarKey(kind, tuple(ids)))
        if j is not None:
            x[j] = 1.0

    for e in sol.rapid_edges:
        put("x_R", e)
    for e in sol.slow_edges:
        put("x_S", e)
    for i in sol.rapid_stops:
        put("z_R", i)
    for i in sol.rapid_nonstops:
        put("y_R", i)
    for k in sol.slow_stops:
        put("z_S", k)
    stops = {RAPID: set(sol.rapid_stops), SLOW: set(sol.slow_stops)}
    for r in sol.routes:
        if not r.covered:
            continue
        w = r.pair
        put("f", w)
        for leg in r.legs:
            sfx = "R" if leg.mode == RAPID else "S"
            if leg.kind == "walk_in":
                put(f"vO_{sfx}", w, leg.nodes[0])
            elif leg.kind == "walk_out":
                put(f"vD_{sfx}", w, leg.nodes[0])
            elif leg.kind == "transfer":
                put(f"f{leg.mode}", w, leg.nodes[0])
            else:
                for a in leg.arcs:
                    put(f"f{sfx}", w, a)
                    if inst.arcs[a].tail in stops[leg.mode]:
                        put(f"h{sfx}", w, a)
    return x


def _trace_route(inst: TransitInstance, model: MilpModel, x, d, use_slow) -> tuple[Leg, ...]:
    w = d.id
    modes = (RAPID, SLOW) if use_slow else (RAPID,)
    start = [(k, m) for m in modes for k in inst.mode_nodes(m)
             if _on(x, model, f"vO_{'R' if m == RAPID else 'S'}", w, k)]
    end = [(k, m) for m in modes for k in inst.mode_nodes(m)
           if _on(x, model, f"vD_{'R' if m == RAPID else 'S'}", w, k)]
    if len(start) != 1 or len(end) != 1:
        raise ExtractionError(f"pair {w}: expected one boarding and one alighting walk link")
    # moves out of each (node, mode) state
    moves: dict = {}
    for m in modes:
        kind = "fR" if m == RAPID else "fS"
        for a in inst.mode_arcs(m):
            if _on(x, model, kind, w, a.id):
                moves.setdefault((a.tail, m), []).append(("arc", a.id, (a.head, m)))
    if use_slow:
        for k in inst.transfer_nodes:
            if _on(x, model, "fSR", w, k):
                moves.setdefault((k, SLOW), []).append(("SR", k, (k, RAPID)))
            if _on(x, model, "fRS", w, k):
                moves.setdefault((k, RAPID), []).append(("RS", k, (k, SLOW)))
    for v in moves.values():
        v.sort(key=lambda t: (t[0] != "arc", t[1]))
    # Hierholzer-style walk from the source consumes circulations too
    state = start[0]
    seq = [(state, None)]
    used = Counter()
    stack = [state]
    path_states = []
    while True:
        avail = [mv for mv in moves.get(state, []) if used[(state, mv)] == 0]
        if not avail:
            break
        mv = avail[0]
        used[(state, mv)] += 1
        state = mv[2]
        seq.append((state, mv))
        if len(seq) > 10 * (len(inst.arcs) + len(inst.nodes) + 2):
            raise ExtractionError(f"pair {w}: flow does not decompose")
    if state != end[0]:
        # circulations may have been entered first; shortcut via graph search
        G = nx.DiGraph()
        for s, mvs in moves.items():
            for mv in mvs:
                G.add_edge(s, mv[2], move=mv)
        try:
            nodes = nx.shortest_path(G, start[0], end[0])
        except (nx.NetworkXNoPath, nx.NodeNotFound):
            raise ExtractionError(f"pair {w}: no origin-destination path in the flow") from None
        seq = [(nodes[0], None)] + [(b, G.edges[a, b]["move"]) for a, b in zip(nodes, nodes[1:])]
    else:
        # shortcut repeated states so the route is simple
        first_seen = {}
        out = []
        for st, mv in seq:
            if st in first_seen:
                out = out[: first_seen[st] + 1]
                first_seen = {s: i for i, (s, _) in enumerate(out)}
                continue
            first_seen[st] = len(out)
            out.append((st, mv))
        seq = out
    return _legs_from_moves(inst, d, seq)


def _legs_from_moves(inst: TransitInstance, d, seq) -> tuple[Leg, ...]:
    (k0, m0), _ = seq[0]
    legs = [Leg("walk_in", m0, (k0,), (), inst.walk_time(d.origin, k0, m0))]
    cur_nodes, cur_arcs, cur_mode = [k0], [], m0
    for (k, m), mv in seq[1:]:
        if mv[0] == "arc":
            cur_nodes.append(k)
            cur_arcs.append(mv[1])
        else:
            if cur_arcs:
                legs.append(_ride(inst, cur_mode, cur_nodes, cur_arcs))
            legs.append(Leg("transfer", mv[0], (k,)))
            cur_nodes, cur_arcs, cur_mode = [k], [], m
    if cur_arcs:
        legs.append(_ride(inst, cur_mode, cur_nodes, cur_arcs))
    (kn, mn), _ = seq[-1]
    legs.append(Leg("walk_out", mn, (kn,), (), inst.walk_time(d.dest, kn, mn)))
    return tuple(legs)


def _ride(inst, mode, nodes, arcs) -> Leg:
    return Leg("ride", mode, tuple(nodes), tuple(arcs),
               float(sum(inst.arcs[a].traverse_time for a in arcs)))


# -- feasibility ----------------------------------------------------------------------

@dataclass
class FeasibilityReport:
    families: dict[str, str | None]

    @property
    def ok(self) -> bool:
        return all(v is None for v in self.families.values())

    def failures(self) -> dict[str, str]:
        return {k: v for k, v in self.families.items() if v is not None}

    def __str__(self) -> str:
        return "\n".join(f"{k}: {'pass' if v is None else 'FAIL ' + v}" for k, v in self.families.items())


def _line_checks(inst: TransitInstance, mode: str, edges, stops, nonstops, rep: dict):
    pre = "rapid" if mode == RAPID else "slow"
    edges, stops, nonstops = set(edges), set(stops), set(nonstops)
    O, D = set(inst.origins(mode)), set(inst.dests(mode))
    fails = []
    bad = [e for e in edges if not inst.edges[e].in_mode(mode)]
    if bad:
        fails.append(f"edge {bad[0]} is not a {mode} edge")
    bad = [i for i in stops | nonstops if not inst.nodes[i].in_mode(mode)]
    if bad:
        fails.append(f"node {bad[0]} is not a {mode} node")
    rep[f"{pre}_membership"] = fails[0] if fails else None
    # endpoints of chosen edges must be stations
    miss = [(e, i) for e in sorted(edges) for i in inst.edges[e].endpoints if i not in stops | nonstops]
    rep[f"{pre}_links"] = f"edge {miss[0][0]} endpoint {miss[0][1]} is not a station" if miss else None
    both = sorted(stops & nonstops)
    rep[f"{pre}_exclusive"] = f"node {both[0]} is both stop and non-stop" if both else None
    deg = Counter(i for e in edges for i in inst.edges[e].endpoints)
    msg = None
    if sum(1 for o in O if o in stops) != 1:
        msg = "exactly one origin must be a stop"
    elif sum(1 for o in D if o in stops) != 1:
        msg = "exactly one destination must be a stop"
    elif sum(deg[o] for o in O) != 1:
        msg = "exactly one chosen edge must touch the origin set"
    elif sum(deg[o] for o in D) != 1:
        msg = "exactly one chosen edge must touch the destination set"
    rep[f"{pre}_endpoints"] = msg
    msg = None
    for k in sorted(set(inst.mode_nodes(mode)) - O - D):
        expect = 2 * ((k in stops) + (k in nonstops))
        if deg[k] != expect:
            msg = f"node {k} has degree {deg[k]}, expected {expect}"
            break
    rep[f"{pre}_degree"] = msg
    G = nx.Graph()
    G.add_nodes_from(stops | nonstops)
    G.add_edges_from(inst.edges[e].endpoints for e in edges)
    msg = None
    if len(edges) + 1 != len(stops) + len(nonstops):
        msg = f"{len(edges)} edges but {len(stops) + len(nonstops)} stations"
    elif G.number_of_nodes() and not nx.is_forest(G):
        msg = "chosen edges contain a cycle"
    rep[f"{pre}_forest"] = msg
    msg = None
    if not edges:
        msg = "no edges chosen"
    elif not nx.is_connected(G) or any(dg > 2 for _, dg in G.degree()) or not nx.is_tree(G):
        msg = "chosen edges are not a single simple path"
    else:
        ends = [i for i, dg in G.degree() if dg == 1]
        if not ((ends[0] in O and ends[1] in D) or (ends[1] in O and ends[0] in D)):
            msg = "path does not join the origin and destination sets"
        elif any(i not in stops for i in ends):
            msg = "path ends must be stops"
    rep[f"{pre}_chain"] = msg


def rapid_design_violations(inst: TransitInstance, design: dict) -> list[str]:
    """Problems with a rapid design (edges/stops/non-stops) on its own."""
    rep: dict = {}
    _line_checks(inst, RAPID, design["edges"], design["stops"], design.get("nonstops", ()), rep)
    if len(design["edges"]) > inst.params.max_rapid_edges:
        rep["budget"] = "rapid budget exceeded"
    rep["spacing"] = _spacing_violation(inst, design["stops"])
    return [f"{k}: {v}" for k, v in rep.items() if v is not None]


def _spacing_violation(inst, stops) -> str | None:
    for i, j in itertools.combinations(sorted(stops), 2):
        if inst.node_distance(i, j) <= inst.params.min_station_spacing:
            return f"stops {i} and {j} are {inst.node_distance(i, j):.1f} m apart"
    return None


def check_feasibility(inst: TransitInstance, sol: DesignSolution, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Re-verify every constraint family directly on a solution."""
    p = inst.params
    rep: dict[str, str | None] = {}
    msg = None
    if len(sol.rapid_edges) > p.max_rapid_edges:
        msg = f"{len(sol.rapid_edges)} rapid edges > {p.max_rapid_edges}"
    elif len(sol.slow_edges) > p.max_slow_edges:
        msg = f"{len(sol.slow_edges)} slow edges > {p.max_slow_edges}"
    rep["budget"] = msg
    _line_checks(inst, RAPID, sol.rapid_edges, sol.rapid_stops, sol.rapid_nonstops, rep)
    _line_checks(inst, SLOW, sol.slow_edges, sol.slow_stops, (), rep)
    overlap = sum(1 for e in sol.slow_edges if inst.edges[e].on_old_slow_line)
    rep["old_line"] = (None if overlap >= p.min_unchanged_slow_edges
                       else f"{overlap} old-line edges < {p.min_unchanged_slow_edges}")
    rep["spacing"] = _spacing_violation(inst, sol.rapid_stops)
    rep.update(_route_checks(inst, sol, tol))
    demand = {d.id: d.demand for d in inst.demands}
    covered = sum(demand[r.pair] for r in sol.routes if r.covered)
    stats = coverage_stats(inst, sol.routes)
    msg = None
    if abs(covered - sol.objective) > tol:
        msg = f"objective {sol.objective} != covered demand {covered}"
    elif abs(stats.demand_R + stats.demand_S + stats.demand_RS - sol.objective) > tol:
        msg = "coverage statistics do not add up to the objective"
    elif {r.pair for r in sol.routes} != set(demand):
        msg = "routes do not list every pair exactly once"
    rep["objective"] = msg
    return FeasibilityReport(rep)


def _route_checks(inst: TransitInstance, sol: DesignSolution, tol: float) -> dict:
    p = inst.params
    stops = {RAPID: set(sol.rapid_stops), SLOW: set(sol.slow_stops)}
    chosen = {RAPID: set(sol.rapid_edges), SLOW: set(sol.slow_edges)}
    util = {d.id: d for d in inst.demands}
    res = {"walking": None, "rides": None, "transfers": None, "edge_use": None, "utility": None}

    def fail(fam, text):
        if res[fam] is None:
            res[fam] = text

    for r in sol.routes:
        if not r.covered:
            continue
        d = util[r.pair]
        legs = r.legs
        if len(legs) < 3 or legs[0].kind != "walk_in" or legs[-1].kind != "walk_out":
            fail("walking", f"pair {r.pair}: route must start and end with a walk")
            continue
        for leg, centroid in ((legs[0], d.origin), (legs[-1], d.dest)):
            k = leg.nodes[0]
            wt = inst.walk_time(centroid, k, leg.mode)
            if wt is None:
                fail("walking", f"pair {r.pair}: no walk link to {leg.mode} node {k}")
            elif k not in stops[leg.mode]:
                fail("walking", f"pair {r.pair}: walks to node {k} which is not a {leg.mode} stop")
            elif abs(wt - leg.time) > 1e-9:
                fail("walking", f"pair {r.pair}: walk time mismatch at node {k}")
        mode, node = legs[0].mode, legs[0].nodes[0]
        sr = rs = 0
        seen_edges = Counter()
        rides = 0
        for leg in legs[1:-1]:
            if leg.kind == "ride":
                rides += 1
                if leg.mode != mode or leg.nodes[0] != node:
                    fail("rides", f"pair {r.pair}: ride does not continue from node {node} in {mode}")
                for a_id, (u, v) in zip(leg.arcs, zip(leg.nodes, leg.nodes[1:])):
                    a = inst.arcs[a_id]
                    if a.mode != leg.mode or a.tail != u or a.head != v:
                        fail("rides", f"pair {r.pair}: arc {a_id} does not match the ride")
                    if a.edge not in chosen[leg.mode]:
                        fail("rides", f"pair {r.pair}: uses unbuilt {leg.mode} edge {a.edge}")
                    seen_edges[a.edge] += 1
                node = leg.nodes[-1]
            elif leg.kind == "transfer":
                k = leg.nodes[0]
                if k != node or not inst.nodes[k].is_transfer:
                    fail("transfers", f"pair {r.pair}: transfer at node {k} not on the route or not a transfer node")
                if k not in stops[RAPID] or k not in stops[SLOW]:
                    fail("transfers", f"pair {r.pair}: transfer at node {k} without stops of both modes")
                if leg.mode == "SR":
                    sr += 1
                    if mode != SLOW:
                        fail("transfers", f"pair {r.pair}: SR transfer while riding {mode}")
                    mode = RAPID
                else:
                    rs += 1
                    if mode != RAPID:
                        fail("transfers", f"pair {r.pair}: RS transfer while riding {mode}")
                    mode = SLOW
            else:
                fail("rides", f"pair {r.pair}: unexpected leg {leg.kind}")
        if rides == 0:
            fail("rides", f"pair {r.pair}: covered without riding")
        if legs[-1].mode != mode or legs[-1].nodes[0] != node:
            fail("rides", f"pair {r.pair}: alighting station does not match the last ride")
        if sr > 1 or rs > 1:
            fail("transfers", f"pair {r.pair}: {sr} SR and {rs} RS transfers")
        dup = [e for e, c in seen_edges.items() if c > 1]
        if dup:
            fail("edge_use", f"pair {r.pair}: edge {dup[0]} used more than once")
        t = route_time(inst, legs, stops[RAPID], stops[SLOW])
        if t > d.private_utility + tol:
            fail("utility", f"pair {r.pair}: public time {t:.4f} > private utility {d.private_utility:.4f}")
        if r.public_time is not None and abs(t - r.public_time) > 1e-6:
            fail("utility", f"pair {r.pair}: reported time {r.public_time} != recomputed {t}")
    return res
