"""Instance data model: networks, centroids, demand and parameters.

Instances are immutable once validated.  Lengths are meters, times minutes,
speeds km/h.  Use :func:`load_instance` / :func:`save_instance` for files and
:func:`build_instance` to assemble one in code.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable

import jsonschema

RAPID = "rapid"
SLOW = "slow"
MODES = (RAPID, SLOW)


class InstanceError(ValueError):
    """Schema or invariant violation in instance data."""


@dataclass(frozen=True)
class InstanceParams:
    """Budgets, thresholds, speeds and fixed times (defaults: Seville study)."""

    max_rapid_edges: int = 11
    max_slow_edges: int = 16
    min_unchanged_slow_edges: int = 2
    min_station_spacing: float = 500.0
    max_walk_rapid: float = 400.0
    max_walk_slow: float = 300.0
    speed_walk: float = 5.0
    speed_rapid: float = 70.0
    speed_slow: float = 25.0
    speed_private: float = 30.0
    transfer_time_RS: float = 9.5
    transfer_time_SR: float = 5.5
    stop_time_rapid: float = 0.5
    stop_time_slow: float = 1.0
    wait_time: float = 2.0
    private_utility_factor: float = 2.0
    enable_shape_constraints: bool = False

    def speed(self, mode: str) -> float:
        return self.speed_rapid if mode == RAPID else self.speed_slow

    def max_walk(self, mode: str) -> float:
        return self.max_walk_rapid if mode == RAPID else self.max_walk_slow

    def stop_time(self, mode: str) -> float:
        return self.stop_time_rapid if mode == RAPID else self.stop_time_slow

    @property
    def boarding_time(self) -> float:
        """Constant charged once per public trip: wait minus half a rapid dwell."""
        return self.wait_time - 0.5 * self.stop_time_rapid


@dataclass(frozen=True)
class Node:
    id: int
    position: tuple[float, float]
    in_rapid: bool
    in_slow: bool
    rapid_origin: bool = False
    rapid_dest: bool = False
    slow_origin: bool = False
    slow_dest: bool = False

    @property
    def is_transfer(self) -> bool:
        return self.in_rapid and self.in_slow

    def in_mode(self, mode: str) -> bool:
        return self.in_rapid if mode == RAPID else self.in_slow


@dataclass(frozen=True)
class Edge:
    id: int
    endpoints: tuple[int, int]
    in_rapid: bool
    in_slow: bool
    length: float
    on_old_slow_line: bool = False

    def in_mode(self, mode: str) -> bool:
        return self.in_rapid if mode == RAPID else self.in_slow


@dataclass(frozen=True)
class Arc:
    id: int
    edge: int
    tail: int
    head: int
    mode: str
    traverse_time: float


@dataclass(frozen=True)
class Centroid:
    id: int
    position: tuple[float, float]


@dataclass(frozen=True)
class DemandPair:
    id: int
    origin: int
    dest: int
    demand: float
    private_utility: float


@dataclass(frozen=True)
class WalkLink:
    centroid: int
    station: int
    mode: str
    walk_time: float


def walk_speed_m_per_min(params: InstanceParams) -> float:
    return params.speed_walk * 1000.0 / 60.0


def _dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


@dataclass(frozen=True)
class TransitInstance:
    params: InstanceParams
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    centroids: tuple[Centroid, ...]
    demands: tuple[DemandPair, ...]
    walk_links: tuple[WalkLink, ...]
    arcs: tuple[Arc, ...] = ()
    name: str = "instance"
    explicit_walk_links: bool = field(default=False, compare=False)
    explicit_utilities: frozenset = field(default=frozenset(), compare=False)

    # -- node and edge sets ---------------------------------------------------
    @cached_property
    def rapid_nodes(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.in_rapid)

    @cached_property
    def slow_nodes(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.in_slow)

    @cached_property
    def transfer_nodes(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.is_transfer)

    def mode_nodes(self, mode: str) -> tuple[int, ...]:
        return self.rapid_nodes if mode == RAPID else self.slow_nodes

    @cached_property
    def rapid_edges(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges if e.in_rapid)

    @cached_property
    def slow_edges(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges if e.in_slow)

    def mode_edges(self, mode: str) -> tuple[int, ...]:
        return self.rapid_edges if mode == RAPID else self.slow_edges

    @cached_property
    def shared_edges(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.edges if e.in_rapid and e.in_slow)

    def origins(self, mode: str) -> tuple[int, ...]:
        attr = "rapid_origin" if mode == RAPID else "slow_origin"
        return tuple(n.id for n in self.nodes if getattr(n, attr))

    def dests(self, mode: str) -> tuple[int, ...]:
        attr = "rapid_dest" if mode == RAPID else "slow_dest"
        return tuple(n.id for n in self.nodes if getattr(n, attr))

    def mode_arcs(self, mode: str) -> tuple[Arc, ...]:
        return tuple(a for a in self.arcs if a.mode == mode)

    @cached_property
    def _incidence(self) -> dict:
        inc: dict = {}
        for e in self.edges:
            for mode in MODES:
                if e.in_mode(mode):
                    for i in e.endpoints:
                        inc.setdefault((mode, i), []).append(e.id)
        return {k: tuple(v) for k, v in inc.items()}

    def incident_edges(self, mode: str, node: int) -> tuple[int, ...]:
        return self._incidence.get((mode, node), ())

    @cached_property
    def _arc_adjacency(self) -> tuple[dict, dict]:
        out: dict = {}
        inn: dict = {}
        for a in self.arcs:
            out.setdefault((a.mode, a.tail), []).append(a)
            inn.setdefault((a.mode, a.head), []).append(a)
        return ({k: tuple(v) for k, v in out.items()}, {k: tuple(v) for k, v in inn.items()})

    def out_arcs(self, mode: str, node: int) -> tuple[Arc, ...]:
        return self._arc_adjacency[0].get((mode, node), ())

    def in_arcs(self, mode: str, node: int) -> tuple[Arc, ...]:
        return self._arc_adjacency[1].get((mode, node), ())

    @cached_property
    def arcs_of_edge(self) -> dict:
        """(mode, edge id) -> (forward arc, backward arc)."""
        res: dict = {}
        for a in self.arcs:
            res.setdefault((a.mode, a.edge), []).append(a)
        return {k: tuple(v) for k, v in res.items()}

    # -- geometry and walking -----------------------------------------------------
    def node_distance(self, i: int, j: int) -> float:
        return _dist(self.nodes[i].position, self.nodes[j].position)

    def centroid_node_distance(self, c: int, k: int) -> float:
        return _dist(self.centroids[c].position, self.nodes[k].position)

    @cached_property
    def _links(self) -> dict:
        return {(w.centroid, w.station, w.mode): w.walk_time for w in self.walk_links}

    def walk_time(self, centroid: int, station: int, mode: str) -> float | None:
        """Walk time of an existing link, or ``None`` if out of range."""
        return self._links.get((centroid, station, mode))

    def walk_distance(self, centroid: int, station: int, mode: str) -> float:
        """Distance used by walking bounds (from the link if present)."""
        t = self.walk_time(centroid, station, mode)
        if t is not None:
            return t * walk_speed_m_per_min(self.params)
        return self.centroid_node_distance(centroid, station)

    def nominal_walk_time(self, centroid: int, station: int) -> float:
        return self.centroid_node_distance(centroid, station) / walk_speed_m_per_min(self.params)

    @property
    def total_demand(self) -> float:
        return float(sum(d.demand for d in self.demands))

    def summary(self) -> dict:
        return {
            "name": self.name,
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "rapid_nodes": len(self.rapid_nodes),
            "slow_nodes": len(self.slow_nodes),
            "transfer_nodes": len(self.transfer_nodes),
            "rapid_edges": len(self.rapid_edges),
            "slow_edges": len(self.slow_edges),
            "arcs": len(self.arcs),
            "centroids": len(self.centroids),
            "pairs": len(self.demands),
            "walk_links": len(self.walk_links),
            "total_demand": self.total_demand,
        }


# -- derivations ----------------------------------------------------------------

def derive_arcs(params: InstanceParams, nodes, edges) -> tuple[Arc, ...]:
    """Two opposite arcs per edge and mode, rapid arcs first."""
    arcs = []
    for mode in MODES:
        metres_per_min = params.speed(mode) * 1000.0 / 60.0
        for e in edges:
            if not e.in_mode(mode):
                continue
            i, j = e.endpoints
            t = e.length / metres_per_min
            arcs.append(Arc(len(arcs), e.id, i, j, mode, t))
            arcs.append(Arc(len(arcs), e.id, j, i, mode, t))
    return tuple(arcs)


def derive_walk_links(instance: TransitInstance) -> tuple[WalkLink, ...]:
    """Links from every centroid to each station within the mode's walking range."""
    p = instance.params
    speed = walk_speed_m_per_min(p)
    links = []
    for c in instance.centroids:
        for mode in MODES:
            limit = p.max_walk(mode)
            for k in instance.mode_nodes(mode):
                d = _dist(c.position, instance.nodes[k].position)
                if d <= limit:
                    links.append(WalkLink(c.id, k, mode, d / speed))
    return tuple(links)


def private_utility(params: InstanceParams, origin, dest) -> float:
    d = _dist(origin, dest)
    if d <= 0:
        raise InstanceError("origin and destination centroids coincide")
    return params.private_utility_factor * d / (params.speed_private * 1000.0 / 60.0)


def compute_private_utilities(instance: TransitInstance) -> tuple[DemandPair, ...]:
    """Private-mode utility of each pair: factor times straight-line drive time."""
    cs = instance.centroids
    return tuple(
        replace(d, private_utility=private_utility(instance.params, cs[d.origin].position,
                                                   cs[d.dest].position))
        for d in instance.demands)


def filter_by_demand(instance: TransitInstance, threshold: float) -> TransitInstance:
    """Keep pairs with demand at least ``threshold`` (zero demand always dropped)."""
    if threshold < 0:
        raise InstanceError("threshold must be non-negative")
    kept = tuple(d for d in instance.demands if d.demand >= threshold and d.demand > 0)
    return replace(instance, demands=kept)


# -- validation -------------------------------------------------------------------

def _check(cond: bool, message: str):
    if not cond:
        raise InstanceError(message)


def validate(inst: TransitInstance) -> None:
    """Check structural invariants; raises :class:`InstanceError` naming the breach."""
    p = inst.params
    for f in fields(InstanceParams):
        v = getattr(p, f.name)
        if f.name == "enable_shape_constraints":
            continue
        if f.name == "min_unchanged_slow_edges":
            _check(v >= 0, "params.min_unchanged_slow_edges must be non-negative")
        else:
            _check(v > 0, f"params.{f.name} must be positive")
    for idx, n in enumerate(inst.nodes):
        _check(n.id == idx, f"node ids must be dense 0..n-1 (found {n.id} at position {idx})")
        _check(n.in_rapid or n.in_slow, f"node {n.id} belongs to no mode")
        _check(not (n.rapid_origin or n.rapid_dest) or n.in_rapid,
               f"node {n.id}: rapid origin/destination flag requires in_rapid")
        _check(not (n.slow_origin or n.slow_dest) or n.in_slow,
               f"node {n.id}: slow origin/destination flag requires in_slow")
    nn = len(inst.nodes)
    seen = set()
    for idx, e in enumerate(inst.edges):
        _check(e.id == idx, f"edge ids must be dense 0..m-1 (found {e.id} at position {idx})")
        i, j = e.endpoints
        _check(0 <= i < nn and 0 <= j < nn, f"edge {e.id} references an unknown node")
        _check(i != j, f"edge {e.id} is a self-loop")
        key = (min(i, j), max(i, j))
        _check(key not in seen, f"edge {e.id} duplicates endpoints {key}")
        seen.add(key)
        _check(e.in_rapid or e.in_slow, f"edge {e.id} belongs to no mode")
        _check(e.length > 0, f"edge {e.id} must have positive length")
        if e.in_rapid:
            _check(inst.nodes[i].in_rapid and inst.nodes[j].in_rapid,
                   f"edge {e.id} is rapid but an endpoint lacks in_rapid")
        if e.in_slow:
            _check(inst.nodes[i].in_slow and inst.nodes[j].in_slow,
                   f"edge {e.id} is slow but an endpoint lacks in_slow")
        _check(not e.on_old_slow_line or e.in_slow,
               f"edge {e.id} is on the old slow line but not in_slow")
    for idx, c in enumerate(inst.centroids):
        _check(c.id == idx, f"centroid ids must be dense 0..c-1 (found {c.id} at position {idx})")
        for n in inst.nodes:
            _check(_dist(c.position, n.position) > 0,
                   f"centroid {c.id} coincides with node {n.id}")
    nc = len(inst.centroids)
    pair_ids = set()
    for d in inst.demands:
        _check(d.id not in pair_ids, f"duplicate demand pair id {d.id}")
        pair_ids.add(d.id)
        _check(0 <= d.origin < nc and 0 <= d.dest < nc, f"demand pair {d.id} references an unknown centroid")
        _check(d.origin != d.dest, f"demand pair {d.id} has origin equal to destination")
        _check(d.demand >= 0, f"demand pair {d.id} has negative demand")
        _check(d.private_utility > 0, f"demand pair {d.id} must have positive private_utility")
    for w in inst.walk_links:
        _check(0 <= w.centroid < nc, f"walk link references unknown centroid {w.centroid}")
        _check(0 <= w.station < nn, f"walk link references unknown station {w.station}")
        _check(w.mode in MODES, f"walk link mode must be rapid or slow, got {w.mode!r}")
        _check(inst.nodes[w.station].in_mode(w.mode),
               f"walk link to node {w.station} but node is not in mode {w.mode}")
        _check(w.walk_time > 0, "walk link walk_time must be positive")
    for mode in MODES:
        _check(len(inst.origins(mode)) > 0, f"{mode} origin set is empty")
        _check(len(inst.dests(mode)) > 0, f"{mode} destination set is empty")
    old = sum(1 for e in inst.edges if e.on_old_slow_line)
    _check(p.min_unchanged_slow_edges <= old,
           "params.min_unchanged_slow_edges exceeds the number of old slow line edges")
    _check(p.min_unchanged_slow_edges <= p.max_slow_edges,
           "params.min_unchanged_slow_edges exceeds params.max_slow_edges")
    expected = derive_arcs(p, inst.nodes, inst.edges)
    _check(inst.arcs == expected, "arc set is inconsistent with edges")


def build_instance(params: InstanceParams, nodes: Iterable[Node], edges: Iterable[Edge],
                   centroids: Iterable[Centroid], demands: Iterable[dict | DemandPair],
                   walk_links: Iterable[WalkLink] | None = None, name: str = "instance",
                   drop_zero_demand: bool = True) -> TransitInstance:
    """Assemble and validate an instance, deriving arcs, walk links and utilities.

    ``demands`` entries may be :class:`DemandPair` or dicts whose
    ``private_utility`` is optional.
    """
    nodes = tuple(sorted(nodes, key=lambda n: n.id))
    edges = tuple(sorted(edges, key=lambda e: e.id))
    centroids = tuple(sorted(centroids, key=lambda c: c.id))
    raw = [asdict(d) if isinstance(d, DemandPair) else dict(d) for d in demands]
    given = frozenset(r["id"] for r in raw if r.get("private_utility") is not None)
    pairs = []
    for r in raw:
        if drop_zero_demand and r["demand"] == 0:
            continue
        u = r.get("private_utility")
        if u is None:
            if not (0 <= r["origin"] < len(centroids) and 0 <= r["dest"] < len(centroids)):
                raise InstanceError(f"demand pair {r['id']} references an unknown centroid")
            try:
                u = private_utility(params, centroids[r["origin"]].position,
                                    centroids[r["dest"]].position)
            except InstanceError as exc:
                raise InstanceError(f"demand pair {r['id']}: {exc}") from None
        pairs.append(DemandPair(int(r["id"]), int(r["origin"]), int(r["dest"]),
                                float(r["demand"]), float(u)))
    pairs.sort(key=lambda d: d.id)
    inst = TransitInstance(params, nodes, edges, centroids, tuple(pairs), (),
                           derive_arcs(params, nodes, edges), name,
                           explicit_walk_links=walk_links is not None,
                           explicit_utilities=given)
    if walk_links is None:
        links = derive_walk_links(inst)
    else:
        links = tuple(sorted(walk_links, key=lambda w: (w.centroid, MODES.index(w.mode)
                                                         if w.mode in MODES else 2, w.station)))
    inst = replace(inst, walk_links=links)
    validate(inst)
    return inst


# -- files --------------------------------------------------------------------------

def schema() -> dict:
    text = resources.files("indnet").joinpath("schema/instance.schema.json").read_text()
    return json.loads(text)


def _schema_errors(doc) -> list[str]:
    validator = jsonschema.Draft202012Validator(schema())
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    out = []
    for e in errs:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        out.append(f"{path}: {e.message}")
    return out


def instance_from_dict(doc: dict, name: str = "instance") -> TransitInstance:
    errs = _schema_errors(doc)
    if errs:
        raise InstanceError("schema violation at " + "; ".join(errs[:5]))
    params = InstanceParams(**doc["params"])
    nodes = [Node(n["id"], tuple(n["position"]), n["in_rapid"], n["in_slow"],
                  n.get("rapid_origin", False), n.get("rapid_dest", False),
                  n.get("slow_origin", False), n.get("slow_dest", False)) for n in doc["nodes"]]
    edges = [Edge(e["id"], tuple(e["endpoints"]), e["in_rapid"], e["in_slow"], e["length"],
                  e.get("on_old_slow_line", False)) for e in doc["edges"]]
    cents = [Centroid(c["id"], tuple(c["position"])) for c in doc["centroids"]]
    links = None
    if "walk_links" in doc:
        links = [WalkLink(w["centroid"], w["station"], w["mode"], w["walk_time"])
                 for w in doc["walk_links"]]
    return build_instance(params, nodes, edges, cents, doc["demands"], links, name)


def load_instance(path: str | Path) -> TransitInstance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from None
    return instance_from_dict(doc, name=path.stem)


def instance_to_dict(inst: TransitInstance) -> dict:
    """Serializable document; derived walk links/utilities are written only if given."""
    doc = {
        "params": asdict(inst.params),
        "nodes": [{**asdict(n), "position": list(n.position)} for n in inst.nodes],
        "edges": [{**asdict(e), "endpoints": list(e.endpoints)} for e in inst.edges],
        "centroids": [{"id": c.id, "position": list(c.position)} for c in inst.centroids],
        "demands": [],
    }
    for d in inst.demands:
        rec = {"id": d.id, "origin": d.origin, "dest": d.dest, "demand": d.demand}
        if d.id in inst.explicit_utilities:
            rec["private_utility"] = d.private_utility
        doc["demands"].append(rec)
    if inst.explicit_walk_links:
        doc["walk_links"] = [asdict(w) for w in inst.walk_links]
    return doc


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_instance(inst: TransitInstance, path: str | Path) -> None:
    Path(path).write_text(canonical_json(instance_to_dict(inst)))


def with_explicit_data(inst: TransitInstance) -> TransitInstance:
    """Copy that serializes its derived walk links and utilities."""
    return replace(inst, explicit_walk_links=True,
                   explicit_utilities=frozenset(d.id for d in inst.demands))
