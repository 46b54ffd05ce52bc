"""Builds the integrated design MILP (and its two-stage variant) from an instance.

Every column is identified by a :class:`VarKey` and every row carries a
:class:`RowTag` naming its constraint family and the instance ids involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp

from .instance import RAPID, SLOW, InstanceError, TransitInstance
from .lp import LpProblem

KINDS = ("x_R", "x_S", "y_R", "z_R", "z_S", "f", "fR", "fS", "fSR", "fRS",
         "vO_R", "vO_S", "vD_R", "vD_S", "hR", "hS")

# kinds that live in the design/master space (everything except per-pair flows)
FLOW_KINDS = frozenset({"fR", "fS", "fSR", "fRS"})
DESIGN_KINDS = frozenset({"x_R", "x_S", "y_R", "z_R", "z_S"})


@dataclass(frozen=True, order=True)
class VarKey:
    """Column identifier: a variable kind plus the ids it is indexed by.

    Design kinds are indexed by an edge or node id, per-pair kinds by
    ``(pair id, arc or node id)`` and ``f`` by ``(pair id,)``.
    """

    kind: str
    ids: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.kind}({','.join(map(str, self.ids))})"

    @property
    def pair(self) -> int | None:
        if self.kind in DESIGN_KINDS:
            return None
        return self.ids[0]

    @classmethod
    def parse(cls, text: str) -> "VarKey":
        kind, rest = text.split("(", 1)
        ids = tuple(int(t) for t in rest.rstrip(")").split(",") if t)
        return cls(kind, ids)


@dataclass(frozen=True)
class RowTag:
    family: str
    ids: tuple[tuple[str, int], ...] = ()
    pair: int | None = None

    def __str__(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.ids)
        return f"{self.family}[{inner}]"


@dataclass
class MilpModel:
    """Solver-neutral sparse MILP with named columns and tagged rows."""

    keys: list[VarKey]
    lb: np.ndarray
    ub: np.ndarray
    obj: np.ndarray
    integer: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    tags: list[RowTag]
    maximize: bool = True
    name: str = "ind"
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {k: j for j, k in enumerate(self.keys)}

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def m(self) -> int:
        return len(self.tags)

    def col(self, kind: str, *ids: int) -> int:
        return self.index[VarKey(kind, tuple(ids))]

    def has(self, kind: str, *ids: int) -> bool:
        return VarKey(kind, tuple(ids)) in self.index

    def columns_of(self, kind: str) -> list[int]:
        return [j for j, k in enumerate(self.keys) if k.kind == kind]

    def rows_of(self, family: str) -> list[int]:
        return [i for i, t in enumerate(self.tags) if t.family == family]

    def to_lp(self, lb=None, ub=None) -> LpProblem:
        return LpProblem(self.A, self.senses, self.rhs, self.obj,
                         self.lb if lb is None else lb, self.ub if ub is None else ub,
                         self.maximize)

    def objective(self, x: np.ndarray) -> float:
        return float(self.obj @ x)

    def max_violation(self, x: np.ndarray) -> float:
        return self.to_lp().max_violation(np.asarray(x, dtype=float))

    def violated_rows(self, x: np.ndarray, tol: float = 1e-6) -> list[int]:
        act = self.A @ x
        bad = ((self.senses == "L") & (act > self.rhs + tol)) | \
              ((self.senses == "G") & (act < self.rhs - tol)) | \
              ((self.senses == "E") & (np.abs(act - self.rhs) > tol))
        return [int(i) for i in np.flatnonzero(bad)]

    def fixed(self, bounds: dict[int, float]) -> "MilpModel":
        """Copy with the given columns fixed to values."""
        lb, ub = self.lb.copy(), self.ub.copy()
        for j, v in bounds.items():
            lb[j] = ub[j] = v
        return MilpModel(self.keys, lb, ub, self.obj, self.integer, self.A, self.senses,
                         self.rhs, self.tags, self.maximize, self.name)

    def subset(self, cols: np.ndarray, rows: np.ndarray, name: str | None = None) -> "MilpModel":
        cols = np.asarray(cols, dtype=int)
        rows = np.asarray(rows, dtype=int)
        return MilpModel([self.keys[j] for j in cols], self.lb[cols], self.ub[cols],
                         self.obj[cols], self.integer[cols], self.A[rows][:, cols],
                         self.senses[rows], self.rhs[rows], [self.tags[i] for i in rows],
                         self.maximize, name or self.name)


class ModelBuilder:
    """Accumulates columns and rows, then freezes them into a :class:`MilpModel`."""

    def __init__(self, name: str = "ind"):
        self.name = name
        self.keys: list[VarKey] = []
        self.index: dict[VarKey, int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.integer: list[bool] = []
        self.r_idx: list[int] = []
        self.c_idx: list[int] = []
        self.vals: list[float] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.tags: list[RowTag] = []

    def var(self, kind: str, *ids: int, lb: float = 0.0, ub: float = 1.0,
            obj: float = 0.0, integer: bool = True) -> int:
        key = VarKey(kind, tuple(ids))
        if key in self.index:
            raise KeyError(f"duplicate column {key}")
        self.index[key] = len(self.keys)
        self.keys.append(key)
        self.lb.append(lb)
        self.ub.append(ub)
        self.obj.append(obj)
        self.integer.append(integer)
        return self.index[key]

    def col(self, kind: str, *ids: int) -> int:
        return self.index[VarKey(kind, tuple(ids))]

    def row(self, terms: Iterable[tuple[int, float]], sense: str, rhs: float, tag: RowTag):
        merged: dict[int, float] = {}
        for j, v in terms:
            merged[j] = merged.get(j, 0.0) + v
        merged = {j: v for j, v in merged.items() if v != 0.0}
        if not merged:
            ok = (sense == "L" and rhs >= 0) or (sense == "G" and rhs <= 0) or (sense == "E" and rhs == 0)
            if not ok:
                raise InstanceError(f"constraint {tag} has no terms and cannot be satisfied")
            return
        i = len(self.tags)
        for j in sorted(merged):
            self.r_idx.append(i)
            self.c_idx.append(j)
            self.vals.append(merged[j])
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)

    def build(self, maximize: bool = True) -> MilpModel:
        m, n = len(self.tags), len(self.keys)
        A = sp.csr_matrix((self.vals, (self.r_idx, self.c_idx)), shape=(m, n))
        return MilpModel(list(self.keys), np.array(self.lb, float), np.array(self.ub, float),
                         np.array(self.obj, float), np.array(self.integer, bool), A,
                         np.array(self.senses, dtype="<U1"), np.array(self.rhs, float),
                         list(self.tags), maximize, self.name)


def _tag(family: str, pair: int | None = None, **ids: int) -> RowTag:
    items = tuple(ids.items())
    if pair is not None:
        items = (("w", pair),) + items
    return RowTag(family, items, pair)


def expected_column_count(inst: TransitInstance) -> int:
    """Closed-form column count of the full model."""
    nr, ns = len(inst.rapid_nodes), len(inst.slow_nodes)
    er, es = len(inst.rapid_edges), len(inst.slow_edges)
    ar, as_ = 2 * er, 2 * es
    nt = len(inst.transfer_nodes)
    per_pair = 1 + ar + as_ + 2 * nt + 2 * nr + 2 * ns + ar + as_
    return er + es + 2 * nr + ns + len(inst.demands) * per_pair


def _turn_angle_deg(inst: TransitInstance, a_tail: int, k: int, b_head: int) -> float:
    """Angle at ``k`` between the segments towards ``a_tail`` and ``b_head``."""
    p = inst.nodes[k].position
    u = np.subtract(inst.nodes[a_tail].position, p)
    v = np.subtract(inst.nodes[b_head].position, p)
    cos = float(u @ v) / (float(np.linalg.norm(u)) * float(np.linalg.norm(v)))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


def build_ind(inst: TransitInstance, modes: tuple[str, ...] = (RAPID, SLOW),
              name: str | None = None) -> MilpModel:
    """Full integrated model; ``modes=(RAPID,)`` gives the rapid-only stage model."""
    if not inst.origins(RAPID) or not inst.dests(RAPID) or not inst.origins(SLOW) or not inst.dests(SLOW):
        raise InstanceError("origin/destination sets must be non-empty")
    p = inst.params
    use_slow = SLOW in modes
    if use_slow:
        old = sum(1 for e in inst.edges if e.on_old_slow_line)
        if p.min_unchanged_slow_edges > old:
            raise InstanceError("min_unchanged_slow_edges exceeds the old slow line length")
    b = ModelBuilder(name or (inst.name if use_slow else f"{inst.name}-rapid"))
    NR, NS, NT = inst.rapid_nodes, inst.slow_nodes, inst.transfer_nodes
    ER, ES = inst.rapid_edges, inst.slow_edges
    AR = inst.mode_arcs(RAPID)
    AS = inst.mode_arcs(SLOW) if use_slow else ()
    if not use_slow:
        NS, NT, ES = (), (), ()
    ntset = set(NT)

    # design columns
    for e in ER:
        b.var("x_R", e)
    for e in ES:
        b.var("x_S", e)
    for i in NR:
        b.var("y_R", i)
    for i in NR:
        b.var("z_R", i)
    for k in NS:
        b.var("z_S", k)
    # per-pair columns
    for d in inst.demands:
        w = d.id
        b.var("f", w, obj=d.demand)
        for a in AR:
            b.var("fR", w, a.id)
        for a in AS:
            b.var("fS", w, a.id)
        for k in NT:
            b.var("fSR", w, k)
        for k in NT:
            b.var("fRS", w, k)
        for mode, nodes in ((RAPID, NR), (SLOW, NS)):
            suffix = "R" if mode == RAPID else "S"
            for end, centroid in (("O", d.origin), ("D", d.dest)):
                for k in nodes:
                    linked = inst.walk_time(centroid, k, mode) is not None
                    b.var(f"v{end}_{suffix}", w, k, ub=1.0 if linked else 0.0)
        for a in AR:
            b.var("hR", w, a.id)
        for a in AS:
            b.var("hS", w, a.id)

    x_R = lambda e: b.col("x_R", e)
    x_S = lambda e: b.col("x_S", e)
    y_R = lambda i: b.col("y_R", i)
    z_R = lambda i: b.col("z_R", i)
    z_S = lambda i: b.col("z_S", i)

    # budget
    b.row([(x_R(e), 1.0) for e in ER], "L", p.max_rapid_edges, _tag("budget_R"))
    if use_slow:
        b.row([(x_S(e), 1.0) for e in ES], "L", p.max_slow_edges, _tag("budget_S"))

    # rapid design
    OR, DR = inst.origins(RAPID), inst.dests(RAPID)
    for e in ER:
        for i in inst.edges[e].endpoints:
            b.row([(x_R(e), 1.0), (z_R(i), -1.0), (y_R(i), -1.0)], "L", 0.0, _tag("design_1", e=e, i=i))
    b.row([(z_R(o), 1.0) for o in OR], "E", 1.0, _tag("design_2"))
    b.row([(z_R(o), 1.0) for o in DR], "E", 1.0, _tag("design_3"))
    b.row([(x_R(e), 1.0) for o in OR for e in inst.incident_edges(RAPID, o)], "E", 1.0, _tag("design_4"))
    b.row([(x_R(e), 1.0) for o in DR for e in inst.incident_edges(RAPID, o)], "E", 1.0, _tag("design_5"))
    for i in NR:
        b.row([(z_R(i), 1.0), (y_R(i), 1.0)], "L", 1.0, _tag("design_6", i=i))
    b.row([(x_R(e), 1.0) for e in ER] + [(y_R(i), -1.0) for i in NR] + [(z_R(i), -1.0) for i in NR],
          "E", -1.0, _tag("design_7"))
    ends_R = set(OR) | set(DR)
    for k in NR:
        if k in ends_R:
            continue
        b.row([(x_R(e), 1.0) for e in inst.incident_edges(RAPID, k)] + [(z_R(k), -2.0), (y_R(k), -2.0)],
              "E", 0.0, _tag("design_8", k=k))

    # slow design
    if use_slow:
        OS, DS = inst.origins(SLOW), inst.dests(SLOW)
        for e in ES:
            for i in inst.edges[e].endpoints:
                b.row([(x_S(e), 1.0), (z_S(i), -1.0)], "L", 0.0, _tag("design_9", e=e, i=i))
        b.row([(z_S(o), 1.0) for o in OS], "E", 1.0, _tag("design_10"))
        b.row([(z_S(o), 1.0) for o in DS], "E", 1.0, _tag("design_11"))
        b.row([(x_S(e), 1.0) for o in OS for e in inst.incident_edges(SLOW, o)], "E", 1.0, _tag("design_12"))
        b.row([(x_S(e), 1.0) for o in DS for e in inst.incident_edges(SLOW, o)], "E", 1.0, _tag("design_13"))
        b.row([(x_S(e), 1.0) for e in ES] + [(z_S(i), -1.0) for i in NS], "E", -1.0, _tag("design_14"))
        ends_S = set(OS) | set(DS)
        for k in NS:
            if k in ends_S:
                continue
            b.row([(x_S(e), 1.0) for e in inst.incident_edges(SLOW, k)] + [(z_S(k), -2.0)],
                  "E", 0.0, _tag("design_15", k=k))
        b.row([(x_S(e), 1.0) for e in ES if inst.edges[e].on_old_slow_line], "G",
              p.min_unchanged_slow_edges, _tag("design_16"))

    # station spacing: a rapid stop excludes every other stop within the spacing radius
    for i in NR:
        near = [j for j in NR if j != i and inst.node_distance(i, j) <= p.min_station_spacing]
        if near:
            b.row([(z_R(i), 1.0)] + [(z_R(j), 1.0) for j in near], "L", 1.0, _tag("spacing", i=i))

    for d in inst.demands:
        _pair_rows(b, inst, d, NR, NS, NT, ntset, AR, AS, ER, ES, use_slow)

    return b.build(maximize=True)


def _pair_rows(b: ModelBuilder, inst: TransitInstance, d, NR, NS, NT, ntset, AR, AS, ER, ES, use_slow):
    p = inst.params
    w = d.id
    f = b.col("f", w)
    fR = lambda a: b.col("fR", w, a)
    fS = lambda a: b.col("fS", w, a)
    fSR = lambda k: b.col("fSR", w, k)
    fRS = lambda k: b.col("fRS", w, k)
    vO_R = lambda k: b.col("vO_R", w, k)
    vD_R = lambda k: b.col("vD_R", w, k)
    vO_S = lambda k: b.col("vO_S", w, k)
    vD_S = lambda k: b.col("vD_S", w, k)
    T = lambda fam, **ids: _tag(fam, w, **ids)
    out_R = lambda k: [(fR(a.id), 1.0) for a in inst.out_arcs(RAPID, k)]
    in_R = lambda k: [(fR(a.id), 1.0) for a in inst.in_arcs(RAPID, k)]
    out_S = lambda k: [(fS(a.id), 1.0) for a in inst.out_arcs(SLOW, k)]
    in_S = lambda k: [(fS(a.id), 1.0) for a in inst.in_arcs(SLOW, k)]
    neg = lambda terms: [(j, -v) for j, v in terms]

    # walking access relation
    b.row([(vO_R(k), 1.0) for k in NR] + [(vO_S(k), 1.0) for k in NS] + [(f, -1.0)],
          "E", 0.0, T("relation_3"))
    b.row([(vD_R(k), 1.0) for k in NR] + [(vD_S(k), 1.0) for k in NS] + [(f, -1.0)],
          "E", 0.0, T("relation_4"))
    for k in NR:
        b.row([(vO_R(k), 1.0), (b.col("z_R", k), -1.0)], "L", 0.0, T("relation_5", k=k))
    for k in NS:
        b.row([(vO_S(k), 1.0), (b.col("z_S", k), -1.0)], "L", 0.0, T("relation_6", k=k))
    for k in NR:
        b.row([(vD_R(k), 1.0), (b.col("z_R", k), -1.0)], "L", 0.0, T("relation_7", k=k))
    for k in NS:
        b.row([(vD_S(k), 1.0), (b.col("z_S", k), -1.0)], "L", 0.0, T("relation_8", k=k))

    # flow conservation away from transfer nodes
    for k in NR:
        if k in ntset:
            continue
        b.row(out_R(k) + neg(in_R(k)) + [(vO_R(k), -1.0), (vD_R(k), 1.0)], "E", 0.0, T("flow_1", k=k))
    for k in NS:
        if k in ntset:
            continue
        b.row(out_S(k) + neg(in_S(k)) + [(vO_S(k), -1.0), (vD_S(k), 1.0)], "E", 0.0, T("flow_11", k=k))
    for k in NR:
        b.row([(vO_R(k), 1.0)] + neg(out_R(k)), "L", 0.0, T("flow_2", k=k))
    for k in NS:
        b.row([(vO_S(k), 1.0)] + neg(out_S(k)), "L", 0.0, T("flow_3", k=k))
    for k in NR:
        b.row([(vD_R(k), 1.0)] + neg(in_R(k)), "L", 0.0, T("flow_4", k=k))
    for k in NS:
        b.row([(vD_S(k), 1.0)] + neg(in_S(k)), "L", 0.0, T("flow_5", k=k))
    for a in AR:
        b.row([(fR(a.id), 1.0), (f, -1.0)], "L", 0.0, T("flow_6", a=a.id))
    for a in AS:
        b.row([(fS(a.id), 1.0), (f, -1.0)], "L", 0.0, T("flow_7", a=a.id))

    # transfers
    if use_slow and NT:
        b.row([(fSR(k), 1.0) for k in NT], "L", 1.0, T("transfer_1"))
        b.row([(fRS(k), 1.0) for k in NT], "L", 1.0, T("transfer_2"))
        for k in NT:
            b.row(in_R(k) + [(fSR(k), 1.0)] + neg(out_R(k)) + [(fRS(k), -1.0), (vO_R(k), 1.0), (vD_R(k), -1.0)],
                  "E", 0.0, T("transfer_3", k=k))
        for k in NT:
            b.row(in_S(k) + [(fRS(k), 1.0)] + neg(out_S(k)) + [(fSR(k), -1.0), (vO_S(k), 1.0), (vD_S(k), -1.0)],
                  "E", 0.0, T("transfer_4", k=k))
        for k in NT:
            b.row([(fRS(k), 1.0)] + neg(out_S(k)), "L", 0.0, T("transfer_5", k=k, part=0))
            b.row([(fRS(k), 1.0)] + neg(in_R(k)), "L", 0.0, T("transfer_5", k=k, part=1))
        for k in NT:
            b.row([(fSR(k), 1.0)] + neg(in_S(k)), "L", 0.0, T("transfer_6", k=k, part=0))
            b.row([(fSR(k), 1.0)] + neg(out_R(k)), "L", 0.0, T("transfer_6", k=k, part=1))

    # location-allocation: flow only on chosen edges, one direction per edge
    for e in ER:
        fwd, bwd = inst.arcs_of_edge[(RAPID, e)]
        b.row([(fR(fwd.id), 1.0), (fR(bwd.id), 1.0), (b.col("x_R", e), -1.0)], "L", 0.0, T("loc_allo_1", e=e))
    for e in ES:
        fwd, bwd = inst.arcs_of_edge[(SLOW, e)]
        b.row([(fS(fwd.id), 1.0), (fS(bwd.id), 1.0), (b.col("x_S", e), -1.0)], "L", 0.0, T("loc_allo_2", e=e))
    if use_slow:
        for e in inst.shared_edges:
            terms = [(fR(a.id), 1.0) for a in inst.arcs_of_edge[(RAPID, e)]]
            terms += [(fS(a.id), 1.0) for a in inst.arcs_of_edge[(SLOW, e)]]
            b.row(terms, "L", 1.0, T("loc_allo_3", e=e))

    # transfers only where both modes stop
    for k in NT:
        b.row([(fSR(k), 1.0), (fRS(k), 1.0), (b.col("z_R", k), -1.0)], "L", 0.0, T("alignment_1", k=k))
        b.row([(fSR(k), 1.0), (fRS(k), 1.0), (b.col("z_S", k), -1.0)], "L", 0.0, T("alignment_2", k=k))

    # mode choice: public trip time no worse than the private utility
    terms = []
    for k in NR:
        terms.append((vO_R(k), inst.nominal_walk_time(d.origin, k) if inst.walk_time(d.origin, k, RAPID) is None
                      else inst.walk_time(d.origin, k, RAPID)))
        terms.append((vD_R(k), inst.nominal_walk_time(d.dest, k) if inst.walk_time(d.dest, k, RAPID) is None
                      else inst.walk_time(d.dest, k, RAPID)))
    for k in NS:
        terms.append((vO_S(k), inst.nominal_walk_time(d.origin, k) if inst.walk_time(d.origin, k, SLOW) is None
                      else inst.walk_time(d.origin, k, SLOW)))
        terms.append((vD_S(k), inst.nominal_walk_time(d.dest, k) if inst.walk_time(d.dest, k, SLOW) is None
                      else inst.walk_time(d.dest, k, SLOW)))
    terms += [(fR(a.id), a.traverse_time) for a in AR]
    terms += [(fS(a.id), a.traverse_time) for a in AS]
    terms += [(fRS(k), p.transfer_time_RS) for k in NT]
    terms += [(fSR(k), p.transfer_time_SR) for k in NT]
    terms += [(b.col("hR", w, a.id), p.stop_time_rapid) for a in AR]
    terms += [(b.col("hS", w, a.id), p.stop_time_slow) for a in AS]
    terms.append((f, p.boarding_time - d.private_utility))
    b.row(terms, "L", 0.0, T("utility"))

    # h = f_a * z(tail of a)
    for mode, arcs, fk, hk, zk in ((RAPID, AR, "fR", "hR", "z_R"), (SLOW, AS, "fS", "hS", "z_S")):
        sfx = "R" if mode == RAPID else "S"
        for a in arcs:
            h, fa, z = b.col(hk, w, a.id), b.col(fk, w, a.id), b.col(zk, a.tail)
            b.row([(h, 1.0), (fa, -1.0)], "L", 0.0, T(f"lin_{sfx}_1", a=a.id))
            b.row([(h, 1.0), (z, -1.0)], "L", 0.0, T(f"lin_{sfx}_2", a=a.id))
            b.row([(fa, 1.0), (z, 1.0), (h, -1.0)], "L", 1.0, T(f"lin_{sfx}_3", a=a.id))

    # walking distance limits
    for mode, nodes, sfx in ((RAPID, NR, "R"), (SLOW, NS, "S")):
        limit = p.max_walk(mode)
        for end, centroid in (("O", d.origin), ("D", d.dest)):
            for k in nodes:
                dist = inst.walk_distance(centroid, k, mode)
                b.row([(b.col(f"v{end}_{sfx}", w, k), dist)], "L", limit, T("walk_bound", k=k, end=0 if end == "O" else 1,
                                                                         mode=0 if mode == RAPID else 1))

    # optional anti-zigzag rows on rapid flows
    if p.enable_shape_constraints:
        for k in NR:
            for a in inst.in_arcs(RAPID, k):
                sharp = [bb for bb in inst.out_arcs(RAPID, k)
                         if _turn_angle_deg(inst, a.tail, k, bb.head) <= 90.0 + 1e-9]
                if sharp:
                    b.row([(fR(a.id), 1.0)] + [(fR(bb.id), 1.0) for bb in sharp], "L", 1.0,
                          T("shape", k=k, a=a.id))


@dataclass
class SequentialModels:
    """Stage-one rapid model and a factory for the stage-two refit."""

    stage1: MilpModel
    refit: Callable[[dict], MilpModel]


def build_sequential(inst: TransitInstance) -> SequentialModels:
    """Two-stage baseline: rapid line alone, then slow refit around the fixed rapid line.

    ``refit`` takes a rapid design ``{"edges": [...], "stops": [...],
    "nonstops": [...]}`` and returns the full model with that design fixed.
    """
    stage1 = build_ind(inst, modes=(RAPID,))
    full = build_ind(inst)

    def refit(design: dict) -> MilpModel:
        from .solution import rapid_design_violations

        problems = rapid_design_violations(inst, design)
        if problems:
            raise InstanceError("stage-two design violates rapid constraints: " + "; ".join(problems))
        edges, stops, nonstops = set(design["edges"]), set(design["stops"]), set(design["nonstops"])
        fix = {}
        for e in inst.rapid_edges:
            fix[full.col("x_R", e)] = 1.0 if e in edges else 0.0
        for i in inst.rapid_nodes:
            fix[full.col("z_R", i)] = 1.0 if i in stops else 0.0
            fix[full.col("y_R", i)] = 1.0 if i in nonstops else 0.0
        model = full.fixed(fix)
        model.name = f"{inst.name}-refit"
        return model

    return SequentialModels(stage1, refit)
