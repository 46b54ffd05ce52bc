"""LP-based branch-and-bound for binary programs with cut callbacks.

The tree runs best-bound search with depth-first plunges.  A single cut
callback is consulted at integral candidates (before they may become the
incumbent) and, rate-limited, at fractional nodes.  Returned rows are added
globally, so every open node sees them.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .formulation import MilpModel, VarKey
from .lp import Basis, LpOutcome, LpSession, presolve, solve_lp

log = logging.getLogger(__name__)

INT_TOL = 1e-6
CUT_TOL = 1e-6
PLUNGE_DEPTH = 10
MAX_CUT_ROUNDS = 1000

# lower rank branches first; anything unlisted (per-pair flows) comes last
_PRIORITY = {"x_R": 0, "x_S": 1, "z_R": 2, "z_S": 3, "y_R": 4, "f": 5,
             "vO_R": 6, "vO_S": 6, "vD_R": 6, "vD_S": 6, "hR": 7, "hS": 7}
_FLOW_RANK = 8


class MilpError(RuntimeError):
    pass


@dataclass
class Cut:
    """A linear row ``sum(coefs * x[cols]) <sense> rhs`` over model columns."""

    cols: np.ndarray
    coefs: np.ndarray
    sense: str
    rhs: float
    source: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.coefs = np.asarray(self.coefs, dtype=float)

    def activity(self, x: np.ndarray) -> float:
        return float(self.coefs @ np.asarray(x)[self.cols])

    def violation(self, x: np.ndarray) -> float:
        """Positive when ``x`` breaks the row."""
        act = self.activity(x)
        if self.sense == "L":
            return act - self.rhs
        if self.sense == "G":
            return self.rhs - act
        return abs(act - self.rhs)


CutCallback = Callable[[np.ndarray, bool], Sequence[Cut]]


@dataclass(frozen=True)
class Limits:
    time: float | None = None
    nodes: int | None = None
    gap: float = 1e-6  # relative, as a fraction


@dataclass(frozen=True)
class UserCutPolicy:
    """Separate fractional points only at every ``every``-th node up to ``max_depth``."""

    every: int = 10
    max_depth: int = 5
    max_rounds: int = 5


@dataclass
class SolveStats:
    t: float = 0.0
    nodes: int = 0
    n_cuts: int = 0
    obj_v: float | None = None
    bound: float | None = None
    gap: float | None = None
    status: str = "unknown"
    cuts_by_source: dict = field(default_factory=lambda: {"lazy": 0, "user": 0})
    lp_iterations: int = 0

    def to_dict(self) -> dict:
        return {"t": self.t, "nodes": self.nodes, "n_cuts": self.n_cuts, "obj_v": self.obj_v,
                "bound": self.bound, "gap": self.gap, "status": self.status,
                "cuts_by_source": dict(self.cuts_by_source),
                "lp_iterations": self.lp_iterations}


def relative_gap(bound: float | None, incumbent: float | None) -> float | None:
    """Percent gap ``|bound - incumbent| / |incumbent| * 100``; ``None`` without incumbent."""
    if incumbent is None:
        return None
    if bound is None:
        return math.inf
    diff = abs(bound - incumbent)
    if incumbent == 0:
        return 0.0 if diff <= 1e-9 else math.inf
    return diff / abs(incumbent) * 100.0


@dataclass
class BbNode:
    fixes: tuple[tuple[int, int], ...]
    hint: Basis | None
    bound: float
    depth: int


@dataclass
class MilpResult:
    values: np.ndarray | None
    stats: SolveStats
    cuts: list[Cut] = field(default_factory=list)
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.stats.status

    @property
    def objective(self) -> float | None:
        return self.stats.obj_v


def branch_rank(key: VarKey) -> int:
    return _PRIORITY.get(key.kind, _FLOW_RANK)


def branching_choice(values: Mapping[int, float], keys: Sequence[VarKey]) -> int:
    """Most fractional column; ties by variable-kind priority, then lowest index."""
    if not values:
        raise ValueError("no fractional candidates")

    def rank(j):
        frac = round(abs(values[j] - 0.5), 9)
        return frac, branch_rank(keys[j]), j

    return min(values, key=rank)


def solve_lp_relaxation(model: MilpModel) -> LpOutcome:
    return solve_lp(model.to_lp())


def _objective_step(model: MilpModel) -> float | None:
    """Granularity of the objective over integer points, if it has one."""
    c = model.obj
    if np.any(c[~model.integer] != 0):
        return None
    ints = c[model.integer]
    if np.any(np.abs(ints - np.round(ints)) > 1e-9):
        return None
    g = 0
    for v in np.round(ints).astype(np.int64):
        g = math.gcd(g, int(abs(v)))
    return float(g or 1)


class _Tree:
    def __init__(self, model: MilpModel, callback: CutCallback | None, limits: Limits,
                 policy: UserCutPolicy, on_incumbent, log_every: int, record_trace: bool):
        self.model = model
        self.callback = callback
        self.limits = limits
        self.policy = policy
        self.on_incumbent = on_incumbent
        self.log_every = log_every
        self.record_trace = record_trace
        self.sign = 1.0 if model.maximize else -1.0
        self.step = _objective_step(model)
        self.stats = SolveStats()
        self.cuts: list[Cut] = []
        self.trace: list[tuple[int, float, float]] = []
        self.inc_x: np.ndarray | None = None
        self.inc_score: float | None = None
        self.best_bound = math.inf
        self.start = time.perf_counter()

    # -- bookkeeping -------------------------------------------------------
    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def can_improve(self, score: float) -> bool:
        if self.inc_score is None:
            return True
        if self.step is not None:
            score = math.floor((score + 1e-6) / self.step) * self.step
        tol = max(1e-6, self.limits.gap * abs(self.inc_score))
        if self.step is not None:
            return score > self.inc_score + 1e-9
        return score > self.inc_score + tol

    def progress(self, open_bound: float):
        self.best_bound = min(self.best_bound, open_bound)
        s = self.stats
        if self.log_every and s.nodes % self.log_every == 0:
            log.info(self.progress_line())

    def progress_line(self) -> str:
        inc = "-" if self.inc_score is None else f"{self.sign * self.inc_score:g}"
        bnd = self.sign * self.best_bound if math.isfinite(self.best_bound) else self.sign * math.inf
        gap = relative_gap(bnd, None if self.inc_score is None else self.sign * self.inc_score)
        gtxt = "-" if gap is None else f"{gap:.2f}%"
        return (f"node={self.stats.nodes} bound={bnd:g} inc={inc} gap={gtxt} "
                f"cuts={self.stats.n_cuts} t={self.elapsed():.2f}")

    # -- setup -------------------------------------------------------------
    def setup(self) -> bool:
        red = presolve(self.model.to_lp(), keep_empty_columns=True)
        if isinstance(red, LpOutcome):
            return False
        self.red = red
        self.full_to_red = np.full(self.model.n, -1, dtype=np.int64)
        self.full_to_red[red.cols] = np.arange(red.cols.size)
        self.int_red = np.flatnonzero(self.model.integer[red.cols])
        self.keys_red = [self.model.keys[j] for j in red.cols]
        self.lb0 = red.problem.lb.copy()
        self.ub0 = red.problem.ub.copy()
        self.session = LpSession(red.problem)
        return True

    def to_full(self, x_red: np.ndarray) -> np.ndarray:
        x = self.red.x_fixed.copy()
        x[self.red.cols] = x_red
        return x

    def add_cuts(self, cuts: Sequence[Cut], x_full: np.ndarray, source: str) -> int:
        keep = []
        for cut in cuts:
            v = cut.violation(x_full)
            if v > CUT_TOL:
                keep.append(cut)
            else:
                log.warning("ignoring %s cut not violated by the candidate (violation %.3g)",
                            source, v)
        if not keep:
            return 0
        rows, senses, rhs = [], [], []
        for cut in keep:
            mapped = self.full_to_red[cut.cols]
            fixed = mapped < 0
            shift = float(cut.coefs[fixed] @ self.red.x_fixed[cut.cols[fixed]])
            row = np.zeros(self.red.cols.size)
            np.add.at(row, mapped[~fixed], cut.coefs[~fixed])
            rows.append(row)
            senses.append(cut.sense)
            rhs.append(cut.rhs - shift)
            cut.source = cut.source or source
            self.cuts.append(cut)
        self.session.add_rows(sp.csr_matrix(np.array(rows)), np.array(senses), np.array(rhs))
        self.stats.n_cuts += len(keep)
        self.stats.cuts_by_source[source] = self.stats.cuts_by_source.get(source, 0) + len(keep)
        return len(keep)

    # -- node processing ---------------------------------------------------
    def process(self, node: BbNode) -> tuple[list[BbNode], float | None]:
        """Solve one node; return children (empty when pruned) and the node LP value."""
        lb, ub = self.lb0.copy(), self.ub0.copy()
        for j, v in node.fixes:
            lb[j] = ub[j] = v
        self.stats.nodes += 1
        index = self.stats.nodes
        hint = node.hint
        rounds = 0
        while True:
            out = self.session.solve(lb, ub, hint)
            self.stats.lp_iterations += out.iterations
            if out.status == "infeasible":
                return [], None
            if out.status != "optimal":
                raise MilpError(f"node LP ended with status {out.status}")
            score = self.sign * out.objective
            if self.record_trace:
                self.trace.append((node.depth, node.bound, score))
            score = min(score, node.bound)
            if not self.can_improve(score):
                return [], score
            x_red = out.x
            frac = {int(j): float(x_red[j]) for j in self.int_red
                    if abs(x_red[j] - round(x_red[j])) > INT_TOL}
            x_full = self.to_full(x_red)
            if not frac:
                if self.callback is not None and rounds < MAX_CUT_ROUNDS:
                    rounds += 1
                    if self.add_cuts(self.callback(x_full, True), x_full, "lazy"):
                        hint = self.session.last_basis
                        continue
                self.accept(x_full, score)
                return [], score
            pol = self.policy
            if (self.callback is not None and rounds < pol.max_rounds
                    and node.depth <= pol.max_depth and (index - 1) % pol.every == 0):
                rounds += 1
                if self.add_cuts(self.callback(x_full, False), x_full, "user"):
                    hint = self.session.last_basis
                    continue
            j = branching_choice(frac, self.keys_red)
            basis = self.session.last_basis
            near = 1 if x_red[j] >= 0.5 else 0
            kids = [BbNode(node.fixes + ((j, v),), basis, score, node.depth + 1)
                    for v in (near, 1 - near)]
            return kids, score

    def accept(self, x_full: np.ndarray, score: float):
        x = x_full.copy()
        ints = self.model.integer
        x[ints] = np.round(x[ints])
        if self.model.max_violation(x) > 1e-6:
            x = x_full
        score = self.sign * self.model.objective(x)
        if self.inc_score is None or score > self.inc_score:
            self.inc_x, self.inc_score = x, score
            log.debug("new incumbent %g at node %d", self.sign * score, self.stats.nodes)
            if self.on_incumbent is not None:
                self.on_incumbent(x, self.sign * score)

    # -- search --------------------------------------------------------------
    def run(self) -> MilpResult:
        if not self.setup():
            return self.finish("infeasible", [])
        heap: list = []
        seq = itertools.count()
        current: BbNode | None = BbNode((), None, math.inf, 0)
        plunge = 0
        status = "optimal"
        while True:
            if current is None:
                while heap:
                    _, _, cand = heapq.heappop(heap)
                    if self.can_improve(cand.bound):
                        current = cand
                        break
                if current is None:
                    break
                plunge = 0
            lim = self.limits
            if lim.time is not None and self.elapsed() >= lim.time:
                status = "time_limit"
                heapq.heappush(heap, (-current.bound, next(seq), current))
                break
            if lim.nodes is not None and self.stats.nodes >= lim.nodes:
                status = "node_limit"
                heapq.heappush(heap, (-current.bound, next(seq), current))
                break
            kids, _ = self.process(current)
            if kids and plunge < PLUNGE_DEPTH:
                dive, sibling = kids
                heapq.heappush(heap, (-sibling.bound, next(seq), sibling))
                current, plunge = dive, plunge + 1
            else:
                for kid in kids:
                    heapq.heappush(heap, (-kid.bound, next(seq), kid))
                current = None
            open_bound = max((-h[0] for h in heap[:1]), default=-math.inf)
            if current is not None:
                open_bound = max(open_bound, current.bound)
            self.progress(self._global_bound(open_bound, heap))
        return self.finish(status, heap)

    def _global_bound(self, open_bound: float, heap) -> float:
        live = open_bound if heap or math.isfinite(open_bound) else -math.inf
        if self.inc_score is not None:
            live = max(live, self.inc_score)
        return live

    def finish(self, status: str, heap) -> MilpResult:
        s = self.stats
        s.t = self.elapsed()
        if status == "optimal" or not heap:
            if self.inc_score is None:
                status = "infeasible"
                self.best_bound = -math.inf
            else:
                status = "optimal"
                self.best_bound = self.inc_score
        else:
            open_bound = max(-h[0] for h in heap)
            self.best_bound = min(self.best_bound, self._global_bound(open_bound, heap))
        s.status = status
        if self.inc_score is not None:
            s.obj_v = self.sign * self.inc_score
        if math.isfinite(self.best_bound):
            s.bound = self.sign * self.best_bound
        s.gap = relative_gap(s.bound, s.obj_v)
        log.info(self.progress_line())
        return MilpResult(self.inc_x, s, self.cuts, self.trace)


def solve_milp(model: MilpModel, callback: CutCallback | None = None,
               limits: Limits | None = None, *, user_cuts: UserCutPolicy | None = None,
               on_incumbent: Callable[[np.ndarray, float], None] | None = None,
               log_every: int = 100, record_trace: bool = False) -> MilpResult:
    """Maximise (or minimise) ``model`` over its integer columns.

    ``callback(x, integral)`` may return violated :class:`Cut` rows.  With
    ``integral=True`` the point is a candidate incumbent and is accepted only
    if no violated cut comes back.  ``on_incumbent`` is told about every
    improvement.
    """
    tree = _Tree(model, callback, limits or Limits(), user_cuts or UserCutPolicy(),
                 on_incumbent, log_every, record_trace)
    return tree.run()
