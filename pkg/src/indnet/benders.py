"""Branch-and-Benders-cut for the integrated model.

The master keeps every design column plus each pair's coverage, walking
access and dwell columns.  Flow columns of *projected* pairs move into one
feasibility subproblem per pair; a retained fraction of pairs keeps its
flows in the master.  Infeasible subproblems are cut off with rows obtained
from a normalised cut-generating LP, separated at an in-out point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bb import Cut, Limits, MilpResult, SolveStats, UserCutPolicy, solve_milp
from .formulation import FLOW_KINDS, MilpModel, build_ind
from .instance import TransitInstance
from .lp import LpError, LpProblem, solve_lp
from .solution import DesignSolution, extract_solution

log = logging.getLogger(__name__)

SELECTION_TYPES = {1: "random", 2: "highest demand", 3: "lowest demand"}
CUT_TOL = 1e-6
COEF_DROP = 1e-9


@dataclass(frozen=True)
class PartialConfig:
    """Which pairs keep their flow columns in the master.

    ``selection_type`` 1 picks uniformly at random (seeded), 2 the highest
    demands and 3 the lowest, ties broken by pair id.
    """

    percentage: float = 0.0
    selection_type: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.percentage <= 100.0:
            raise ValueError(f"percentage must lie in [0, 100], got {self.percentage}")
        if self.selection_type not in SELECTION_TYPES:
            raise ValueError(f"selection_type must be 1, 2 or 3, got {self.selection_type}")

    def retained_count(self, n_pairs: int) -> int:
        return int(math.floor(self.percentage / 100.0 * n_pairs + 0.5))


def select_retained(inst: TransitInstance, config: PartialConfig) -> tuple[int, ...]:
    pairs = sorted(inst.demands, key=lambda d: d.id)
    k = config.retained_count(len(pairs))
    if k == 0:
        return ()
    if config.selection_type == 1:
        rng = np.random.default_rng(config.seed)
        idx = rng.choice(len(pairs), size=k, replace=False)
        chosen = [pairs[i] for i in idx]
    elif config.selection_type == 2:
        chosen = sorted(pairs, key=lambda d: (-d.demand, d.id))[:k]
    else:
        chosen = sorted(pairs, key=lambda d: (d.demand, d.id))[:k]
    return tuple(sorted(d.id for d in chosen))


@dataclass
class PairBlock:
    """Subproblem data of one projected pair: ``G g (<=|=) r - R m``, ``g >= 0``.

    ``flow_cols`` and ``rows`` index the full model; ``coupling`` indexes the
    master columns that appear in the block (the columns of ``R``).
    """

    pair: int
    flow_cols: np.ndarray
    rows: np.ndarray
    coupling: np.ndarray
    G: sp.csr_matrix
    R: np.ndarray
    r: np.ndarray
    senses: np.ndarray
    time: np.ndarray

    def rhs_at(self, point: np.ndarray) -> np.ndarray:
        return self.r - self.R @ point[self.coupling]


@dataclass
class PartialMaster:
    instance: TransitInstance
    config: PartialConfig
    full: MilpModel
    master: MilpModel
    retained: tuple[int, ...]
    projected: tuple[int, ...]
    master_cols: np.ndarray
    master_rows: np.ndarray
    blocks: dict[int, PairBlock]

    def lift(self, master_values: np.ndarray) -> np.ndarray:
        """Full-model vector with projected flows left at zero."""
        x = np.zeros(self.full.n)
        x[self.master_cols] = master_values
        return x

    def restrict(self, full_values: np.ndarray) -> np.ndarray:
        return np.asarray(full_values)[self.master_cols]


def build_partial_master(inst: TransitInstance, config: PartialConfig,
                         full: MilpModel | None = None) -> PartialMaster:
    full = full or build_ind(inst)
    retained = select_retained(inst, config)
    keep = set(retained)
    projected = tuple(sorted(d.id for d in inst.demands if d.id not in keep))
    proj_set = set(projected)
    col_pair = np.full(full.n, -1, dtype=np.int64)
    for j, key in enumerate(full.keys):
        if key.kind in FLOW_KINDS and key.ids[0] in proj_set:
            col_pair[j] = key.ids[0]
    is_proj = col_pair >= 0
    master_cols = np.flatnonzero(~is_proj)
    A = full.A.tocsr()
    row_pair = np.full(full.m, -1, dtype=np.int64)
    for i in range(full.m):
        cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
        owners = set(col_pair[cols][is_proj[cols]].tolist())
        if len(owners) > 1:
            raise AssertionError(f"row {full.tags[i]} couples flows of several pairs")
        if owners:
            row_pair[i] = owners.pop()
    master_rows = np.flatnonzero(row_pair < 0)
    master = full.subset(master_cols, master_rows, name=f"{full.name}-master")
    to_master = np.full(full.n, -1, dtype=np.int64)
    to_master[master_cols] = np.arange(master_cols.size)
    blocks = {}
    for w in projected:
        rows = np.flatnonzero(row_pair == w)
        flows = np.flatnonzero(col_pair == w)
        sub = A[rows]
        sign = np.where(full.senses[rows] == "G", -1.0, 1.0)
        D = sp.diags(sign)
        G = (D @ sub[:, flows]).tocsr()
        rest = sub[:, master_cols].tocsc()
        used = np.flatnonzero(np.diff(rest.indptr) > 0)
        R = (D @ rest[:, used]).toarray()
        senses = np.where(full.senses[rows] == "E", "E", "L")
        util = [i for i, t in enumerate(full.tags[r] for r in rows) if t.family == "utility"]
        time = np.zeros(flows.size)
        if util:
            time = np.asarray(sub[util[0]][:, flows].todense()).ravel() * sign[util[0]]
        blocks[w] = PairBlock(w, flows, rows, used, G, R, sign * full.rhs[rows], senses, time)
    log.debug("partial master: %d/%d pairs retained, %d columns, %d rows",
              len(retained), len(inst.demands), master.n, master.m)
    return PartialMaster(inst, config, full, master, retained, projected, master_cols,
                         master_rows, blocks)


def build_subproblem(partial: PartialMaster, pair: int, point: np.ndarray,
                     objective: str = "none") -> LpProblem:
    """Flow LP of ``pair`` given master values ``point``.

    ``objective="time"`` minimises in-vehicle and transfer time, which is what
    the route extraction and the integrality check use.
    """
    blk = partial.blocks[pair]
    n = blk.flow_cols.size
    c = blk.time.copy() if objective == "time" else np.zeros(n)
    return LpProblem(blk.G, blk.senses, blk.rhs_at(point), c, np.zeros(n),
                     np.full(n, np.inf), maximize=False)


def subproblem_feasible(partial: PartialMaster, pair: int, point: np.ndarray) -> bool:
    return solve_lp(build_subproblem(partial, pair, point)).status == "optimal"


@dataclass
class BendersCut(Cut):
    """Feasibility cut over master columns, with where it came from."""

    pair: int = -1
    lam: float = 0.0
    dual_value: float = 0.0
    duals: np.ndarray | None = None

    def record(self, point: np.ndarray | None = None) -> dict:
        rec = {"pair": self.pair, "lambda": self.lam, "dual_objective": self.dual_value,
               "rhs": self.rhs, "cols": self.cols.tolist(), "coefs": self.coefs.tolist()}
        if point is not None:
            rec["violation"] = self.violation(point)
        return rec


@dataclass
class Stabilization:
    """In-out separation state; the separation point is ``out - lam * (out - in)``."""

    in_point: np.ndarray
    lam: float = 0.5

    def separation_point(self, out: np.ndarray, lam: float | None = None) -> np.ndarray:
        lam = self.lam if lam is None else lam
        return out - lam * (out - self.in_point)

    def absorb(self, feasible: np.ndarray, weight: float = 0.5):
        self.in_point = (1.0 - weight) * self.in_point + weight * feasible


def cut_generating_lp(blk: PairBlock, sep: np.ndarray, delta: np.ndarray) -> LpProblem:
    """Dual multipliers ``y`` certifying infeasibility at ``sep``.

    ``max y.(R sep - r)`` over ``y G >= 0`` (``y >= 0`` on inequality rows)
    with the normalisation ``y.(R delta) <= 1``.
    """
    m = blk.rows.size
    Rs = blk.R @ sep[blk.coupling]
    Rd = blk.R @ delta[blk.coupling]
    A = sp.vstack([blk.G.T, sp.csr_matrix(Rd.reshape(1, -1))]).tocsr()
    senses = np.array(["G"] * blk.G.shape[1] + ["L"])
    rhs = np.concatenate([np.zeros(blk.G.shape[1]), [1.0]])
    lb = np.where(blk.senses == "E", -np.inf, 0.0)
    return LpProblem(A, senses, rhs, Rs - blk.r, lb, np.full(m, np.inf), maximize=True)


def _assemble(blk: PairBlock, y: np.ndarray, lam: float, value: float) -> BendersCut | None:
    coefs = blk.R.T @ y
    rhs = float(blk.r @ y)
    small = np.abs(coefs) < COEF_DROP
    # dropping a negative coefficient on a [0,1] column needs rhs slack to stay valid
    rhs += float(-coefs[small & (coefs < 0)].sum())
    keep = ~small
    if not keep.any():
        return None
    return BendersCut(blk.coupling[keep], coefs[keep], "L", rhs, source="benders",
                      pair=blk.pair, lam=lam, dual_value=value, duals=y)


def separate(partial: PartialMaster, pair: int, out: np.ndarray,
             stab: Stabilization) -> BendersCut | None:
    """Feasibility cut for ``pair`` violated at ``out``, or ``None`` if its flows fit."""
    blk = partial.blocks[pair]
    if solve_lp(build_subproblem(partial, pair, out)).status == "optimal":
        return None
    delta = out - stab.in_point
    lams = [stab.lam, 0.0] if stab.lam > 0 else [0.0]
    for lam in lams:
        sep = stab.separation_point(out, lam)
        res = solve_lp(cut_generating_lp(blk, sep, delta))
        if res.status == "unbounded":
            raise LpError(f"cut LP of pair {pair} unbounded; the in point is not subproblem-feasible")
        if not res.optimal or res.objective <= CUT_TOL:
            continue
        cut = _assemble(blk, res.x, lam, res.objective)
        if cut is not None and cut.violation(out) > CUT_TOL:
            return cut
    log.warning("pair %d infeasible at the master point but no cut separated", pair)
    return None


def initial_in_point(partial: PartialMaster) -> np.ndarray:
    """Design part of the master LP optimum; per-pair columns at zero."""
    master = partial.master
    root = solve_lp(master.to_lp())
    point = np.zeros(master.n)
    if root.optimal:
        for j, key in enumerate(master.keys):
            if key.pair is None:
                point[j] = root.x[j]
    return point


@dataclass
class BendersResult:
    solution: DesignSolution | None
    stats: SolveStats
    cuts: list[BendersCut]
    partial: PartialMaster
    values: np.ndarray | None = None
    cut_log: list[dict] = field(default_factory=list)

    @property
    def objective(self) -> float | None:
        return self.stats.obj_v


class _Separator:
    def __init__(self, partial: PartialMaster, stab: Stabilization, log_cuts: bool):
        self.partial = partial
        self.stab = stab
        self.log_cuts = log_cuts
        self.seen: set = set()
        self.records: list[dict] = []

    def __call__(self, x: np.ndarray, integral: bool) -> list[BendersCut]:
        cuts = []
        for w in self.partial.projected:
            cut = separate(self.partial, w, x, self.stab)
            if cut is None:
                continue
            key = (tuple(cut.cols.tolist()), tuple(np.round(cut.coefs, 9).tolist()), round(cut.rhs, 9))
            if key in self.seen:
                log.warning("duplicate cut for pair %d suppressed", w)
                continue
            self.seen.add(key)
            cut.info["integral"] = integral
            cuts.append(cut)
            if self.log_cuts:
                rec = cut.record(x)
                rec["source"] = "lazy" if integral else "user"
                self.records.append(rec)
        return cuts


def route_projected(partial: PartialMaster, master_values: np.ndarray) -> np.ndarray:
    """Full-model values: master part plus a fastest integral flow for each projected pair."""
    x = partial.lift(master_values)
    for w in partial.projected:
        blk = partial.blocks[w]
        n = blk.flow_cols.size
        sub = MilpModel(keys=[partial.full.keys[j] for j in blk.flow_cols], lb=np.zeros(n),
                        ub=np.ones(n), obj=blk.time, integer=np.ones(n, dtype=bool), A=blk.G,
                        senses=blk.senses, rhs=blk.rhs_at(master_values),
                        tags=[partial.full.tags[i] for i in blk.rows], maximize=False,
                        name=f"route-{w}")
        res = solve_milp(sub, log_every=0)
        if res.values is None:
            raise LpError(f"no integral flow for pair {w} at the final design")
        x[blk.flow_cols] = res.values
    return x


def solve_benders(inst: TransitInstance, config: PartialConfig | None = None, *,
                  lam: float = 0.5, limits: Limits | None = None,
                  user_cuts: UserCutPolicy | None = None, log_cuts: bool = False,
                  partial: PartialMaster | None = None, log_every: int = 100) -> BendersResult:
    """Branch-and-Benders-cut on the partial master of ``inst``."""
    config = config or PartialConfig()
    partial = partial or build_partial_master(inst, config)
    stab = Stabilization(initial_in_point(partial), lam)
    sep = _Separator(partial, stab, log_cuts)
    callback = sep if partial.projected else None
    res: MilpResult = solve_milp(partial.master, callback, limits, user_cuts=user_cuts,
                                 on_incumbent=lambda x, _obj: stab.absorb(x), log_every=log_every)
    solution, values = None, None
    if res.values is not None:
        values = route_projected(partial, res.values)
        solution = extract_solution(inst, partial.full, values)
    return BendersResult(solution, res.stats, [c for c in res.cuts if isinstance(c, BendersCut)],
                         partial, values, sep.records)
