"""Bounded-variable revised simplex.

The solver works on ``A x - s = 0`` with box bounds on both the structural
columns ``x`` and the row activities ``s``, so every basis starts from the
slack identity and warm starts only need a status vector.  Phase 1 minimises
the sum of infeasibilities of the basic variables (composite primal); when it
stalls with positive infeasibility its duals are returned as a Farkas ray.

Farkas convention: rows are sign adjusted to ``<=`` form (``>=`` rows
negated), the ray ``y`` is non-negative on inequality rows and free on
equality rows, and the certificate value
``min_{l <= x <= u} (y^T A_adj) x - y^T b_adj`` is strictly positive.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import blas

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
RESIDUAL_TOL = 1e-9
STALL_LIMIT = 40

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3

_SENSES = ("L", "E", "G")


class LpError(RuntimeError):
    """Raised when the simplex cannot continue for numerical reasons."""


@dataclass
class LpProblem:
    """``min/max c x  s.t.  A x (<=,=,>=) rhs,  lb <= x <= ub``."""

    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    maximize: bool = False

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        m, n = self.A.shape
        if self.senses.shape != (m,) or self.rhs.shape != (m,):
            raise ValueError("row data does not match A")
        if self.c.shape != (n,) or self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("column data does not match A")
        if not set(self.senses.tolist()) <= set(_SENSES):
            raise ValueError("senses must be 'L', 'E' or 'G'")
        for name in ("c", "rhs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains NaN or Inf")
        if not np.all(np.isfinite(self.A.data)):
            raise ValueError("A contains NaN or Inf")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("bounds contain NaN")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bounds are empty")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_dense(cls, A, senses, rhs, c, lb=None, ub=None, maximize=False):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[1]
        lb = np.zeros(n) if lb is None else lb
        ub = np.full(n, np.inf) if ub is None else ub
        return cls(sp.csr_matrix(A), np.array(list(senses)), rhs, c, lb, ub, maximize)

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.where(self.senses == "L", -np.inf, self.rhs)
        hi = np.where(self.senses == "G", np.inf, self.rhs)
        return lo, hi

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest bound or row violation of ``x`` (0 when feasible)."""
        act = self.A @ x
        lo, hi = self.row_bounds()
        viol = [np.maximum(lo - act, 0.0), np.maximum(act - hi, 0.0),
                np.maximum(self.lb - x, 0.0), np.maximum(x - self.ub, 0.0)]
        return float(max((v.max() if v.size else 0.0) for v in viol))


@dataclass
class Basis:
    """Status of every column and every row slack, plus pricing weights."""

    col_status: np.ndarray
    row_status: np.ndarray
    weights: np.ndarray | None = None

    def basic_count(self) -> int:
        return int(np.count_nonzero(self.col_status == BASIC)
                   + np.count_nonzero(self.row_status == BASIC))


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    farkas: np.ndarray | None = None
    basis: Basis | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def farkas_gap(problem: LpProblem, ray: np.ndarray, zero_tol: float = 1e-9) -> float:
    """Certificate value of a sign-adjusted Farkas ray (positive proves infeasibility).

    Returns ``-inf`` when the ray has the wrong sign on an inequality row or
    points into an unbounded direction of the column box.
    """
    ray = np.asarray(ray, dtype=float)
    if ray.shape != (problem.m,):
        return -np.inf
    ineq = problem.senses != "E"
    if np.any(ray[ineq] < -zero_tol):
        return -np.inf
    sign = np.where(problem.senses == "G", -1.0, 1.0)
    ybar = ray * sign
    g = problem.A.T @ ybar
    scale = max(1.0, float(np.abs(ray).max(initial=0.0)))
    g = np.where(np.abs(g) <= zero_tol * scale, 0.0, g)
    if np.any((g > 0) & ~np.isfinite(problem.lb)) or np.any((g < 0) & ~np.isfinite(problem.ub)):
        return -np.inf
    lo = np.where(np.isfinite(problem.lb), problem.lb, 0.0)
    hi = np.where(np.isfinite(problem.ub), problem.ub, 0.0)
    box_min = float(np.sum(np.where(g > 0, g * lo, g * hi)))
    return box_min - float(ybar @ problem.rhs)


def dual_objective(problem: LpProblem, duals: np.ndarray, reduced_costs: np.ndarray,
                   tol: float = 1e-9) -> float:
    """Lagrangian dual bound ``b^T y + sum_j d_j * bound_j`` for the reported duals."""
    sgn = -1.0 if problem.maximize else 1.0
    d = reduced_costs * sgn
    use_lo = d > tol
    use_hi = d < -tol
    with np.errstate(invalid="ignore"):
        terms = np.where(use_lo, d * problem.lb, np.where(use_hi, d * problem.ub, 0.0))
    return float(problem.rhs @ duals) + sgn * float(np.sum(terms))


class _Simplex:
    """One solve of ``min cost z  s.t.  [A -I] z = 0,  lo <= z <= up``."""

    def __init__(self, A: sp.csc_matrix, cost, lo, up, max_iter):
        self.A = A
        self.At = A.T.tocsr()
        self.m, self.n = A.shape
        self.cost = cost
        self.lo = lo
        self.up = up
        self.max_iter = max_iter
        self.fixed = lo == up
        self.iters = 0
        self.head = np.empty(0, dtype=np.int64)
        self.status = np.empty(0, dtype=np.int8)
        self.x = np.zeros(self.n + self.m)
        self.gamma = np.ones(self.n + self.m)
        self.Binv = None
        self.since_refactor = 0
        self.bland = False
        self.stall = 0
        self.phase1_cost = None

    # -- linear algebra helpers -------------------------------------------------
    def column(self, j: int) -> np.ndarray:
        v = np.zeros(self.m)
        if j < self.n:
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            v[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        else:
            v[j - self.n] = -1.0
        return v

    def mt_dot(self, y: np.ndarray) -> np.ndarray:
        """``[A -I]^T y`` for all n+m columns."""
        return np.concatenate([self.At @ y, -y])

    def ftran(self, j: int) -> np.ndarray:
        if j < self.n:
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            return self.Binv[:, self.A.indices[lo:hi]] @ self.A.data[lo:hi]
        return -self.Binv[:, j - self.n]

    def refactor(self):
        B = np.empty((self.m, self.m), order="F")
        for i, j in enumerate(self.head):
            B[:, i] = self.column(int(j))
        try:
            self.Binv = np.asfortranarray(np.linalg.inv(B))
        except np.linalg.LinAlgError as exc:
            raise LpError("singular basis") from exc
        if not np.all(np.isfinite(self.Binv)):
            raise LpError("singular basis")
        self.since_refactor = 0
        self.recompute_basics()

    def recompute_basics(self):
        z = self.x.copy()
        z[self.head] = 0.0
        r = self.A @ z[: self.n] - z[self.n:]
        self.x[self.head] = -(self.Binv @ r)

    def residual(self) -> float:
        r = self.A @ self.x[: self.n] - self.x[self.n:]
        return float(np.abs(r).max(initial=0.0))

    # -- basis setup -------------------------------------------------------------
    def nonbasic_value(self, j: int, st: int) -> float:
        if st == AT_LOWER:
            return self.lo[j]
        if st == AT_UPPER:
            return self.up[j]
        return 0.0

    def default_status(self, j: int) -> int:
        if np.isfinite(self.lo[j]):
            return AT_LOWER
        if np.isfinite(self.up[j]):
            return AT_UPPER
        return FREE

    def fix_status(self, j: int, st: int) -> int:
        if st == AT_LOWER and not np.isfinite(self.lo[j]):
            return self.default_status(j)
        if st == AT_UPPER and not np.isfinite(self.up[j]):
            return self.default_status(j)
        if st == FREE and (np.isfinite(self.lo[j]) or np.isfinite(self.up[j])):
            return self.default_status(j)
        return st

    def setup(self, hint: Basis | None):
        total = self.n + self.m
        status = np.array([self.default_status(j) for j in range(total)], dtype=np.int8)
        head = None
        weights = None
        if hint is not None:
            st = np.concatenate([hint.col_status, hint.row_status]).astype(np.int8)
            if st.shape == (total,):
                basic = np.flatnonzero(st == BASIC)
                for j in range(total):
                    if st[j] != BASIC:
                        status[j] = self.fix_status(j, int(st[j]))
                if basic.size == self.m:
                    head = basic
                    status[basic] = BASIC
                if hint.weights is not None and hint.weights.shape == (total,):
                    weights = hint.weights.copy()
        if head is None:
            head = np.arange(self.n, total)
            status[: self.n] = [s if s != BASIC else self.default_status(j)
                                for j, s in enumerate(status[: self.n])]
            status[head] = BASIC
            weights = None
        self.head = head.astype(np.int64)
        self.status = status
        for j in range(total):
            if status[j] != BASIC:
                self.x[j] = self.nonbasic_value(j, int(status[j]))
        try:
            self.refactor()
        except LpError:
            log.debug("hinted basis singular, falling back to slack basis")
            self.setup(None)
            return
        if weights is not None:
            self.gamma = weights
        elif np.array_equal(self.head, np.arange(self.n, total)):
            colsq = np.asarray(self.A.multiply(self.A).sum(axis=0)).ravel()
            self.gamma = np.concatenate([1.0 + colsq, np.ones(self.m)])
        else:
            self.gamma = np.ones(total)

    # -- main loop ---------------------------------------------------------------
    def infeasibility(self):
        xb = self.x[self.head]
        below = xb < self.lo[self.head] - FEAS_TOL
        above = xb > self.up[self.head] + FEAS_TOL
        return below, above

    def run(self) -> str:
        n, m = self.n, self.m
        degenerate_cut = 1e-12
        while True:
            if self.iters >= self.max_iter:
                return "iteration_limit"
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()
            elif self.since_refactor and self.since_refactor % 20 == 0:
                if self.residual() > RESIDUAL_TOL * (1.0 + np.abs(self.x).max(initial=0.0)):
                    self.refactor()
            below, above = self.infeasibility()
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(above, 1.0, np.where(below, -1.0, 0.0))
                y = cb @ self.Binv
                d = -self.mt_dot(y)
            else:
                cb = self.cost[self.head]
                y = cb @ self.Binv
                d = self.cost - self.mt_dot(y)
            d[self.head] = 0.0
            st = self.status
            movable = ~self.fixed
            elig_up = movable & (((st == AT_LOWER) | (st == FREE)) & (d < -OPT_TOL))
            elig_dn = movable & (((st == AT_UPPER) | (st == FREE)) & (d > OPT_TOL))
            elig = elig_up | elig_dn
            if not elig.any():
                self.last_y = y
                self.last_d = d
                if phase1:
                    self.phase1_cost = cb
                    return "infeasible"
                return "optimal"
            if self.bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                score = np.where(elig, d * d / self.gamma, -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.ftran(q)
            delta = -direction * alpha
            t, r, leave_at = self.ratio_test(q, direction, delta)
            if r == -2:
                if phase1:
                    # numerically impossible in phase 1; rebuild and retry once
                    self.refactor()
                    self.iters += 1
                    continue
                self.ray = (q, direction, delta)
                return "unbounded"
            self.iters += 1
            if t <= degenerate_cut:
                self.stall += 1
                if self.stall > STALL_LIMIT:
                    self.bland = True
            else:
                self.stall = 0
                self.bland = False
            self.x[q] += direction * t
            self.x[self.head] += delta * t
            if r == -1:
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[q] = self.up[q] if direction > 0 else self.lo[q]
                continue
            leaving = int(self.head[r])
            self.update_weights(q, r, alpha)
            piv = alpha[r]
            row_r = self.Binv[r, :] / piv
            self.Binv = blas.dger(-1.0, alpha, row_r, a=self.Binv, overwrite_a=True)
            self.Binv[r, :] = row_r
            self.head[r] = q
            self.status[q] = BASIC
            if leave_at == AT_UPPER:
                self.x[leaving] = self.up[leaving]
            else:
                self.x[leaving] = self.lo[leaving]
            self.status[leaving] = leave_at
            self.since_refactor += 1

    def ratio_test(self, q: int, direction: float, delta: np.ndarray):
        """Return (step, row, status_of_leaving); row -1 = bound flip, -2 = unbounded."""
        xb = self.x[self.head]
        lo = self.lo[self.head]
        up = self.up[self.head]
        amax = np.abs(delta).max(initial=0.0)
        ptol = max(PIVOT_TOL, 1e-11 * amax)
        dec = delta < -ptol
        inc = delta > ptol
        with np.errstate(invalid="ignore", divide="ignore"):
            above = xb > up + FEAS_TOL
            below = xb < lo - FEAS_TOL
            # decreasing basics block at upper if currently above it, else at lower
            tgt_dec = np.where(above, up, np.where(below, -np.inf, lo))
            tgt_inc = np.where(below, lo, np.where(above, np.inf, up))
            t_dec = np.where(dec, (xb - tgt_dec) / -delta, np.inf)
            t_inc = np.where(inc, (tgt_inc - xb) / delta, np.inf)
        t_all = np.minimum(t_dec, t_inc)
        t_all = np.where(np.isnan(t_all), np.inf, t_all)
        t_all = np.maximum(t_all, 0.0)
        span = (self.up[q] - self.x[q]) if direction > 0 else (self.x[q] - self.lo[q])
        t_min = t_all.min(initial=np.inf)
        if not np.isfinite(t_min) and not np.isfinite(span):
            return np.inf, -2, None
        if span <= t_min:
            return max(span, 0.0), -1, None
        window = t_min + 1e-12 * (1.0 + t_min)
        ties = np.flatnonzero(t_all <= window)
        if ties.size > 1:
            if self.bland:
                r = int(ties[np.argmin(self.head[ties])])
            else:
                mags = np.abs(delta[ties])
                strong = ties[mags >= 0.1 * mags.max()]
                r = int(strong[np.argmin(self.head[strong])])
        else:
            r = int(ties[0])
        decreasing = delta[r] < 0
        if decreasing:
            leave_at = AT_UPPER if xb[r] > up[r] + FEAS_TOL else AT_LOWER
        else:
            leave_at = AT_LOWER if xb[r] < lo[r] - FEAS_TOL else AT_UPPER
        j = int(self.head[r])
        if self.lo[j] == self.up[j]:
            leave_at = AT_LOWER
        return float(t_all[r]), r, leave_at

    def update_weights(self, q: int, r: int, alpha: np.ndarray):
        rho = self.Binv[r, :]
        alpha_r = self.mt_dot(rho)
        tau = self.Binv.T @ alpha
        a_tau = self.mt_dot(tau)
        piv = alpha[r]
        gq = 1.0 + float(alpha @ alpha)
        ratio = alpha_r / piv
        nb = self.status != BASIC
        nb[q] = False
        g = self.gamma
        upd = g - 2.0 * ratio * a_tau + ratio * ratio * gq
        g[nb] = np.maximum(upd[nb], 1.0 + ratio[nb] ** 2)
        leaving = int(self.head[r])
        g[leaving] = max(gq / (piv * piv), 1.0)

    def basis(self) -> Basis:
        st = self.status.copy()
        return Basis(st[: self.n].copy(), st[self.n:].copy(), self.gamma.copy())


@dataclass
class _Reduction:
    cols: np.ndarray
    rows: np.ndarray
    x_fixed: np.ndarray
    problem: LpProblem
    unbounded_column: bool = False


def presolve(p: LpProblem, tol: float = FEAS_TOL, keep_empty_columns: bool = False):
    """Drop fixed/empty columns and rows that are empty or implied by bounds.

    Returns a ``_Reduction`` or an infeasible ``LpOutcome`` carrying a
    single-row Farkas ray.  With ``keep_empty_columns`` only fixed columns
    are removed, so rows added later may still reference every free column.
    """
    A = p.A.tocsc()
    fixed = p.lb == p.ub
    x_fixed = np.where(fixed, p.lb, 0.0)
    rhs = p.rhs - A @ x_fixed
    keep_c = ~fixed
    lb = np.where(keep_c, p.lb, 0.0)
    ub = np.where(keep_c, p.ub, 0.0)
    Ar = p.A
    Apos = Ar.maximum(0.0)
    Aneg = Ar.minimum(0.0)
    lb_f = np.where(np.isfinite(lb), lb, 0.0)
    ub_f = np.where(np.isfinite(ub), ub, 0.0)
    inf_lb = (~np.isfinite(lb)).astype(float)
    inf_ub = (~np.isfinite(ub)).astype(float)
    pos_pat = (Apos != 0).astype(float)
    neg_pat = (Aneg != 0).astype(float)
    minact = Apos @ lb_f + Aneg @ ub_f
    maxact = Apos @ ub_f + Aneg @ lb_f
    min_inf = (pos_pat @ inf_lb + neg_pat @ inf_ub) > 0
    max_inf = (pos_pat @ inf_ub + neg_pat @ inf_lb) > 0
    minact = np.where(min_inf, -np.inf, minact)
    maxact = np.where(max_inf, np.inf, maxact)
    s = p.senses
    scale = 1.0 + np.abs(rhs)
    bad_le = (s != "G") & (minact > rhs + tol * scale)
    bad_ge = (s != "L") & (maxact < rhs - tol * scale)
    if bad_le.any() or bad_ge.any():
        ray = np.zeros(p.m)
        if bad_le.any():
            i = int(np.flatnonzero(bad_le)[0])
            ray[i] = 1.0
        else:
            i = int(np.flatnonzero(bad_ge)[0])
            ray[i] = 1.0 if s[i] == "G" else -1.0
        return LpOutcome("infeasible", farkas=ray)
    red_le = (s == "G") | (maxact <= rhs + tol * scale)
    red_ge = (s == "L") | (minact >= rhs - tol * scale)
    keep_r = ~(red_le & red_ge)
    rows = np.flatnonzero(keep_r)
    sub = Ar[rows][:, np.flatnonzero(keep_c)]
    used = np.zeros(p.n, dtype=bool)
    used[np.flatnonzero(keep_c)] = np.diff(sub.tocsc().indptr) > 0
    if keep_empty_columns:
        used = keep_c.copy()
    empty = keep_c & ~used
    c_eff = -p.c if p.maximize else p.c
    unbounded_col = False
    for j in np.flatnonzero(empty):
        if c_eff[j] > 0:
            v = p.lb[j]
        elif c_eff[j] < 0:
            v = p.ub[j]
        else:
            v = p.lb[j] if np.isfinite(p.lb[j]) else (p.ub[j] if np.isfinite(p.ub[j]) else 0.0)
        if not np.isfinite(v):
            unbounded_col = True
            v = p.lb[j] if np.isfinite(p.lb[j]) else (p.ub[j] if np.isfinite(p.ub[j]) else 0.0)
        x_fixed[j] = v
    cols = np.flatnonzero(used)
    reduced = LpProblem(Ar[rows][:, cols], s[rows], rhs[rows], p.c[cols],
                        p.lb[cols], p.ub[cols], p.maximize)
    return _Reduction(cols, rows, x_fixed, reduced, unbounded_col)


def _internal_arrays(p: LpProblem):
    lo_r, hi_r = p.row_bounds()
    lo = np.concatenate([p.lb, lo_r])
    up = np.concatenate([p.ub, hi_r])
    cost = np.concatenate([-p.c if p.maximize else p.c, np.zeros(p.m)])
    return cost, lo, up


def _finish(spx: _Simplex) -> str:
    """Run to termination, then re-verify once on a fresh factorization if drifted."""
    status = spx.run()
    if status in ("optimal", "infeasible") and spx.since_refactor:
        scale = 1.0 + np.abs(spx.x).max(initial=0.0)
        if spx.residual() > RESIDUAL_TOL * scale:
            spx.refactor()
            status = spx.run()
    return status


def _outcome(p: LpProblem, spx: _Simplex, status: str) -> LpOutcome:
    n = p.n
    basis = spx.basis()
    if status == "optimal":
        x = spx.x[:n].copy()
        y = spx.last_y
        duals = -y if p.maximize else y
        red = p.c - p.A.T @ duals
        return LpOutcome("optimal", x=x, objective=p.objective(x), duals=duals,
                         reduced_costs=red, basis=basis, iterations=spx.iters)
    if status == "infeasible":
        pi = spx.last_y
        ray = np.where(p.senses == "G", pi, -pi)
        ineq = p.senses != "E"
        ray[ineq] = np.maximum(ray[ineq], 0.0)
        top = np.abs(ray).max(initial=0.0)
        if top > 0:
            ray = ray / top
        return LpOutcome("infeasible", farkas=ray, basis=basis, iterations=spx.iters)
    if status == "unbounded":
        return LpOutcome("unbounded", basis=basis, iterations=spx.iters)
    return LpOutcome("iteration_limit", x=spx.x[:n].copy(), basis=basis, iterations=spx.iters)


def _no_rows(p: LpProblem) -> LpOutcome:
    n = p.n
    cost = -p.c if p.maximize else p.c
    default = np.where(np.isfinite(p.lb), p.lb, np.where(np.isfinite(p.ub), p.ub, 0.0))
    x = np.where(cost > 0, p.lb, np.where(cost < 0, p.ub, default))
    if not np.all(np.isfinite(x)):
        return LpOutcome("unbounded")
    return LpOutcome("optimal", x=x, objective=p.objective(x), duals=np.zeros(0),
                     reduced_costs=p.c.copy(),
                     basis=Basis(np.full(n, AT_LOWER, np.int8), np.zeros(0, np.int8)))


def _solve_core(p: LpProblem, hint: Basis | None, max_iter: int | None) -> LpOutcome:
    if p.m == 0:
        return _no_rows(p)
    if max_iter is None:
        max_iter = 50 * (p.m + p.n) + 1000
    cost, lo, up = _internal_arrays(p)
    attempts = [hint, None] if hint is not None else [None]
    for attempt, h in enumerate(attempts):
        spx = _Simplex(p.A.tocsc(), cost, lo, up, max_iter)
        try:
            spx.setup(h)
            status = _finish(spx)
        except LpError:
            if attempt + 1 < len(attempts):
                continue
            raise
        break
    return _outcome(p, spx, status)


class LpSession:
    """Repeated solves of one LP under changing column bounds and appended rows.

    The factorization of the last solve is kept; a hint that *is* the basis
    returned by the previous solve resumes from it without refactoring, which
    makes depth-first dives cheap.  Appended rows enter with basic slacks and
    extend the kept inverse by a block update.
    """

    def __init__(self, problem: LpProblem, max_iter: int | None = None):
        self.problem = problem
        self.max_iter = max_iter
        self._spx: _Simplex | None = None
        self._last: Basis | None = None

    @property
    def last_basis(self) -> Basis | None:
        """Basis of the latest solve; passing it back as the hint resumes in place."""
        return self._last

    def add_rows(self, rows: sp.csr_matrix, senses, rhs):
        p = self.problem
        rows = sp.csr_matrix(rows, dtype=float)
        self.problem = LpProblem(sp.vstack([p.A, rows]).tocsr(), np.concatenate([p.senses, senses]),
                                 np.concatenate([p.rhs, rhs]), p.c, p.lb, p.ub, p.maximize)
        spx = self._spx
        if spx is None:
            return
        k = rows.shape[0]
        m_old, n = spx.m, spx.n
        dense = rows.toarray()
        r = np.zeros((k, m_old))
        struct = spx.head < n
        r[:, struct] = dense[:, spx.head[struct]]
        Binv = np.zeros((m_old + k, m_old + k), order="F")
        Binv[:m_old, :m_old] = spx.Binv
        Binv[m_old:, :m_old] = r @ spx.Binv
        Binv[m_old:, m_old:] = -np.eye(k)
        new_slacks = np.arange(n + m_old, n + m_old + k)
        spx.A = self.problem.A.tocsc()
        spx.At = self.problem.A.T.tocsr()
        spx.m = m_old + k
        spx.Binv = Binv
        spx.head = np.concatenate([spx.head, new_slacks])
        spx.status = np.concatenate([spx.status, np.full(k, BASIC, np.int8)])
        act = dense @ spx.x[:n]
        lo_r = np.where(np.asarray(senses) == "L", -np.inf, rhs)
        hi_r = np.where(np.asarray(senses) == "G", np.inf, rhs)
        spx.x = np.concatenate([spx.x, act])
        spx.lo = np.concatenate([spx.lo, lo_r])
        spx.up = np.concatenate([spx.up, hi_r])
        spx.cost = np.concatenate([spx.cost, np.zeros(k)])
        spx.fixed = spx.lo == spx.up
        spx.gamma = np.concatenate([spx.gamma, np.ones(k)])
        if self._last is not None:
            self._last = spx.basis()

    def solve(self, lb: np.ndarray, ub: np.ndarray, hint: Basis | None = None) -> LpOutcome:
        p = self.problem
        p_now = LpProblem(p.A, p.senses, p.rhs, p.c, lb, ub, p.maximize)
        if p.m == 0:
            return _no_rows(p_now)
        max_iter = self.max_iter or 50 * (p.m + p.n) + 1000
        spx = self._spx
        reuse = spx is not None and hint is not None and hint is self._last
        try:
            if reuse:
                spx.lo[: p.n] = lb
                spx.up[: p.n] = ub
                spx.fixed = spx.lo == spx.up
                spx.iters = 0
                spx.max_iter = max_iter
                spx.bland = False
                spx.stall = 0
                for j in np.flatnonzero(spx.status[: p.n] != BASIC):
                    st = spx.fix_status(int(j), int(spx.status[j]))
                    spx.status[j] = st
                    spx.x[j] = spx.nonbasic_value(int(j), st)
                spx.recompute_basics()
            else:
                cost, lo, up = _internal_arrays(p_now)
                spx = _Simplex(p.A.tocsc(), cost, lo, up, max_iter)
                spx.setup(_pad_hint(hint, p.m))
            status = _finish(spx)
        except LpError:
            cost, lo, up = _internal_arrays(p_now)
            spx = _Simplex(p.A.tocsc(), cost, lo, up, max_iter)
            spx.setup(None)
            status = _finish(spx)
        self._spx = spx
        out = _outcome(p_now, spx, status)
        self._last = out.basis
        _check_farkas(p_now, out)
        return out


def _pad_hint(hint: Basis | None, m: int) -> Basis | None:
    """Extend a basis from before rows were appended: new slacks are basic."""
    if hint is None or hint.row_status.shape[0] == m:
        return hint
    extra = m - hint.row_status.shape[0]
    if extra < 0:
        return None
    weights = None
    if hint.weights is not None:
        weights = np.concatenate([hint.weights, np.ones(extra)])
    return Basis(hint.col_status, np.concatenate([hint.row_status, np.full(extra, BASIC, np.int8)]),
                 weights)


def solve_lp(problem: LpProblem, hint: Basis | None = None, *, presolve_rows: bool = True,
             max_iter: int | None = None) -> LpOutcome:
    """Solve an LP; ``hint`` is a basis of ``problem`` (full index space)."""
    if not presolve_rows:
        out = _solve_core(problem, hint, max_iter)
        _check_farkas(problem, out)
        return out
    red = presolve(problem)
    if isinstance(red, LpOutcome):
        _check_farkas(problem, red)
        return red
    sub_hint = None
    if hint is not None:
        sub_hint = Basis(hint.col_status[red.cols], hint.row_status[red.rows])
        if sub_hint.basic_count() != red.problem.m:
            sub_hint = Basis(np.where(sub_hint.col_status == BASIC, AT_LOWER, sub_hint.col_status).astype(np.int8),
                             np.zeros(red.problem.m, dtype=np.int8))
    out = _solve_core(red.problem, sub_hint, max_iter)
    if red.unbounded_column and out.status in ("optimal", "unbounded"):
        return LpOutcome("unbounded", iterations=out.iterations)
    full_basis = None
    if out.basis is not None:
        cs = np.full(problem.n, AT_LOWER, dtype=np.int8)
        cs[problem.ub == red.x_fixed] = AT_UPPER
        cs[problem.lb == red.x_fixed] = AT_LOWER
        cs[red.cols] = out.basis.col_status
        rs = np.zeros(problem.m, dtype=np.int8)
        rs[red.rows] = out.basis.row_status
        full_basis = Basis(cs, rs)
    if out.status == "optimal":
        x = red.x_fixed.copy()
        x[red.cols] = out.x
        duals = np.zeros(problem.m)
        duals[red.rows] = out.duals
        red_costs = problem.c - problem.A.T @ duals
        return LpOutcome("optimal", x=x, objective=problem.objective(x), duals=duals,
                         reduced_costs=red_costs, basis=full_basis, iterations=out.iterations)
    if out.status == "infeasible":
        ray = np.zeros(problem.m)
        ray[red.rows] = out.farkas
        res = LpOutcome("infeasible", farkas=ray, basis=full_basis, iterations=out.iterations)
        _check_farkas(problem, res)
        return res
    x = None
    if out.x is not None:
        x = red.x_fixed.copy()
        x[red.cols] = out.x
    return LpOutcome(out.status, x=x, basis=full_basis, iterations=out.iterations)


def _check_farkas(problem: LpProblem, out: LpOutcome):
    if out.status != "infeasible":
        return
    if out.farkas is None or farkas_gap(problem, out.farkas) <= 0:
        raise LpError("infeasibility detected without a valid Farkas certificate")
