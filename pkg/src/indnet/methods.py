"""Direct and two-stage solves of an instance, returning decoded designs."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from .bb import Limits, SolveStats, solve_milp
from .formulation import build_ind, build_sequential
from .instance import TransitInstance
from .solution import DesignSolution, extract_solution

log = logging.getLogger(__name__)


@dataclass
class MethodResult:
    solution: DesignSolution | None
    stats: SolveStats

    @property
    def objective(self) -> float | None:
        return self.stats.obj_v


@dataclass
class SequentialResult(MethodResult):
    stage1_objective: float | None = None
    stage1_solution: DesignSolution | None = None


def solve_direct(inst: TransitInstance, limits: Limits | None = None, log_every: int = 100) -> MethodResult:
    model = build_ind(inst)
    res = solve_milp(model, limits=limits, log_every=log_every)
    sol = extract_solution(inst, model, res.values) if res.values is not None else None
    return MethodResult(sol, res.stats)


def solve_sequential(inst: TransitInstance, limits: Limits | None = None,
                     log_every: int = 100) -> SequentialResult:
    """Best rapid line on its own, then the best slow line around it.

    The reported objective is the joint coverage after the second stage.
    Both stages share ``limits.time`` if one is given.
    """
    start = time.perf_counter()
    models = build_sequential(inst)
    first = solve_milp(models.stage1, limits=limits, log_every=log_every)
    if first.values is None:
        stats = first.stats
        return SequentialResult(None, stats)
    stage1 = extract_solution(inst, models.stage1, first.values)
    log.info("stage one covers %g", first.stats.obj_v)
    remaining = limits
    if limits is not None and limits.time is not None:
        remaining = Limits(max(limits.time - first.stats.t, 0.0), limits.nodes, limits.gap)
    refit = models.refit(stage1.rapid_design())
    second = solve_milp(refit, limits=remaining, log_every=log_every)
    sol = extract_solution(inst, refit, second.values) if second.values is not None else None
    stats = second.stats
    stats.t = time.perf_counter() - start
    stats.nodes += first.stats.nodes
    return SequentialResult(sol, stats, first.stats.obj_v, stage1)
