"""Integrated design of a rapid transit line and a slow (bus) line.

The package builds the joint coverage MILP, solves it with a self-contained
simplex/branch-and-bound stack or by branch-and-Benders-cut, and checks the
results against an exhaustive oracle on small instances.
"""
from .bb import Limits, SolveStats, solve_milp
from .benders import PartialConfig, solve_benders
from .formulation import MilpModel, build_ind, build_sequential
from .instance import InstanceParams, TransitInstance, load_instance, save_instance
from .methods import solve_direct, solve_sequential
from .oracle import solve_exact
from .solution import DesignSolution, check_feasibility, extract_solution

__all__ = [
    "DesignSolution", "InstanceParams", "Limits", "MilpModel", "PartialConfig", "SolveStats",
    "TransitInstance", "build_ind", "build_sequential", "check_feasibility", "extract_solution",
    "load_instance", "save_instance", "solve_benders", "solve_direct", "solve_exact",
    "solve_milp", "solve_sequential",
]
