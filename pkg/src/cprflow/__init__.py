"""Combinatorial potential-reduction interior-point solver for min-cost flow.

Typical use::

    from cprflow import ProblemInstance, solve
    inst = ProblemInstance(2, tail=[0], head=[1], demand=[-1, 1], cost=[5], capacity=[3])
    sol = solve(inst)
    sol.objective   # 5
"""

from .core import (UNCAPACITATED, DimacsParseError, InstanceError, NumericAlarm, ProblemInstance,
                   Solution, SolverError, Status, UnsupportedFeatureError, format_solution,
                   parse_dimacs, validate_solution, write_dimacs)
from .generators import FAMILIES, generate
from .oracle import ssp_mincost
from .pipeline import SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "UNCAPACITATED", "DimacsParseError", "InstanceError", "NumericAlarm", "ProblemInstance",
    "Solution", "SolverError", "Status", "UnsupportedFeatureError", "format_solution",
    "parse_dimacs", "validate_solution", "write_dimacs", "FAMILIES", "generate",
    "ssp_mincost", "SolverConfig", "solve",
]
