"""Hybridem package.

Hybrid method-of-moments / generalized-scattering-matrix solver for
antennas mounted near large structures.
"""

from .config import Scenario, load_scenario
from .errors import GeometryError, HybridemError, MeshError, SolverError, ValidationError
from .gsm import Gsm, PortWaves, gsm_transform, load_gsm, save_gsm
from .hybrid import build_hybrid, effective_sparams, smw_solve, solve_hybrid
from .runner import RunReport, compare, run

__all__ = [
    "GeometryError",
    "Gsm",
    "HybridemError",
    "MeshError",
    "PortWaves",
    "RunReport",
    "Scenario",
    "SolverError",
    "ValidationError",
    "build_hybrid",
    "compare",
    "effective_sparams",
    "gsm_transform",
    "load_gsm",
    "load_scenario",
    "run",
    "save_gsm",
    "smw_solve",
    "solve_hybrid",
]
__version__ = "0.1.0"
