"""Difference potentials solver for heat equations with dynamic boundary
conditions and bulk-surface coupling on a sphere."""

from .geometry import GridSpec, classify_nodes, boundary_nodes
from .apsolver import APSolver, solve_ap
from .potentials import Potentials
from .harmonics import SpectralBasis
from .mms import TESTS, get_test
from .metrics import ErrorReport, SurfaceGrid
from .timeloop import DPMRun, run

__all__ = [
    "GridSpec",
    "classify_nodes",
    "boundary_nodes",
    "APSolver",
    "solve_ap",
    "Potentials",
    "SpectralBasis",
    "TESTS",
    "get_test",
    "ErrorReport",
    "SurfaceGrid",
    "DPMRun",
    "run",
]
__version__ = "0.1.0"
