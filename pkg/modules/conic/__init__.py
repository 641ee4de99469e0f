"""
Conic Package: Zwischendarstellung konvexer QCQPs und Solver-Backends.
"""

from .program import QuadraticRow, LinearBlock, ConicProgram, canonicalize, program_from_arrays
from .backends import SolverBackend, CvxpyBackend, BackendRegistry, solver_options, solve

__all__ = [
    'QuadraticRow', 'LinearBlock', 'ConicProgram', 'canonicalize', 'program_from_arrays',
    'SolverBackend', 'CvxpyBackend', 'BackendRegistry', 'solver_options', 'solve'
]
