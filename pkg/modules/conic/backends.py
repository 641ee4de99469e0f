"""
Solver-Backends für das ConicProgram.

Ein Backend nimmt die Zwischendarstellung unverändert entgegen und liefert
Primalwerte für alle Variablen. solve() prüft das Ergebnis unabhängig nach,
bevor es als optimal gemeldet wird.
"""

import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np

from config import SOLVER_CONFIG, SolverTolerances
from ..data_models import SolveOutcome, SolverStats, SolveStatus
from ..exceptions import BackendUnavailableError
from ..utils.logger import logger
from .program import ConicProgram

# Rohergebnis eines Backends: (Status, Primal, Zielwert, Iterationen, Solver-Status)
RawResult = Tuple[SolveStatus, Optional[np.ndarray], Optional[float], Optional[int], str]

FALLBACK_SOLVERS = ('CLARABEL', 'ECOS', 'SCS')


class SolverBackend(ABC):
    """Adapter-Vertrag: IR rein, Primalwerte raus. Keine backend-spezifischen Optionen in der IR."""

    name: str = 'abstract'

    @abstractmethod
    def available(self) -> bool:
        """Ist das Backend importierbar?"""

    @abstractmethod
    def solve(self, program: ConicProgram, tolerances: SolverTolerances, solver: Optional[str] = None,
              warm_start: Optional[np.ndarray] = None) -> RawResult:
        """Löst das Programm; Unzulässigkeit ist ein Status, kein Fehler."""

    def resolve_solver(self, solver: Optional[str]) -> str:
        return (solver or SOLVER_CONFIG['solver']).upper()


def solver_options(solver: str, tolerances: SolverTolerances) -> Dict[str, Any]:
    """Überträgt die Toleranzen auf die Optionsnamen des jeweiligen Solvers."""
    if solver == 'CLARABEL':
        return {'tol_feas': tolerances.feasibility, 'tol_gap_rel': tolerances.gap,
                'tol_gap_abs': tolerances.gap, 'max_iter': tolerances.max_iterations}
    if solver == 'ECOS':
        return {'feastol': tolerances.feasibility, 'reltol': tolerances.gap,
                'abstol': tolerances.gap, 'max_iters': tolerances.max_iterations}
    if solver == 'SCS':
        # Verfahren erster Ordnung: deutlich mehr Iterationen nötig
        return {'eps_abs': tolerances.feasibility, 'eps_rel': tolerances.gap,
                'max_iters': 50 * tolerances.max_iterations}
    return {}


class CvxpyBackend(SolverBackend):
    """Backend über cvxpy (Standard-Solver CLARABEL, Fallback ECOS/SCS)."""

    name = 'cvxpy'

    def available(self) -> bool:
        try:
            import cvxpy  # noqa: F401
        except ImportError:
            return False
        return True

    def _pick_solver(self, cp, requested: str) -> str:
        installed = set(cp.installed_solvers())
        if requested in installed:
            return requested
        for candidate in FALLBACK_SOLVERS:
            if candidate in installed:
                logger.warning(f"Solver {requested} not installed, falling back to {candidate}")
                return candidate
        raise BackendUnavailableError(self.name, f"none of {', '.join(FALLBACK_SOLVERS)} is installed")

    def build(self, program: ConicProgram):
        """cvxpy-Problem aus der IR (vektorisiert)."""
        import cvxpy as cp

        v = cp.Variable(program.n_var)
        constraints = []
        if program.n_in:
            constraints.append(program.A_in @ v <= program.b_in)
        if program.n_eq:
            constraints.append(program.A_eq @ v == program.b_eq)

        lower, upper = program.lower, program.upper
        fixed = np.isfinite(lower) & np.isfinite(upper) & (lower == upper)
        idx_fixed = np.flatnonzero(fixed)
        idx_lower = np.flatnonzero(np.isfinite(lower) & ~fixed)
        idx_upper = np.flatnonzero(np.isfinite(upper) & ~fixed)
        if idx_fixed.size:
            constraints.append(v[idx_fixed] == lower[idx_fixed])
        if idx_lower.size:
            constraints.append(v[idx_lower] >= lower[idx_lower])
        if idx_upper.size:
            constraints.append(v[idx_upper] <= upper[idx_upper])

        if program.n_quad:
            F, S, A_q, b_q = program.quadratic_factors()
            if F.shape[0]:
                constraints.append(0.5 * (S @ cp.square(F @ v)) + A_q @ v <= b_q)
            else:
                constraints.append(A_q @ v <= b_q)

        expr = program.objective @ v
        if program.objective_P is not None and program.objective_P.nnz:
            expr = expr + 0.5 * cp.quad_form(v, cp.psd_wrap(program.objective_P))
        objective = cp.Maximize(expr) if program.sense == 'maximize' else cp.Minimize(expr)
        return cp.Problem(objective, constraints), v

    def solve(self, program: ConicProgram, tolerances: SolverTolerances, solver: Optional[str] = None,
              warm_start: Optional[np.ndarray] = None) -> RawResult:
        import cvxpy as cp

        name = self._pick_solver(cp, self.resolve_solver(solver))
        problem, v = self.build(program)
        use_warm = warm_start is not None and np.shape(warm_start) == (program.n_var,)
        if use_warm:
            v.value = np.asarray(warm_start, dtype=float)

        try:
            problem.solve(solver=name, warm_start=use_warm, **solver_options(name, tolerances))
        except cp.error.SolverError as e:
            logger.warning(f"cvxpy solver {name} raised: {e}")
            return SolveStatus.NUMERICAL_FAILURE, None, None, None, f'solver_error: {e}'

        status = problem.status
        iterations = getattr(problem.solver_stats, 'num_iters', None) if problem.solver_stats else None
        primal = None if v.value is None else np.asarray(v.value, dtype=float).reshape(program.n_var)
        objective = None if problem.value is None or not np.isfinite(problem.value) else float(problem.value)

        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return SolveStatus.OPTIMAL, primal, objective, iterations, status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SolveStatus.INFEASIBLE, None, None, iterations, status
        if status == cp.USER_LIMIT:
            return SolveStatus.ITERATION_LIMIT, primal, objective, iterations, status
        return SolveStatus.NUMERICAL_FAILURE, None, None, iterations, status


class BackendRegistry:
    """Registry der Solver-Backends, per Name aus der Konfiguration gewählt."""

    _backends: Dict[str, Type[SolverBackend]] = {}

    @classmethod
    def register(cls, name: str, backend_class: Type[SolverBackend]) -> None:
        if not issubclass(backend_class, SolverBackend):
            raise ValueError(f"Backend class {backend_class.__name__} must extend SolverBackend")
        cls._backends[name] = backend_class
        logger.debug(f"Solver backend registered: {name}")

    @classmethod
    def get(cls, name: Optional[str] = None) -> SolverBackend:
        """
        Instanz eines verfügbaren Backends.

        Raises:
            BackendUnavailableError: unbekannt oder nicht importierbar
        """
        name = name or SOLVER_CONFIG['backend']
        if not cls._backends:
            cls.auto_discover()
        if name not in cls._backends:
            raise BackendUnavailableError(name, f"not registered (known: {', '.join(sorted(cls._backends))})")
        backend = cls._backends[name]()
        if not backend.available():
            raise BackendUnavailableError(name, "package not importable")
        return backend

    @classmethod
    def list_backends(cls) -> List[Dict[str, Any]]:
        if not cls._backends:
            cls.auto_discover()
        return [{'name': name, 'available': backend().available()} for name, backend in sorted(cls._backends.items())]

    @classmethod
    def auto_discover(cls) -> int:
        cls.register('cvxpy', CvxpyBackend)
        return len(cls._backends)


def solve(program: ConicProgram, tolerances: Optional[SolverTolerances] = None,
          backend: Optional[str] = None, solver: Optional[str] = None,
          warm_start: Optional[np.ndarray] = None) -> SolveOutcome:
    """
    Löst ein ConicProgram und prüft das Ergebnis unabhängig nach.

    Ein Optimum wird nur gemeldet, wenn alle Zeilen die normierte Toleranz
    tolerances.recheck einhalten; sonst lautet der Status NUMERICAL_FAILURE.

    Raises:
        BackendUnavailableError: Backend fehlt (Konfigurationsfehler)
    """
    tolerances = tolerances or SolverTolerances()

    if program.n_var == 0:
        stats = SolverStats(backend='none', solver='none', iterations=0, max_violation=0.0, raw_status='empty')
        return SolveOutcome(SolveStatus.OPTIMAL, np.zeros(0), 0.0, stats)

    engine = BackendRegistry.get(backend)
    solver_name = engine.resolve_solver(solver)

    start = time.perf_counter()
    status, primal, objective, iterations, raw = engine.solve(program, tolerances, solver, warm_start)
    wall_time = time.perf_counter() - start

    violation = None
    if primal is not None:
        violation, row = program.max_violation(primal)
        if status == SolveStatus.OPTIMAL and violation > tolerances.recheck:
            logger.warning(f"Re-check failed: row {row} violated by {violation:.3e} (normalized)")
            status = SolveStatus.NUMERICAL_FAILURE
        elif status == SolveStatus.OPTIMAL:
            objective = program.evaluate_objective(primal)

    stats = SolverStats(backend=engine.name, solver=solver_name, iterations=iterations,
                        wall_time=wall_time, max_violation=violation, raw_status=str(raw))
    logger.log_solve(engine.name, status.value, iterations, wall_time, violation,
                     n_var=program.n_var, n_constraints=program.n_constraints)

    if status != SolveStatus.OPTIMAL:
        return SolveOutcome(status, primal if status == SolveStatus.ITERATION_LIMIT else None, None, stats)
    return SolveOutcome(status, primal, objective, stats)


__all__ = ['SolverBackend', 'CvxpyBackend', 'BackendRegistry', 'solver_options', 'solve']
