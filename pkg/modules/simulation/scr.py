"""
Sequential Convex Restriction: iterative Lösung des robusten MPC-Problems.

Jede Iteration
1. projiziert die nominalen Zustände auf die Hindernisse (Halbräume),
2. baut und löst die konvexe Restriktion am aktuellen Nominalpunkt,
3. rollt die neue Steuerfolge unter w^(0) als nächsten Nominalpunkt aus.

Jede erfolgreich gelöste Iteration ist für sich ein Zertifikat; zurückgegeben wird
die letzte mit ihrem Tube.
"""

from typing import List, Optional, Union

import numpy as np

from config import SCROptions
from ..conic import canonicalize, solve
from ..core.trajectory import nominal_from_controls
from ..data_models import (
    CertificateStatus, CertifiedSolution, MarginMode, MarginResult, NominalPoint, SolveStatus, SolverStats
)
from ..exceptions import DimensionError, NominalInObstacleError, NumericalFailureError, SeedInfeasibleError
from ..restriction import RobustMPCProblem, assemble_restriction, extract_solution
from ..utils.logger import logger


def _as_controls(problem: RobustMPCProblem, u: np.ndarray) -> np.ndarray:
    N, m = problem.horizon, problem.model.m
    u = np.asarray(u, dtype=float)
    if u.size != N * m:
        raise DimensionError(None, 'u', (N, m), u.shape)
    return u.reshape(N, m)


def nominal_rollout(problem: RobustMPCProblem, u: np.ndarray) -> NominalPoint:
    """Rollout von u unter den nominalen Störungen w^(0)."""
    u = _as_controls(problem, u)
    w = problem.uncertainty.nominal_disturbances(problem.horizon)
    return nominal_from_controls(problem.model, problem.x_init, u, w)


def extend_controls(u: np.ndarray, horizon: int, m: Optional[int] = None) -> np.ndarray:
    """Steuerfolge auf `horizon` Stufen kürzen oder mit Nullen auffüllen."""
    u = np.asarray(u, dtype=float)
    m = u.shape[1] if m is None and u.ndim == 2 else (m or 1)
    u = u.reshape(-1, m)
    if u.shape[0] >= horizon:
        return u[:horizon].copy()
    return np.vstack([u, np.zeros((horizon - u.shape[0], m))])


def _check_seed(problem: RobustMPCProblem, nominal: NominalPoint) -> None:
    hit = problem.obstacles.first_hit(nominal.x, range(1, problem.horizon + 1))
    if hit is not None:
        t, i = hit
        raise SeedInfeasibleError(f"nominal state at stage {t} lies inside obstacle {i}")


def scr_solve(problem: RobustMPCProblem, init_u: np.ndarray, options: Optional[SCROptions] = None,
              warm_start: Optional[np.ndarray] = None) -> CertifiedSolution:
    """
    SCR-Schleife ab der Startsteuerung init_u.

    Konvergiert, sobald sich c^u zwischen zwei Solves um weniger als options.epsilon
    ändert. `iterations` zählt die Conic-Solves.

    Args:
        problem: robustes MPC-Problem
        init_u: Startsteuerung (N, m); ihr Rollout muss hindernisfrei sein
        options: SCR-Parameter (Standard aus SCR_CONFIG)
        warm_start: Primalpunkt für den ersten Solve (gleiche Variablenlage)

    Returns:
        CertifiedSolution; INFEASIBLE_AT_SEED ohne Tube, falls schon der erste
        Solve scheitert

    Raises:
        SeedInfeasibleError: Rollout der Startsteuerung trifft ein Hindernis
    """
    options = options or SCROptions()
    nominal = nominal_rollout(problem, init_u)
    _check_seed(problem, nominal)

    history: List[float] = []
    stats: List[SolverStats] = []
    best: Optional[CertifiedSolution] = None
    previous_primal = warm_start
    status = CertificateStatus.ITERATION_LIMIT
    message = ""

    with logger.track_performance(f"SCR solve ({problem.name}, N={problem.horizon})"):
        for iteration in range(1, options.max_iterations + 1):
            try:
                restriction = assemble_restriction(problem, nominal, eps_safe=options.eps_safe)
            except NominalInObstacleError as e:
                if best is None:
                    raise SeedInfeasibleError(str(e)) from e
                status, message = CertificateStatus.SOLVER_FAILURE, str(e)
                break

            program = canonicalize(restriction)
            outcome = solve(program, options.tolerances, options.backend, options.solver, previous_primal)
            stats.append(outcome.stats)

            solution = None
            if outcome.optimal:
                try:
                    solution = extract_solution(restriction, outcome.primal)
                except NumericalFailureError as e:
                    logger.warning(f"SCR iteration {iteration}: {e}")

            if solution is None:
                if best is None:
                    status = CertificateStatus.INFEASIBLE_AT_SEED
                    message = f"restriction at the seed: {outcome.status.value}"
                else:
                    status = CertificateStatus.SOLVER_FAILURE
                    message = f"iteration {iteration}: {outcome.status.value}; returning iterate {best.iterations}"
                logger.log_iteration(iteration, float('nan'), None, outcome.status.value)
                break

            new_nominal = nominal_rollout(problem, solution.u)
            change = abs(solution.cost_upper - history[-1]) if history else None
            history.append(solution.cost_upper)
            best = CertifiedSolution(
                status=CertificateStatus.ITERATION_LIMIT,
                u=solution.u,
                tube=solution.tube,
                gamma_init=problem.uncertainty.gamma_init,
                gamma_dyn=problem.uncertainty.gamma_dyn,
                cost_upper=solution.cost_upper,
                nominal=new_nominal,
                anchor=restriction.nominal,
                iterations=iteration,
                census=dict(restriction.census),
                primal=outcome.primal,
            )

            converged = change is not None and change < options.epsilon
            logger.log_iteration(iteration, solution.cost_upper, change,
                                 'converged' if converged else 'continue',
                                 census_total=restriction.census['restriction_total'])
            if converged:
                status = CertificateStatus.CONVERGED
                break
            nominal = new_nominal
            previous_primal = outcome.primal

    if best is None:
        logger.warning(f"SCR found no certificate: {message}")
        return CertifiedSolution(status=status, u=None, tube=None,
                                 gamma_init=problem.uncertainty.gamma_init,
                                 gamma_dyn=problem.uncertainty.gamma_dyn, cost_upper=None,
                                 nominal=nominal, anchor=None, iterations=len(stats),
                                 objective_history=history, solver_stats=stats, message=message)

    best.status = status
    best.objective_history = history
    best.solver_stats = stats
    best.message = message or status.value
    best.nominal_cost = problem.cost(best.nominal.x, best.nominal.u)
    logger.log_certificate(status.value, best.gamma, best.cost_upper, best.census.get('restriction_total'))
    return best


def scr_solve_continuation(problem: RobustMPCProblem, init_u: np.ndarray, seed_horizon: int,
                           options: Optional[SCROptions] = None) -> CertifiedSolution:
    """
    Erst SCR auf dem kürzeren Horizont seed_horizon, dann mit aufgefüllter
    Steuerung auf dem vollen Horizont (Tube wird neu bestimmt).
    """
    if seed_horizon >= problem.horizon:
        return scr_solve(problem, init_u, options)
    m = problem.model.m
    short = problem.with_horizon(seed_horizon)
    seed = scr_solve(short, extend_controls(init_u, seed_horizon, m), options)
    if not seed.certified:
        logger.warning(f"Seed horizon N={seed_horizon} failed ({seed.status.value}), using init_u")
        return scr_solve(problem, init_u, options)
    logger.info(f"Continuing from N={seed_horizon} to N={problem.horizon}")
    return scr_solve(problem, extend_controls(seed.u, problem.horizon, m), options)


def certify_margin(problem: RobustMPCProblem, u: np.ndarray, mode: Union[MarginMode, str],
                   options: Optional[SCROptions] = None) -> MarginResult:
    """
    Maximiert γ bei fester Steuerung u; Ergebnis ist eine zertifizierte untere
    Schranke der Robustheitsmarge.

    Args:
        mode: init (nur w_init), dyn (nur w_t) oder joint (beide mit gleichem γ)

    Returns:
        MarginResult; γ = 0 mit Diagnose, wenn schon γ = 0 unzulässig ist oder der
        Nominalzustand ein Hindernis berührt; γ = inf ohne aktive Sicherheitsbedingung
    """
    options = options or SCROptions()
    mode = MarginMode.parse(mode) if isinstance(mode, str) else mode
    u = _as_controls(problem, u)
    nominal = nominal_rollout(problem, u)

    try:
        restriction = assemble_restriction(problem, nominal, mode=mode, fixed_u=u, eps_safe=options.eps_safe)
    except NominalInObstacleError as e:
        logger.warning(f"Margin ({mode.value}) is zero: {e}")
        return MarginResult(mode=mode, gamma=0.0, status=SolveStatus.INFEASIBLE, diagnostic=str(e))

    if restriction.safety.rows == 0:
        diagnostic = "no active safety constraint, margin is unbounded"
        logger.warning(f"Margin ({mode.value}): {diagnostic}")
        return MarginResult(mode=mode, gamma=float('inf'), status=SolveStatus.OPTIMAL,
                            diagnostic=diagnostic, census=dict(restriction.census))

    program = canonicalize(restriction)
    outcome = solve(program, options.tolerances, options.backend, options.solver)

    if outcome.status == SolveStatus.INFEASIBLE:
        diagnostic = "restriction infeasible even at gamma = 0"
        logger.warning(f"Margin ({mode.value}): {diagnostic}")
        return MarginResult(mode=mode, gamma=0.0, status=outcome.status, diagnostic=diagnostic,
                            census=dict(restriction.census), solver_stats=outcome.stats)

    if not outcome.optimal:
        if 'unbounded' in outcome.stats.raw_status.lower():
            return MarginResult(mode=mode, gamma=float('inf'), status=SolveStatus.OPTIMAL,
                                diagnostic="margin is unbounded", census=dict(restriction.census),
                                solver_stats=outcome.stats)
        return MarginResult(mode=mode, gamma=0.0, status=outcome.status,
                            diagnostic=f"solver: {outcome.stats.raw_status}",
                            census=dict(restriction.census), solver_stats=outcome.stats)

    solution = extract_solution(restriction, outcome.primal)
    gamma = max(float(solution.gamma), 0.0)
    logger.log_certificate(f"margin-{mode.value}", gamma, None, restriction.census['restriction_total'])
    return MarginResult(mode=mode, gamma=gamma, status=SolveStatus.OPTIMAL, tube=solution.tube,
                        census=dict(restriction.census), solver_stats=outcome.stats)


__all__ = [
    'nominal_rollout', 'extend_controls', 'scr_solve', 'scr_solve_continuation', 'certify_margin'
]
