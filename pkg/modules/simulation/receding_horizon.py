"""
Receding-Horizon-Betrieb: SCR alle replan_period Schritte neu lösen, die ersten
Steuerungen anwenden, den Plant mit Störungen weiterrechnen.

Scheitert ein Replanning, fährt der Regler mit dem Rest des letzten zertifizierten
Plans weiter.
"""

from typing import Callable, Optional, Union

import numpy as np

from config import MPC_CONFIG, SCROptions
from ..core.model import eval_dynamics
from ..data_models import CertifiedSolution, CycleRecord, RunLog
from ..exceptions import InputError, NonFiniteStateError, SeedInfeasibleError
from ..restriction import RobustMPCProblem, VariableLayout
from ..utils.logger import logger
from .monte_carlo import sample_ellipsoid
from .scr import extend_controls, scr_solve

DisturbanceSource = Union[str, Callable[[int, np.random.Generator], np.ndarray]]


def _shift_stages(values: np.ndarray, width: int, offset: int, pad_terminal: bool) -> np.ndarray:
    if width == 0 or values.size == 0:
        return values.copy()
    stages = values.reshape(-1, width)
    kept = stages[offset:]
    pad_row = stages[-1] if pad_terminal else np.zeros(width)
    pad = np.tile(pad_row, (stages.shape[0] - kept.shape[0], 1))
    return np.vstack([kept, pad]).reshape(-1)


def shift_primal(layout: VariableLayout, primal: np.ndarray, offset: int) -> np.ndarray:
    """
    Primalpunkt um `offset` Stufen verschoben (Warmstart).

    Steuerungen und Residuenschranken werden mit Nullen aufgefüllt, Tube-Grenzen und
    Kostenschranken y mit ihren Endwerten.
    """
    v = np.asarray(primal, dtype=float).copy()
    offset = min(offset, layout.horizon)
    for name, width, terminal in (('u', layout.m, False), ('z_upper', layout.q, True),
                                  ('z_lower', layout.q, True), ('g_upper', layout.p, False),
                                  ('g_lower', layout.p, False), ('y', layout.k, True)):
        block = layout.block(name)
        v[block] = _shift_stages(v[block], width, offset, terminal)
    return v


def _disturbance_fn(problem: RobustMPCProblem, source: DisturbanceSource) -> Callable:
    if callable(source):
        return source
    uncertainty = problem.uncertainty
    if source == 'zero':
        return lambda step, rng: np.zeros(uncertainty.r)
    if source == 'sampled':
        def sampled(step: int, rng: np.random.Generator) -> np.ndarray:
            # Ellipsoid um w_t^(0), jenseits der Vorgabe um 0
            center = uncertainty.nominal_disturbances(step + 1)[step]
            sigma = uncertainty.sigma_at(min(step, len(uncertainty.sigma_dyn) - 1))
            return sample_ellipsoid(center, sigma, uncertainty.gamma_dyn, 1, False, rng)[0]
        return sampled
    raise InputError(f"Unknown disturbance source '{source}' (expected zero, sampled or a callable)")


def receding_horizon_run(problem: RobustMPCProblem, total_steps: int = MPC_CONFIG['total_steps'],
                         replan_period: int = MPC_CONFIG['replan_period'],
                         disturbance_source: DisturbanceSource = 'sampled', seed: int = 0,
                         options: Optional[SCROptions] = None,
                         init_u: Optional[np.ndarray] = None) -> RunLog:
    """
    Closed-Loop-Lauf über total_steps Schritte.

    Args:
        problem: Problem am Startzustand; der Horizont bleibt in jedem Zyklus gleich
        replan_period: Schritte zwischen zwei Replanungen (>= 1)
        disturbance_source: 'zero', 'sampled' (gleichverteilt im Störungsellipsoid um w_t^(0))
                            oder f(step, rng) -> w
        seed: Seed der Störungsfolge (je Schritt ein eigener Generator)
        init_u: Startsteuerung des ersten Zyklus (Standard: Nullen)

    Returns:
        RunLog mit Zuständen, Steuerungen, Zyklen und Ereignissen
    """
    if replan_period < 1:
        raise InputError(f"replan_period must be >= 1, got {replan_period}")
    if total_steps < 0:
        raise InputError(f"total_steps must be >= 0, got {total_steps}")

    options = options or SCROptions()
    N, m = problem.horizon, problem.model.m
    disturbance = _disturbance_fn(problem, disturbance_source)
    step_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(total_steps)]
    layout = VariableLayout(horizon=N, m=m, q=problem.model.q, p=problem.model.p, k=problem.cost_rows)

    run = RunLog(total_steps=total_steps, replan_period=replan_period, seed=seed)
    x = problem.x_init.copy()
    run.states.append(x.copy())

    plan: Optional[CertifiedSolution] = None
    plan_offset = 0
    seed_u = np.zeros((N, m)) if init_u is None else extend_controls(init_u, N, m)
    warm_start = None
    step = 0
    cycle = 0

    with logger.track_performance(f"Receding horizon run ({total_steps} steps)"):
        while step < total_steps:
            current = problem.with_initial_state(x)
            certificate = None
            try:
                certificate = scr_solve(current, seed_u, options, warm_start)
            except SeedInfeasibleError as e:
                run.events.append(f"step {step}: seed infeasible ({e})")

            used_fallback = False
            if certificate is not None and certificate.certified:
                plan, plan_offset = certificate, 0
                status = certificate.status.value
            else:
                if certificate is not None:
                    run.events.append(f"step {step}: replanning failed ({certificate.status.value})")
                if plan is None or plan_offset >= N:
                    run.events.append(f"step {step}: no certified plan left, stopping")
                    logger.warning(f"Receding horizon stopped at step {step}: no certified plan")
                    break
                used_fallback = True
                status = 'fallback'
                logger.warning(f"Step {step}: continuing with tail of previous plan (offset {plan_offset})")

            count = min(replan_period, total_steps - step, N - plan_offset)
            applied = plan.u[plan_offset:plan_offset + count]
            states = [x.copy()]
            try:
                for j in range(count):
                    w = np.asarray(disturbance(step + j, step_rngs[step + j]), dtype=float)
                    x = eval_dynamics(current.model, plan_offset + j, x, applied[j], w)
                    if not np.all(np.isfinite(x)):
                        raise NonFiniteStateError(step + j + 1)
                    states.append(x.copy())
                    run.states.append(x.copy())
                    run.controls.append(applied[j].copy())
            except NonFiniteStateError as e:
                run.events.append(f"step {step}: {e}")
                logger.error(f"Receding horizon aborted: {e}")
                break

            run.cycles.append(CycleRecord(
                cycle=cycle, start_step=step, x_start=states[0], status=status,
                applied_u=applied.copy(), states=np.array(states),
                cost_upper=plan.cost_upper, iterations=0 if used_fallback else plan.iterations,
                used_fallback=used_fallback, tube=plan.tube,
            ))

            plan_offset += count
            seed_u = extend_controls(plan.u[plan_offset:], N, m)
            warm_start = shift_primal(layout, plan.primal, plan_offset) if plan.primal is not None else None
            step += count
            cycle += 1

    logger.info(f"Receding horizon: {run.completed_steps}/{total_steps} steps in {len(run.cycles)} cycles, "
                f"{len(run.events)} events")
    return run


__all__ = ['shift_primal', 'receding_horizon_run']
