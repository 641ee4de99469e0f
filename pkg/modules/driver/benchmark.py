"""
Benchmark-Tabelle über mehrere Prädiktionshorizonte.

Je Horizont: Solver-Zeit pro SCR-Iteration, Anzahl Restriktionszeilen, Iterationen
bis zur Konvergenz und nominelle Kosten des Closed-Loop-Laufs ohne Störung.
"""

from typing import Optional, Sequence

import numpy as np
import pandas as pd

from config import BENCHMARK_CONFIG, SCROptions
from ..simulation import receding_horizon_run, scr_solve
from ..utils.logger import handle_exceptions, logger
from .scenario import Scenario

BENCH_COLUMNS = ['horizon', 'status', 'solver_time_per_iteration', 'constraints', 'census_bound',
                 'iterations', 'cost_upper', 'nominal_cost', 'closed_loop_steps']


def bench_row(scenario: Scenario, horizon: int, closed_loop_steps: int,
              options: Optional[SCROptions] = None) -> dict:
    """Eine Tabellenzeile für den Horizont `horizon`."""
    options = options or scenario.to_options()
    problem = scenario.to_problem(horizon)
    N, m = problem.horizon, problem.model.m

    certificate = scr_solve(problem, np.zeros((N, m)), options)
    times = [s.wall_time for s in certificate.solver_stats]

    run = receding_horizon_run(problem, total_steps=closed_loop_steps, replan_period=scenario.replan_period,
                               disturbance_source='zero', seed=scenario.seed, options=options)
    nominal_cost = problem.cost(run.state_array, run.control_array) if run.controls else None

    return {
        'horizon': N,
        'status': certificate.status.value,
        'solver_time_per_iteration': float(np.mean(times)) if times else None,
        'constraints': certificate.census.get('restriction_total'),
        'census_bound': certificate.census.get('bound'),
        'iterations': certificate.iterations,
        'cost_upper': certificate.cost_upper,
        'nominal_cost': nominal_cost,
        'closed_loop_steps': run.completed_steps,
    }


@handle_exceptions("Benchmark table")
def bench_table(scenario: Scenario, horizons: Optional[Sequence[int]] = None,
                closed_loop_steps: int = BENCHMARK_CONFIG['closed_loop_steps'],
                options: Optional[SCROptions] = None) -> pd.DataFrame:
    """Eine Zeile je Horizont (Standard 10, 20, 30, 40)."""
    horizons = list(horizons or BENCHMARK_CONFIG['horizons'])
    rows = []
    for horizon in horizons:
        with logger.track_performance(f"Benchmark N={horizon}"):
            rows.append(bench_row(scenario, horizon, closed_loop_steps, options))
        logger.info(f"Benchmark N={horizon}: {rows[-1]['iterations']} iterations, "
                    f"{rows[-1]['constraints']} constraints, status {rows[-1]['status']}")
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)


__all__ = ['BENCH_COLUMNS', 'bench_row', 'bench_table']
