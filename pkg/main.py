"""
Kommandozeile des Robust-MPC-Toolkits.

Befehle:
    solve        SCR lösen und Zertifikat schreiben
    certify      zertifizierte Robustheitsmarge für eine feste Steuerfolge
    mpc          Receding-Horizon-Lauf
    verify       SCR lösen und per Monte Carlo prüfen
    bench-table  Tabelle über mehrere Horizonte

Exit-Codes: 0 Erfolg, 2 unzulässig, 3 Solver/Backend-Fehler, 4 Eingabefehler.
"""

import os
import sys
import time
import argparse
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from config import BENCHMARK_CONFIG, OUTPUT_CONFIG, VERIFY_CONFIG, validate_config
from modules.data_models import CertificateStatus, CertifiedSolution, MarginMode
from modules.driver import Scenario, bench_table, emit_results, load_scenario, write_csv, write_json
from modules.exceptions import InputError, RestrictionInfeasibleError, SCRError
from modules.models.ground_vehicle import open_loop_schedule
from modules.restriction import RobustMPCProblem
from modules.simulation import (
    certify_margin, monte_carlo_verify, receding_horizon_run, scr_solve, scr_solve_continuation
)
from modules.utils.logger import logger, write_health_check

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 3


# === HILFSFUNKTIONEN ===
def _load(args: argparse.Namespace) -> Scenario:
    scenario = load_scenario(args.scenario)
    return scenario.with_overrides(tol=args.tol, max_iters=args.max_iters, eps_safe=args.eps_safe,
                                   seed=args.seed)


def _solve(problem: RobustMPCProblem, scenario: Scenario, seed_horizon: Optional[int]) -> CertifiedSolution:
    N, m = problem.horizon, problem.model.m
    init_u = np.zeros((N, m))
    options = scenario.to_options()
    if seed_horizon:
        return scr_solve_continuation(problem, init_u, seed_horizon, options)
    return scr_solve(problem, init_u, options)


def _certificate_exit(certificate: CertifiedSolution) -> int:
    if certificate.status == CertificateStatus.INFEASIBLE_AT_SEED:
        raise RestrictionInfeasibleError(certificate.message)
    if certificate.status == CertificateStatus.SOLVER_FAILURE:
        logger.warning(f"⚠️ Solver failure after {certificate.iterations} iterations, last certificate kept")
        return EXIT_SOLVER_FAILURE
    return EXIT_OK


def _controls(source: str, problem: RobustMPCProblem) -> np.ndarray:
    """Steuerfolge: 'zero', 'open-loop' (Fahrzeug-Schema) oder Pfad zu einer controls.csv."""
    N, m = problem.horizon, problem.model.m
    if source == 'zero':
        return np.zeros((N, m))
    if source == 'open-loop':
        if m != 2:
            raise InputError(f"open-loop schedule needs 2 controls, model has {m}")
        return open_loop_schedule(N)
    try:
        frame = pd.read_csv(source)
    except (OSError, pd.errors.ParserError) as e:
        raise InputError(f"Cannot read controls from {source}: {e}") from e
    columns = [f'u{j}' for j in range(m)]
    missing = [c for c in columns if c not in frame.columns]
    if missing or len(frame) != N:
        raise InputError(f"{source}: expected {N} rows with columns {columns}")
    return frame[columns].to_numpy(dtype=float)


# === BEFEHLE ===
def cmd_solve(args: argparse.Namespace, timing: Dict[str, Any]) -> int:
    scenario = _load(args)
    problem = scenario.to_problem()
    start = time.perf_counter()
    certificate = _solve(problem, scenario, args.seed_horizon)
    timing['scr_wall_time'] = time.perf_counter() - start
    timing['solver_wall_times'] = [s.wall_time for s in certificate.solver_stats]
    emit_results(args.out, problem, certificate=certificate, plot=args.plot)
    logger.info(f"✅ solve: {certificate.status.value} after {certificate.iterations} iterations, "
                f"c^u={certificate.cost_upper}")
    return _certificate_exit(certificate)


def cmd_certify(args: argparse.Namespace, timing: Dict[str, Any]) -> int:
    scenario = _load(args)
    problem = scenario.to_problem()
    u = _controls(args.controls, problem)
    start = time.perf_counter()
    margin = certify_margin(problem, u, MarginMode.parse(args.mode), scenario.to_options())
    timing['certify_wall_time'] = time.perf_counter() - start
    emit_results(args.out, problem, margin=margin)
    logger.info(f"✅ certify ({margin.mode.value}): gamma={margin.gamma:.6g} {margin.diagnostic}")
    return EXIT_OK


def cmd_mpc(args: argparse.Namespace, timing: Dict[str, Any]) -> int:
    scenario = _load(args)
    problem = scenario.to_problem()
    steps = scenario.total_steps if args.steps is None else args.steps
    period = scenario.replan_period if args.period is None else args.period
    start = time.perf_counter()
    run = receding_horizon_run(problem, total_steps=steps, replan_period=period,
                               disturbance_source=args.disturbance, seed=scenario.seed,
                               options=scenario.to_options())
    timing['mpc_wall_time'] = time.perf_counter() - start
    emit_results(args.out, problem, run=run)
    if run.completed_steps == 0 and steps > 0:
        raise RestrictionInfeasibleError("no certified plan at the start state")
    logger.info(f"✅ mpc: {run.completed_steps}/{steps} steps, {len(run.events)} events")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, timing: Dict[str, Any]) -> int:
    scenario = _load(args)
    problem = scenario.to_problem()
    start = time.perf_counter()
    certificate = _solve(problem, scenario, args.seed_horizon)
    timing['scr_wall_time'] = time.perf_counter() - start
    code = _certificate_exit(certificate)

    start = time.perf_counter()
    report = monte_carlo_verify(certificate, problem, samples=args.samples, seed=scenario.seed,
                                gamma_scale=args.gamma_scale, containment_tol=args.containment_tol)
    timing['monte_carlo_wall_time'] = time.perf_counter() - start
    emit_results(args.out, problem, certificate=certificate, report=report, plot=args.plot)
    marker = "✅" if report.passed else "⚠️"
    logger.info(f"{marker} verify: {report.violations} violations in {report.samples} samples")
    return code


def cmd_bench_table(args: argparse.Namespace, timing: Dict[str, Any]) -> int:
    scenario = _load(args)
    horizons = args.horizons or BENCHMARK_CONFIG['horizons']
    start = time.perf_counter()
    table = bench_table(scenario, horizons, closed_loop_steps=args.steps or BENCHMARK_CONFIG['closed_loop_steps'])
    timing['bench_wall_time'] = time.perf_counter() - start
    os.makedirs(args.out, exist_ok=True)
    write_csv(table, os.path.join(args.out, 'bench_table.csv'))
    logger.info(f"✅ bench-table: {len(table)} rows\n{table.to_string(index=False)}")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any]], int]] = {
    'solve': cmd_solve,
    'certify': cmd_certify,
    'mpc': cmd_mpc,
    'verify': cmd_verify,
    'bench-table': cmd_bench_table,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--scenario', required=True, help='Szenario-Datei (JSON, schema_version 1)')
    common.add_argument('--out', default=OUTPUT_CONFIG['default_out_dir'], help='Ausgabeverzeichnis')
    common.add_argument('--tol', type=float, help='Solver-Toleranz (Zulässigkeit und Lücke)')
    common.add_argument('--max-iters', type=int, help='Maximale SCR-Iterationen')
    common.add_argument('--eps-safe', type=float, help='Abstand der Sicherheitsungleichung')
    common.add_argument('--seed', type=int, help='Seed für Stichproben und Störungen')
    common.add_argument('--timing', action='store_true', help='Laufzeiten nach timing.json schreiben')

    parser = argparse.ArgumentParser(prog='scr-mpc', description='Robust MPC via Sequential Convex Restriction')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', parents=[common], help='SCR lösen')
    solve.add_argument('--plot', action='store_true', help='Tube als PNG speichern')
    solve.add_argument('--seed-horizon', type=int, help='Erst auf kürzerem Horizont lösen')

    certify = sub.add_parser('certify', parents=[common], help='Robustheitsmarge zertifizieren')
    certify.add_argument('--mode', default='joint', choices=['init', 'dyn', 'joint'])
    certify.add_argument('--controls', default='zero',
                         help="Steuerfolge: 'zero', 'open-loop' oder Pfad zu einer controls.csv")

    mpc = sub.add_parser('mpc', parents=[common], help='Receding-Horizon-Lauf')
    mpc.add_argument('--steps', type=int, help='Anzahl Schritte')
    mpc.add_argument('--period', type=int, help='Schritte zwischen zwei Replanungen')
    mpc.add_argument('--disturbance', default='sampled', choices=['zero', 'sampled'])

    verify = sub.add_parser('verify', parents=[common], help='Zertifikat per Monte Carlo prüfen')
    verify.add_argument('--samples', type=int, default=VERIFY_CONFIG['samples'])
    verify.add_argument('--gamma-scale', type=float, default=1.0, help='Radien für Stresstests skalieren')
    verify.add_argument('--containment-tol', type=float, help='Toleranz für Tube-Austritte (0 = exakt)')
    verify.add_argument('--plot', action='store_true')
    verify.add_argument('--seed-horizon', type=int)

    bench = sub.add_parser('bench-table', parents=[common], help='Benchmark über mehrere Horizonte')
    bench.add_argument('--horizons', type=int, nargs='+')
    bench.add_argument('--steps', type=int, help='Closed-Loop-Schritte für die nominellen Kosten')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    for warning in validate_config():
        logger.warning(warning)

    timing: Dict[str, Any] = {}
    try:
        code = COMMANDS[args.command](args, timing)
    except SCRError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        write_health_check(False, args.command, str(e), {'exit_code': e.exit_code})
        return e.exit_code
    except Exception as e:
        logger.critical(f"❌ {args.command} crashed: {e}")
        write_health_check(False, args.command, str(e), {'exit_code': 1})
        return 1

    if args.timing:
        emit_timing = dict(timing, command=args.command)
        os.makedirs(args.out, exist_ok=True)
        write_json(emit_timing, os.path.join(args.out, 'timing.json'))
    write_health_check(code == EXIT_OK, args.command, "", {'exit_code': code})
    return code


if __name__ == "__main__":
    sys.exit(main())
