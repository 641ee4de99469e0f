"""
Ergebnisdateien eines Laufs.

Deterministische Artefakte (CSV/JSON) enthalten keine Laufzeiten; Wall-Clock-Daten
gehen nur in timing.json. Nicht-endliche Zahlen werden als null geschrieben.
"""

import os
import json
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import OUTPUT_CONFIG
from ..data_models import CertifiedSolution, MarginResult, RunLog, Tube, VerificationReport
from ..exceptions import OutputError
from ..restriction import RobustMPCProblem
from ..utils.logger import logger

FLOAT_FORMAT = OUTPUT_CONFIG['float_format']


def _finite(value: Any) -> Any:
    """Rekursiv: numpy-Typen zu Python, inf/nan zu None."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, np.ndarray):
        return _finite(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def write_json(data: Dict[str, Any], path: str) -> str:
    try:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(_finite(data), f, indent=2, ensure_ascii=False)
            f.write("\n")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    logger.debug(f"Wrote {path}")
    return path


def write_csv(frame: pd.DataFrame, path: str) -> str:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding='utf-8')
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    logger.debug(f"Wrote {path} ({len(frame)} rows)")
    return path


# === TABELLEN ===
def trajectory_columns(n: int, q: int) -> List[str]:
    return (['t'] + [f'x{i}' for i in range(n)] + [f'z_upper{i}' for i in range(q)]
            + [f'z_lower{i}' for i in range(q)])


def control_columns(m: int) -> List[str]:
    return ['t'] + [f'u{j}' for j in range(m)]


def trajectory_frame(problem: RobustMPCProblem, certificate: Optional[CertifiedSolution]) -> pd.DataFrame:
    """t, x, z^u, z^ℓ je Stufe; leer (nur Kopfzeile) ohne Zertifikat."""
    n, q = problem.model.n, problem.model.q
    columns = trajectory_columns(n, q)
    if certificate is None or not certificate.certified:
        return pd.DataFrame(columns=columns)
    x = certificate.nominal.x
    tube = certificate.tube
    t = np.arange(x.shape[0]).reshape(-1, 1)
    return pd.DataFrame(np.hstack([t, x, tube.z_upper, tube.z_lower]), columns=columns).astype({'t': int})


def controls_frame(m: int, u: Optional[np.ndarray]) -> pd.DataFrame:
    columns = control_columns(m)
    if u is None or len(u) == 0:
        return pd.DataFrame(columns=columns)
    u = np.asarray(u, dtype=float).reshape(-1, m)
    t = np.arange(u.shape[0]).reshape(-1, 1)
    return pd.DataFrame(np.hstack([t, u]), columns=columns).astype({'t': int})


def closed_loop_frame(problem: RobustMPCProblem, run: RunLog) -> pd.DataFrame:
    n = problem.model.n
    columns = ['t'] + [f'x{i}' for i in range(n)]
    if not run.states:
        return pd.DataFrame(columns=columns)
    states = run.state_array
    t = np.arange(states.shape[0]).reshape(-1, 1)
    return pd.DataFrame(np.hstack([t, states]), columns=columns).astype({'t': int})


def tube_polylines(tube: Optional[Tube], coords: Tuple[int, int] = (0, 1)) -> pd.DataFrame:
    """Geschlossene Rechtecke [z^ℓ, z^u] in zwei Koordinaten, fünf Punkte je Stufe."""
    columns = ['stage', 'vertex', 'a', 'b']
    if tube is None:
        return pd.DataFrame(columns=columns)
    i, j = coords
    rows = []
    for t in range(tube.z_upper.shape[0]):
        lo, hi = tube.z_lower[t], tube.z_upper[t]
        corners = [(lo[i], lo[j]), (hi[i], lo[j]), (hi[i], hi[j]), (lo[i], hi[j]), (lo[i], lo[j])]
        rows += [(t, k, a, b) for k, (a, b) in enumerate(corners)]
    return pd.DataFrame(rows, columns=columns)


# === JSON-DOKUMENTE ===
def certificate_document(certificate: CertifiedSolution) -> Dict[str, Any]:
    return {
        'schema_version': OUTPUT_CONFIG['schema_version'],
        'status': certificate.status.value,
        'certified': certificate.certified,
        'gamma_init': certificate.gamma_init,
        'gamma_dyn': certificate.gamma_dyn,
        'gamma': certificate.gamma,
        'cost_upper': certificate.cost_upper,
        'nominal_cost': certificate.nominal_cost,
        'iterations': certificate.iterations,
        'objective_history': certificate.objective_history,
        'census': certificate.census,
        'solver_stats': [s.to_dict() for s in certificate.solver_stats],
        'message': certificate.message,
    }


def margin_document(margin: MarginResult) -> Dict[str, Any]:
    return {
        'schema_version': OUTPUT_CONFIG['schema_version'],
        'mode': margin.mode.value,
        'gamma': margin.gamma,
        'unbounded': bool(np.isinf(margin.gamma)),
        'status': margin.status.value,
        'diagnostic': margin.diagnostic,
        'census': margin.census,
        'solver_stats': margin.solver_stats.to_dict() if margin.solver_stats else None,
    }


def run_document(run: RunLog) -> Dict[str, Any]:
    return {
        'schema_version': OUTPUT_CONFIG['schema_version'],
        'total_steps': run.total_steps,
        'completed_steps': run.completed_steps,
        'replan_period': run.replan_period,
        'seed': run.seed,
        'events': run.events,
        'cycles': [{
            'cycle': c.cycle,
            'start_step': c.start_step,
            'status': c.status,
            'cost_upper': c.cost_upper,
            'iterations': c.iterations,
            'used_fallback': c.used_fallback,
            'x_start': c.x_start,
        } for c in run.cycles],
    }


def plot_tube(problem: RobustMPCProblem, certificate: CertifiedSolution, path: str,
              coords: Tuple[int, int] = (0, 1)) -> str:
    """Statisches PNG: Hindernisse, nominale Trajektorie, Tube-Rechtecke."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    from matplotlib.patches import Circle, Rectangle

    fig, ax = plt.subplots(figsize=(6, 6))
    i, j = coords
    for obstacle in problem.obstacles.at(1):
        data = obstacle.to_dict()
        if data['type'] == 'box':
            lo = [v if v is not None else -1e3 for v in data['lower']]
            hi = [v if v is not None else 1e3 for v in data['upper']]
            ax.add_patch(Rectangle((lo[0], lo[1]), hi[0] - lo[0], hi[1] - lo[1], color='tab:blue', alpha=0.5))
        elif data['type'] == 'ball':
            ax.add_patch(Circle(tuple(data['center']), data['radius'], color='tab:blue', alpha=0.5))

    tube = certificate.tube
    for t in range(tube.z_upper.shape[0]):
        lo, hi = tube.z_lower[t], tube.z_upper[t]
        ax.add_patch(Rectangle((lo[i], lo[j]), hi[i] - lo[i], hi[j] - lo[j], color='grey', alpha=0.3))
    x = certificate.nominal.x
    ax.plot(x[:, i], x[:, j], 'k.-', linewidth=1)
    ax.set_xlabel(f'x{i + 1}')
    ax.set_ylabel(f'x{j + 1}')
    ax.set_aspect('equal')
    ax.grid(True)
    try:
        fig.savefig(path, dpi=150, bbox_inches='tight')
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    finally:
        plt.close(fig)
    return path


# === GESAMTAUSGABE ===
def emit_results(out_dir: str, problem: RobustMPCProblem,
                 certificate: Optional[CertifiedSolution] = None,
                 margin: Optional[MarginResult] = None,
                 report: Optional[VerificationReport] = None,
                 run: Optional[RunLog] = None,
                 plot: bool = False,
                 timing: Optional[Dict[str, Any]] = None,
                 coords: Sequence[int] = (0, 1)) -> List[str]:
    """
    Schreibt alle vorhandenen Artefakte nach out_dir.

    trajectory.csv und controls.csv werden immer geschrieben (ohne Zertifikat nur
    mit Kopfzeile).

    Returns:
        Liste der geschriebenen Pfade

    Raises:
        OutputError: Verzeichnis oder Datei nicht schreibbar
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise OutputError(out_dir, e.strerror or str(e)) from e

    def target(name: str) -> str:
        return os.path.join(out_dir, name)

    m = problem.model.m
    coords = tuple(coords)[:2] if problem.model.q >= 2 else (0, 0)
    written = [
        write_csv(trajectory_frame(problem, certificate), target('trajectory.csv')),
        write_csv(controls_frame(m, certificate.u if certificate is not None else None), target('controls.csv')),
    ]

    if certificate is not None:
        written.append(write_json(certificate_document(certificate), target('certificate.json')))
        written.append(write_csv(tube_polylines(certificate.tube, coords), target('tube_polylines.csv')))
        if plot and certificate.certified:
            written.append(plot_tube(problem, certificate, target('tube.png'), coords))

    if margin is not None:
        written.append(write_json(margin_document(margin), target('margin.json')))

    if report is not None:
        written.append(write_json(dict(report.to_dict(), schema_version=OUTPUT_CONFIG['schema_version']),
                                  target('monte_carlo.json')))

    if run is not None:
        written.append(write_csv(closed_loop_frame(problem, run), target('closed_loop.csv')))
        written.append(write_csv(controls_frame(m, run.control_array if run.controls else None),
                                 target('closed_loop_controls.csv')))
        written.append(write_json(run_document(run), target('run_log.json')))

    if timing is not None:
        written.append(write_json(timing, target('timing.json')))

    logger.info(f"Wrote {len(written)} result files to {out_dir}")
    return written


__all__ = [
    'write_json', 'write_csv', 'trajectory_columns', 'control_columns', 'trajectory_frame',
    'controls_frame', 'closed_loop_frame', 'tube_polylines', 'certificate_document',
    'margin_document', 'run_document', 'plot_tube', 'emit_results'
]
