"""
Szenario-Dateien: Laden, Validieren, Ausgeben.

Format ist ein JSON-Dokument mit schema_version. Alle Defaults werden beim Laden
eingesetzt, sodass emit → parse → emit byteidentisch ist.
"""

import json
from typing import Any, Dict, List, Optional, Tuple, Union
from dataclasses import dataclass, field, replace

import numpy as np

from config import MPC_CONFIG, OUTPUT_CONFIG, SCR_CONFIG, SOLVER_CONFIG, SCROptions, SolverTolerances
from ..core.model import FeedbackModel
from ..exceptions import InputError, ScenarioError
from ..models import create_model
from ..restriction import ObstacleSet, RobustMPCProblem, UncertaintyModel, obstacle_from_dict
from ..utils.logger import logger

SOLVER_FIELDS = ('backend', 'solver', 'feasibility_tol', 'gap_tol', 'max_iterations', 'recheck_tol')


@dataclass
class Scenario:
    """Validiertes Szenario mit allen Defaults."""
    name: str
    model_name: str
    model_params: Dict[str, Any]
    horizon: int
    initial_state: List[float]
    sigma_init: List[List[float]]
    gamma_init: float
    sigma_dyn: Union[List[List[float]], List[List[List[float]]]]   # r×r oder eine Matrix je Stufe
    gamma_dyn: float
    obstacles: List[Dict[str, Any]]
    q_sqrt: List[List[float]]
    r_sqrt: List[List[float]]
    qn_sqrt: List[List[float]]
    control_lower: List[Optional[float]]
    control_upper: List[Optional[float]]
    solver: Dict[str, Any]
    eps_safe: float = SCR_CONFIG['eps_safe']
    scr_epsilon: float = SCR_CONFIG['epsilon']
    scr_max_iterations: int = SCR_CONFIG['max_iterations']
    replan_period: int = MPC_CONFIG['replan_period']
    total_steps: int = MPC_CONFIG['total_steps']
    seed: int = 0
    schema_version: int = OUTPUT_CONFIG['schema_version']
    path: str = field(default='<memory>', compare=False)

    # === UMWANDLUNG ===
    def to_dict(self) -> Dict[str, Any]:
        return {
            'schema_version': self.schema_version,
            'name': self.name,
            'model': {'name': self.model_name, 'params': self.model_params},
            'horizon': self.horizon,
            'initial_state': self.initial_state,
            'uncertainty': {
                'sigma_init': self.sigma_init,
                'gamma_init': self.gamma_init,
                'sigma_dyn': self.sigma_dyn,
                'gamma_dyn': self.gamma_dyn,
            },
            'obstacles': self.obstacles,
            'cost': {'q_sqrt': self.q_sqrt, 'r_sqrt': self.r_sqrt, 'qn_sqrt': self.qn_sqrt},
            'control_bounds': {'lower': self.control_lower, 'upper': self.control_upper},
            'solver': self.solver,
            'eps_safe': self.eps_safe,
            'scr': {'epsilon': self.scr_epsilon, 'max_iterations': self.scr_max_iterations},
            'mpc': {'replan_period': self.replan_period, 'total_steps': self.total_steps},
            'seed': self.seed,
        }

    def with_overrides(self, tol: Optional[float] = None, max_iters: Optional[int] = None,
                       eps_safe: Optional[float] = None, seed: Optional[int] = None,
                       horizon: Optional[int] = None) -> 'Scenario':
        """CLI-Flags überschreiben die Szenario-Werte."""
        solver = dict(self.solver)
        if tol is not None:
            solver['feasibility_tol'] = float(tol)
            solver['gap_tol'] = float(tol)
        return replace(
            self,
            solver=solver,
            scr_max_iterations=self.scr_max_iterations if max_iters is None else int(max_iters),
            eps_safe=self.eps_safe if eps_safe is None else float(eps_safe),
            seed=self.seed if seed is None else int(seed),
            horizon=self.horizon if horizon is None else int(horizon),
        )

    def build_model(self, horizon: Optional[int] = None) -> FeedbackModel:
        return create_model(self.model_name, horizon or self.horizon, self.model_params)

    def obstacle_set(self) -> ObstacleSet:
        static, per_stage = [], {}
        for i, data in enumerate(self.obstacles):
            obstacle = obstacle_from_dict(data, data.get('label', f'obstacle_{i}'))
            if 'stages' in data:
                for t in data['stages']:
                    per_stage.setdefault(int(t), []).append(obstacle)
            else:
                static.append(obstacle)
        return ObstacleSet(static=tuple(static), per_stage={t: tuple(obs) for t, obs in per_stage.items()})

    def stage_sigmas(self, horizon: int, r: int) -> Tuple[np.ndarray, ...]:
        """
        Σ_t als Tupel für UncertaintyModel.

        Eine Matrix gilt für alle Stufen. Eine Liste je Stufe wird auf `horizon` gekürzt
        oder mit der letzten Matrix aufgefüllt (Benchmarks mit anderem N).
        """
        if not _is_stage_list(self.sigma_dyn):
            return (np.array(self.sigma_dyn, dtype=float).reshape(r, r),)
        sigmas = [np.array(s, dtype=float).reshape(r, r) for s in self.sigma_dyn]
        if len(sigmas) == 1:
            return tuple(sigmas)
        return tuple(sigmas[min(t, len(sigmas) - 1)] for t in range(horizon))

    def to_problem(self, horizon: Optional[int] = None) -> RobustMPCProblem:
        """Robustes MPC-Problem des Szenarios (optional mit anderem Horizont)."""
        model = self.build_model(horizon)
        x0 = np.array(self.initial_state, dtype=float)
        uncertainty = UncertaintyModel(
            w_init_nominal=x0,
            sigma_init=np.array(self.sigma_init, dtype=float).reshape(model.n, model.n),
            gamma_init=self.gamma_init,
            sigma_dyn=self.stage_sigmas(model.horizon, model.r),
            gamma_dyn=self.gamma_dyn,
        )

        def _bounds(values: List[Optional[float]], default: float) -> np.ndarray:
            return np.array([default if v is None else v for v in values], dtype=float)

        return RobustMPCProblem(
            model=model,
            x_init=x0,
            uncertainty=uncertainty,
            obstacles=self.obstacle_set(),
            q_sqrt=np.array(self.q_sqrt, dtype=float).reshape(-1, model.n),
            r_sqrt=np.array(self.r_sqrt, dtype=float).reshape(-1, model.m) if model.m else np.zeros((0, 0)),
            qn_sqrt=np.array(self.qn_sqrt, dtype=float).reshape(-1, model.n),
            u_lower=_bounds(self.control_lower, -np.inf),
            u_upper=_bounds(self.control_upper, np.inf),
            eps_safe=self.eps_safe,
            name=self.name,
        )

    def to_options(self) -> SCROptions:
        try:
            tolerances = SolverTolerances(
                feasibility=self.solver['feasibility_tol'],
                gap=self.solver['gap_tol'],
                max_iterations=self.solver['max_iterations'],
                recheck=self.solver['recheck_tol'],
            )
            return SCROptions(epsilon=self.scr_epsilon, max_iterations=self.scr_max_iterations,
                              eps_safe=self.eps_safe, backend=self.solver['backend'],
                              solver=self.solver['solver'], tolerances=tolerances)
        except ValueError as e:
            raise ScenarioError(self.path, 'solver', str(e)) from e


# === PARSER ===
class _Reader:
    """Liest Felder mit Pfad- und Zeilenangabe für Fehlermeldungen."""

    def __init__(self, text: str, path: str):
        self.lines = text.splitlines()
        self.path = path

    def line_of(self, key: str) -> Optional[int]:
        needle = f'"{key.split(".")[-1]}"'
        for number, line in enumerate(self.lines, start=1):
            if needle in line:
                return number
        return None

    def fail(self, key: str, message: str) -> ScenarioError:
        return ScenarioError(self.path, key, message, self.line_of(key))

    def number(self, value: Any, key: str, minimum: Optional[float] = None, integer: bool = False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(key, f"expected a number, got {value!r}")
        if not np.isfinite(value):
            raise self.fail(key, "must be finite")
        if integer and int(value) != value:
            raise self.fail(key, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise self.fail(key, f"must be >= {minimum}, got {value}")
        return int(value) if integer else float(value)

    def vector(self, value: Any, key: str, size: int, allow_none: bool = False) -> List[Optional[float]]:
        if not isinstance(value, list) or len(value) != size:
            raise self.fail(key, f"expected a list of {size} numbers")
        return [None if (v is None and allow_none) else self.number(v, f"{key}[{i}]")
                for i, v in enumerate(value)]

    def matrix(self, value: Any, key: str, rows: Optional[int], cols: int) -> List[List[float]]:
        if not isinstance(value, list) or not value or (rows is not None and len(value) != rows):
            raise self.fail(key, f"expected a {rows if rows is not None else 'k'}x{cols} matrix")
        return [self.vector(row, f"{key}[{i}]", cols) for i, row in enumerate(value)]

    def psd(self, value: Any, key: str, size: int) -> List[List[float]]:
        matrix = self.matrix(value, key, size, size)
        array = np.array(matrix, dtype=float)
        if size and (not np.allclose(array, array.T) or np.min(np.linalg.eigvalsh(array)) < -SOLVER_CONFIG['psd_tol']):
            raise self.fail(key, "must be symmetric positive semidefinite")
        return matrix


def _is_stage_list(value: Any) -> bool:
    """Liste von Matrizen statt einer einzelnen Matrix?"""
    return (isinstance(value, list) and bool(value) and isinstance(value[0], list) and bool(value[0])
            and isinstance(value[0][0], list))


def _section(data: Dict[str, Any], key: str, reader: _Reader) -> Dict[str, Any]:
    section = data.get(key, {})
    if not isinstance(section, dict):
        raise reader.fail(key, "expected an object")
    return section


def parse_scenario(text: str, path: str = '<memory>') -> Scenario:
    """
    Validiert ein Szenario-Dokument und setzt Defaults ein.

    Fehlt Σ, wird die Einheitsmatrix angenommen; fehlt auch γ, ist γ = 0 (deterministisches Problem).
    sigma_dyn ist eine r×r Matrix oder eine Liste mit einer Matrix je Stufe (Länge 1 oder N).

    Raises:
        ScenarioError: Schema-Verletzung mit Feld und Zeile
    """
    reader = _Reader(text, path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(path, '<document>', e.msg, e.lineno) from e
    if not isinstance(data, dict):
        raise ScenarioError(path, '<document>', "expected a JSON object")

    version = data.get('schema_version', OUTPUT_CONFIG['schema_version'])
    if version != OUTPUT_CONFIG['schema_version']:
        raise reader.fail('schema_version', f"unsupported version {version!r}")

    model_section = _section(data, 'model', reader)
    model_name = model_section.get('name')
    if not isinstance(model_name, str):
        raise reader.fail('model.name', "missing model name")
    params = model_section.get('params', {})
    if not isinstance(params, dict):
        raise reader.fail('model.params', "expected an object")
    if 'horizon' not in data:
        raise reader.fail('horizon', "missing horizon")
    horizon = reader.number(data['horizon'], 'horizon', minimum=1, integer=True)
    try:
        model = create_model(model_name, horizon, params)
    except InputError as e:
        raise reader.fail('model.name', str(e)) from e
    n, m, r = model.n, model.m, model.r

    if 'initial_state' not in data:
        raise reader.fail('initial_state', "missing initial state")
    initial_state = reader.vector(data['initial_state'], 'initial_state', n)

    uncertainty = _section(data, 'uncertainty', reader)
    identity_n = np.eye(n).tolist()
    identity_r = np.eye(r).tolist()
    sigma_init = reader.psd(uncertainty['sigma_init'], 'uncertainty.sigma_init', n) \
        if 'sigma_init' in uncertainty else identity_n
    raw_dyn = uncertainty.get('sigma_dyn')
    if raw_dyn is None:
        sigma_dyn = identity_r
    elif _is_stage_list(raw_dyn):
        if len(raw_dyn) not in (1, horizon):
            raise reader.fail('uncertainty.sigma_dyn', f"expected 1 or {horizon} stage matrices, got {len(raw_dyn)}")
        sigma_dyn = [reader.psd(s, f'uncertainty.sigma_dyn[{t}]', r) for t, s in enumerate(raw_dyn)]
    else:
        sigma_dyn = reader.psd(raw_dyn, 'uncertainty.sigma_dyn', r)
    gamma_init = reader.number(uncertainty.get('gamma_init', 0.0), 'uncertainty.gamma_init', minimum=0.0)
    gamma_dyn = reader.number(uncertainty.get('gamma_dyn', 0.0), 'uncertainty.gamma_dyn', minimum=0.0)
    for name, gamma in (('sigma_init', gamma_init), ('sigma_dyn', gamma_dyn)):
        if gamma > 0 and name not in uncertainty:
            logger.info(f"{path}: no {name} given, using the identity with gamma={gamma:g}")

    obstacles = []
    raw_obstacles = data.get('obstacles', [])
    if not isinstance(raw_obstacles, list):
        raise reader.fail('obstacles', "expected a list")
    for i, raw in enumerate(raw_obstacles):
        key = f'obstacles[{i}]'
        if not isinstance(raw, dict):
            raise reader.fail(key, "expected an object")
        if raw.get('type') == 'ball' and isinstance(raw.get('radius'), (int, float)) and raw['radius'] < 0:
            raise reader.fail(f'{key}.radius', f"must be >= 0, got {raw['radius']}")
        try:
            obstacle = obstacle_from_dict(raw, raw.get('label', f'obstacle_{i}'))
        except (InputError, KeyError, TypeError, ValueError) as e:
            raise reader.fail(key, f"invalid obstacle: {e}") from e
        if max(obstacle.coords) >= n:
            raise reader.fail(f'{key}.coords', f"coordinate {max(obstacle.coords)} out of range for n={n}")
        entry = obstacle.to_dict()
        if 'label' in raw:
            entry['label'] = str(raw['label'])
        if 'stages' in raw:
            stages = raw['stages']
            if not isinstance(stages, list):
                raise reader.fail(f'{key}.stages', "expected a list of stages")
            entry['stages'] = [reader.number(t, f'{key}.stages', minimum=1, integer=True) for t in stages]
        obstacles.append(entry)

    cost = _section(data, 'cost', reader)
    q_sqrt = reader.matrix(cost['q_sqrt'], 'cost.q_sqrt', None, n) if 'q_sqrt' in cost else identity_n
    r_sqrt = reader.matrix(cost['r_sqrt'], 'cost.r_sqrt', None, m) if 'r_sqrt' in cost else np.eye(m).tolist()
    qn_sqrt = reader.matrix(cost['qn_sqrt'], 'cost.qn_sqrt', None, n) if cost.get('qn_sqrt') else q_sqrt

    bounds = _section(data, 'control_bounds', reader)
    control_lower = reader.vector(bounds.get('lower', [None] * m), 'control_bounds.lower', m, allow_none=True)
    control_upper = reader.vector(bounds.get('upper', [None] * m), 'control_bounds.upper', m, allow_none=True)
    for j, (lo, hi) in enumerate(zip(control_lower, control_upper)):
        if lo is not None and hi is not None and lo > hi:
            raise reader.fail('control_bounds', f"lower > upper for input {j}")

    solver_section = _section(data, 'solver', reader)
    unknown = set(solver_section) - set(SOLVER_FIELDS)
    if unknown:
        raise reader.fail('solver', f"unknown fields {sorted(unknown)}")
    solver = {
        'backend': str(solver_section.get('backend', SOLVER_CONFIG['backend'])),
        'solver': str(solver_section.get('solver', SOLVER_CONFIG['solver'])),
        'feasibility_tol': reader.number(solver_section.get('feasibility_tol', SOLVER_CONFIG['feasibility_tol']),
                                         'solver.feasibility_tol', minimum=0.0),
        'gap_tol': reader.number(solver_section.get('gap_tol', SOLVER_CONFIG['gap_tol']),
                                 'solver.gap_tol', minimum=0.0),
        'max_iterations': reader.number(solver_section.get('max_iterations', SOLVER_CONFIG['max_iterations']),
                                        'solver.max_iterations', minimum=1, integer=True),
        'recheck_tol': reader.number(solver_section.get('recheck_tol', SOLVER_CONFIG['recheck_tol']),
                                     'solver.recheck_tol', minimum=0.0),
    }

    scr = _section(data, 'scr', reader)
    mpc = _section(data, 'mpc', reader)
    scenario = Scenario(
        name=str(data.get('name', model_name)),
        model_name=model_name,
        model_params=params,
        horizon=horizon,
        initial_state=initial_state,
        sigma_init=sigma_init,
        gamma_init=gamma_init,
        sigma_dyn=sigma_dyn,
        gamma_dyn=gamma_dyn,
        obstacles=obstacles,
        q_sqrt=q_sqrt,
        r_sqrt=r_sqrt,
        qn_sqrt=qn_sqrt,
        control_lower=control_lower,
        control_upper=control_upper,
        solver=solver,
        eps_safe=reader.number(data.get('eps_safe', SCR_CONFIG['eps_safe']), 'eps_safe', minimum=0.0),
        scr_epsilon=reader.number(scr.get('epsilon', SCR_CONFIG['epsilon']), 'scr.epsilon', minimum=0.0),
        scr_max_iterations=reader.number(scr.get('max_iterations', SCR_CONFIG['max_iterations']),
                                         'scr.max_iterations', minimum=1, integer=True),
        replan_period=reader.number(mpc.get('replan_period', MPC_CONFIG['replan_period']),
                                    'mpc.replan_period', minimum=1, integer=True),
        total_steps=reader.number(mpc.get('total_steps', MPC_CONFIG['total_steps']),
                                  'mpc.total_steps', minimum=0, integer=True),
        seed=reader.number(data.get('seed', 0), 'seed', minimum=0, integer=True),
        schema_version=version,
        path=path,
    )
    return scenario


def emit_scenario(scenario: Scenario) -> str:
    """Kanonische Textform (JSON, Einrückung 2, abschließender Zeilenumbruch)."""
    return json.dumps(scenario.to_dict(), indent=2, ensure_ascii=False) + "\n"


def load_scenario(path: str) -> Scenario:
    """
    Lädt und validiert eine Szenario-Datei.

    Raises:
        ScenarioError: Datei fehlt oder Schema verletzt
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ScenarioError(path, '<file>', f"cannot read scenario: {e.strerror}") from e

    scenario = parse_scenario(text, path)
    logger.info(f"Loaded scenario '{scenario.name}' from {path}: model={scenario.model_name}, "
                f"N={scenario.horizon}, {len(scenario.obstacles)} obstacles")
    logger.debug(f"Effective scenario: {json.dumps(scenario.to_dict(), sort_keys=True)}")
    return scenario


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(emit_scenario(scenario))


__all__ = ['Scenario', 'parse_scenario', 'emit_scenario', 'load_scenario', 'save_scenario']
