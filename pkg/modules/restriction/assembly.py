"""
Aufbau der konvexen Restriktion um einen Nominalpunkt.

Bestandteile:
- Envelope-Ecken: g^u_P >= upper(Ecke, u), g^l_P <= lower(Ecke, u)
- Self-Mapping: K^+ g^u_P + K^- g^l_P + ξ(γ) <= z~
- Sicherheit: L^+ z^u + L^- z^l + d <= -eps_safe
- Kosten-Epigraph: y >= |Q^{1/2} C^+ z| über der Box, ½‖y‖² + ½Σ uᵀRu <= c^u

Variablenreihenfolge: u, z^u, z^l, g^u_P, g^l_P, y, c^u, optional γ.
"""

from typing import Dict, List, Optional, Tuple
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import block_diag

from ..conic.program import LinearBlock, QuadraticRow
from ..core.model import FeedbackModel, residual_envelope
from ..core.trajectory import KRMatrices, build_K_R, sensitivity_blocks, split_plus_minus
from ..data_models import MarginMode, NominalPoint, Tube
from ..envelopes.vertex import TubeSlots, vertex_bound_constraints
from ..exceptions import DimensionError, NumericalFailureError
from ..utils.logger import logger
from .problem import RobustMPCProblem
from .safety import SafetyRestriction, safety_halfspaces
from .uncertainty import SupportTerm


@dataclass(frozen=True)
class VariableLayout:
    """Feste Indexlage aller Entscheidungsvariablen."""
    horizon: int
    m: int
    q: int
    p: int
    k: int
    with_cost: bool = True
    with_gamma: bool = False

    @property
    def _sizes(self) -> List[Tuple[str, int]]:
        N = self.horizon
        return [
            ('u', self.m * N),
            ('z_upper', self.q * (N + 1)),
            ('z_lower', self.q * (N + 1)),
            ('g_upper', self.p * N),
            ('g_lower', self.p * N),
            ('y', self.k * (N + 1) if self.with_cost else 0),
            ('cost_upper', 1 if self.with_cost else 0),
            ('gamma', 1 if self.with_gamma else 0),
        ]

    @property
    def offsets(self) -> Dict[str, int]:
        result, offset = {}, 0
        for name, size in self._sizes:
            result[name] = offset
            offset += size
        return result

    @property
    def n_var(self) -> int:
        return sum(size for _, size in self._sizes)

    def block(self, name: str) -> slice:
        start = self.offsets[name]
        return slice(start, start + dict(self._sizes)[name])

    def u(self, t: int) -> np.ndarray:
        return self.offsets['u'] + self.m * t + np.arange(self.m)

    def z_upper(self, t: int) -> np.ndarray:
        return self.offsets['z_upper'] + self.q * t + np.arange(self.q)

    def z_lower(self, t: int) -> np.ndarray:
        return self.offsets['z_lower'] + self.q * t + np.arange(self.q)

    def g_upper(self, t: int) -> np.ndarray:
        return self.offsets['g_upper'] + self.p * t + np.arange(self.p)

    def g_lower(self, t: int) -> np.ndarray:
        return self.offsets['g_lower'] + self.p * t + np.arange(self.p)

    def y(self, t: int) -> np.ndarray:
        return self.offsets['y'] + self.k * t + np.arange(self.k)

    @property
    def cost_upper(self) -> int:
        if not self.with_cost:
            raise IndexError("Layout has no cost variable")
        return self.offsets['cost_upper']

    @property
    def gamma(self) -> int:
        if not self.with_gamma:
            raise IndexError("Layout has no gamma variable")
        return self.offsets['gamma']

    def names(self) -> List[str]:
        N, names = self.horizon, []
        names += [f'u[{t},{j}]' for t in range(N) for j in range(self.m)]
        names += [f'z_upper[{t},{i}]' for t in range(N + 1) for i in range(self.q)]
        names += [f'z_lower[{t},{i}]' for t in range(N + 1) for i in range(self.q)]
        names += [f'g_upper[{t},{k}]' for t in range(N) for k in range(self.p)]
        names += [f'g_lower[{t},{k}]' for t in range(N) for k in range(self.p)]
        if self.with_cost:
            names += [f'y[{t},{j}]' for t in range(N + 1) for j in range(self.k)]
            names.append('cost_upper')
        if self.with_gamma:
            names.append('gamma')
        return names


@dataclass(eq=False)
class RestrictionProgram:
    """Aufgebaute Restriktion: Blöcke, Schranken, Zielfunktion und Zählung."""
    layout: VariableLayout
    linear_blocks: List[LinearBlock]
    quadratic_rows: List[QuadraticRow]
    lower: np.ndarray
    upper: np.ndarray
    objective: np.ndarray
    sense: str
    census: Dict[str, int]
    safety: SafetyRestriction
    kr: KRMatrices
    support: SupportTerm
    nominal: NominalPoint
    mode: Optional[MarginMode] = None

    @property
    def n_var(self) -> int:
        return self.layout.n_var

    @property
    def var_names(self) -> List[str]:
        return self.layout.names()


# === BAUSTEINE ===
def _dense_block(rows: int, n_var: int) -> np.ndarray:
    return np.zeros((rows, n_var))


def build_envelope_constraints(model: FeedbackModel, layout: VariableLayout) -> List[QuadraticRow]:
    """
    Ecken-Ungleichungen aller Residualkomponenten, verankert am registrierten Nominalpunkt.

    Raises:
        EnvelopeError: fehlendes Envelope einer Residualkomponente
    """
    rows: List[QuadraticRow] = []
    for t in range(model.horizon):
        stage = model.stage(t)
        for k in range(stage.p):
            envelope = residual_envelope(model, t, k)
            slots = TubeSlots(z_upper=layout.z_upper(t), z_lower=layout.z_lower(t), u=layout.u(t),
                              g_upper=int(layout.g_upper(t)[k]), g_lower=int(layout.g_lower(t)[k]))
            for bound in vertex_bound_constraints(envelope, stage.sparsity[k], slots):
                P, a, b = bound.expanded()
                corner = ''.join('u' if pick else 'l' for pick in bound.selection)
                rows.append(QuadraticRow(
                    name=f'envelope[t={t},k={k},{bound.side},{corner or "-"}]',
                    idx=np.array(bound.slots, dtype=int), P=P, a=a, b=b, category='envelope',
                ))
    return rows


def build_selfmap_constraints(model: FeedbackModel, kr: KRMatrices, support: SupportTerm,
                              layout: VariableLayout) -> Tuple[LinearBlock, List[QuadraticRow]]:
    """
    Self-Mapping-Bedingung der Tube plus die verknüpften Envelope-Ecken.

    Obere Zeilen:  G^+ g^u + G^- g^l - z^u + γ·spread <= -H w^(0)
    Untere Zeilen: -G^- g^u - G^+ g^l + z^l + γ·spread <= H w^(0)
    Bei festem γ steckt der Radius bereits im spread und wandert auf die rechte Seite.
    """
    N, q = model.horizon, model.q
    Q = q * (N + 1)
    n_var = layout.n_var
    if support.nominal.shape[0] != Q or support.spread.shape[0] != Q:
        raise DimensionError(None, 'support', Q, support.nominal.shape[0])

    G_plus, G_minus = split_plus_minus(kr.G_residual)
    gU, gL = layout.block('g_upper'), layout.block('g_lower')
    zU, zL = layout.block('z_upper'), layout.block('z_lower')

    top = _dense_block(Q, n_var)
    top[:, gU] = G_plus
    top[:, gL] = G_minus
    top[:, zU] = -np.eye(Q)
    bottom = _dense_block(Q, n_var)
    bottom[:, gU] = -G_minus
    bottom[:, gL] = -G_plus
    bottom[:, zL] = np.eye(Q)

    if layout.with_gamma:
        top[:, layout.gamma] = support.spread
        bottom[:, layout.gamma] = support.spread
        rhs_top, rhs_bottom = -support.nominal, support.nominal
    else:
        rhs_top = -support.nominal - support.spread
        rhs_bottom = support.nominal - support.spread

    block = LinearBlock('selfmap', sp.csr_matrix(np.vstack([top, bottom])),
                        np.concatenate([rhs_top, rhs_bottom]), 'selfmap')
    return block, build_envelope_constraints(model, layout)


def build_safety_constraints(safety: SafetyRestriction, layout: VariableLayout,
                             eps_safe: float) -> LinearBlock:
    """L^+ z^u_t + L^- z^l_t <= -d_t - eps_safe für alle Stufen mit Hindernissen."""
    if eps_safe < 0:
        raise DimensionError(None, 'eps_safe', '>= 0', eps_safe)
    rows, rhs = [], []
    for t in safety.stages:
        L_plus, L_minus = split_plus_minus(safety.L[t])
        block = _dense_block(L_plus.shape[0], layout.n_var)
        block[:, layout.z_upper(t)] = L_plus
        block[:, layout.z_lower(t)] = L_minus
        rows.append(block)
        rhs.append(-safety.d[t] - eps_safe)
    if not rows:
        return LinearBlock('safety', sp.csr_matrix((0, layout.n_var)), np.zeros(0), 'safety')
    return LinearBlock('safety', sp.csr_matrix(np.vstack(rows)), np.concatenate(rhs), 'safety')


def build_cost_epigraph(problem: RobustMPCProblem, model: FeedbackModel,
                        layout: VariableLayout) -> Tuple[LinearBlock, QuadraticRow]:
    """
    Epigraph der Worst-Case-Kosten über der Tube.

    y_t >= W^+ z^u + W^- z^l und y_t >= -(W^+ z^l + W^- z^u) mit W = Q^{1/2} C^+,
    damit y_t >= |W z| für alle z in [z^l, z^u]. Danach eine quadratische Zeile
    ½ Σ_t ‖y_t‖² + ½ Σ_t u_tᵀ R u_t - c^u <= 0.
    """
    N, k = model.horizon, layout.k
    rows = []
    for t in range(N + 1):
        W = problem.state_weight(t) @ model.stage(t).C_pinv
        W_plus, W_minus = split_plus_minus(W)
        upper_side = _dense_block(k, layout.n_var)
        upper_side[:, layout.y(t)] = -np.eye(k)
        upper_side[:, layout.z_upper(t)] = W_plus
        upper_side[:, layout.z_lower(t)] = W_minus
        lower_side = _dense_block(k, layout.n_var)
        lower_side[:, layout.y(t)] = -np.eye(k)
        lower_side[:, layout.z_lower(t)] = -W_plus
        lower_side[:, layout.z_upper(t)] = -W_minus
        rows.extend([upper_side, lower_side])
    block = LinearBlock('cost_bounds', sp.csr_matrix(np.vstack(rows)), np.zeros(2 * k * (N + 1)), 'cost')

    y_idx = np.arange(layout.offsets['y'], layout.offsets['y'] + k * (N + 1))
    u_idx = np.arange(layout.offsets['u'], layout.offsets['u'] + layout.m * N)
    idx = np.concatenate([y_idx, u_idx, [layout.cost_upper]]).astype(int)
    P = block_diag(np.eye(k * (N + 1)), np.kron(np.eye(N), problem.R), np.zeros((1, 1)))
    a = np.zeros(idx.shape[0])
    a[-1] = -1.0
    return block, QuadraticRow('cost_epigraph', idx, P, a, 0.0, category='cost')


def constraint_count_bound(model: FeedbackModel, obstacle_rows: int) -> int:
    """Obergrenze n(N+1)·2^{|I|+1} + 2q(N+1) + sN der Restriktionszeilen."""
    N = model.horizon
    return model.n * (N + 1) * 2 ** (model.sparsity_degree + 1) + 2 * model.q * (N + 1) + obstacle_rows


# === GESAMTAUFBAU ===
def assemble_restriction(problem: RobustMPCProblem, nominal: NominalPoint,
                         mode: Optional[MarginMode] = None, fixed_u: Optional[np.ndarray] = None,
                         eps_safe: Optional[float] = None) -> RestrictionProgram:
    """
    Baut die vollständige Restriktion am Nominalpunkt.

    Args:
        problem: robustes MPC-Problem
        nominal: Nominalpunkt (Anker der Envelopes und Linearisierung)
        mode: None = Steuerung optimieren bei festen Radien (min c^u);
              sonst γ maximieren mit Einheitsgewichten der aktiven Blöcke
        fixed_u: Steuerfolge (N, m), die über die Variablenschranken fixiert wird
        eps_safe: überschreibt problem.eps_safe

    Raises:
        NominalInObstacleError: Nominalzustand in einem Hindernis
    """
    model = problem.model.with_nominal(nominal)
    N = model.horizon
    eps_safe = problem.eps_safe if eps_safe is None else eps_safe
    margin_mode = mode is not None

    layout = VariableLayout(horizon=N, m=model.m, q=model.q, p=model.p, k=problem.cost_rows,
                            with_cost=not margin_mode, with_gamma=margin_mode)

    sensitivity = sensitivity_blocks(model)
    kr = build_K_R(model, sensitivity)
    support = problem.uncertainty.support(kr.H, N, mode)

    selfmap, envelope_rows = build_selfmap_constraints(model, kr, support, layout)
    safety = safety_halfspaces(nominal.x, problem.obstacles, lambda t: model.stage(t).C_pinv,
                               range(1, N + 1))
    safety_block = build_safety_constraints(safety, layout, eps_safe)

    linear_blocks = [selfmap, safety_block]
    quadratic_rows = list(envelope_rows)
    cost_rows = 0
    if layout.with_cost:
        cost_block, cost_row = build_cost_epigraph(problem, model, layout)
        linear_blocks.append(cost_block)
        quadratic_rows.append(cost_row)
        cost_rows = cost_block.rows + 1

    lower = np.full(layout.n_var, -np.inf)
    upper = np.full(layout.n_var, np.inf)
    u_block = layout.block('u')
    if fixed_u is not None:
        fixed = np.asarray(fixed_u, dtype=float).reshape(-1)
        if fixed.shape[0] != model.m * N:
            raise DimensionError(None, 'fixed_u', (N, model.m), np.shape(fixed_u))
        lower[u_block] = fixed
        upper[u_block] = fixed
    else:
        lower[u_block] = np.tile(problem.u_lower, N)
        upper[u_block] = np.tile(problem.u_upper, N)

    objective = np.zeros(layout.n_var)
    if margin_mode:
        lower[layout.gamma] = 0.0
        objective[layout.gamma] = 1.0
        sense = 'maximize'
    else:
        objective[layout.cost_upper] = 1.0
        sense = 'minimize'

    census = {
        'envelope': len(envelope_rows),
        'selfmap': selfmap.rows,
        'safety': safety_block.rows,
        'cost': cost_rows,
    }
    census['restriction_total'] = census['envelope'] + census['selfmap'] + census['safety']
    census['bound'] = constraint_count_bound(model, safety_block.rows)
    if census['restriction_total'] > census['bound']:
        logger.warning(f"Constraint count {census['restriction_total']} exceeds bound {census['bound']}")

    logger.debug(f"Restriction assembled: N={N}, {layout.n_var} variables, census {census}")
    return RestrictionProgram(layout=layout, linear_blocks=linear_blocks, quadratic_rows=quadratic_rows,
                              lower=lower, upper=upper, objective=objective, sense=sense, census=census,
                              safety=safety, kr=kr, support=support, nominal=nominal, mode=mode)


@dataclass
class RestrictionSolution:
    """Aus dem Primalpunkt gelesene Größen."""
    u: np.ndarray
    tube: Tube
    cost_upper: Optional[float]
    gamma: Optional[float]
    g_upper: np.ndarray
    g_lower: np.ndarray


def extract_solution(restriction: RestrictionProgram, primal: np.ndarray) -> RestrictionSolution:
    """
    Liest u, Tube, c^u und γ aus dem Primalpunkt.

    Raises:
        NumericalFailureError: Tube nicht geordnet (z^l > z^u)
    """
    layout = restriction.layout
    N, m, q, p = layout.horizon, layout.m, layout.q, layout.p
    v = np.asarray(primal, dtype=float)
    tube = Tube(z_upper=v[layout.block('z_upper')].reshape(N + 1, q),
                z_lower=v[layout.block('z_lower')].reshape(N + 1, q))
    if not tube.is_ordered():
        worst = float(np.max(tube.z_lower - tube.z_upper))
        raise NumericalFailureError(worst, 'tube ordering z_lower <= z_upper')
    return RestrictionSolution(
        u=v[layout.block('u')].reshape(N, m),
        tube=tube,
        cost_upper=float(v[layout.cost_upper]) if layout.with_cost else None,
        gamma=float(v[layout.gamma]) if layout.with_gamma else None,
        g_upper=v[layout.block('g_upper')].reshape(N, p),
        g_lower=v[layout.block('g_lower')].reshape(N, p),
    )


__all__ = [
    'VariableLayout', 'RestrictionProgram', 'RestrictionSolution', 'build_envelope_constraints',
    'build_selfmap_constraints', 'build_safety_constraints', 'build_cost_epigraph',
    'constraint_count_bound', 'assemble_restriction', 'extract_solution'
]
