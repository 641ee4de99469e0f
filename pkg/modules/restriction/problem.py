"""
Robustes MPC-Problem: Modell, Anfangszustand, Unsicherheit, Hindernisse, Kosten und Stellgrenzen.

Kosten c(x, u) = ½ Σ_{t<N} ‖Q^{1/2} x_t‖² + ½ ‖Q_N^{1/2} x_N‖² + ½ Σ_{t<N} ‖R^{1/2} u_t‖².
"""

from typing import Optional
from dataclasses import dataclass, field, replace

import numpy as np

from config import SCR_CONFIG
from ..core.model import FeedbackModel
from ..exceptions import DimensionError, NonPSDError
from .obstacles import ObstacleSet
from .uncertainty import UncertaintyModel


def _pad_rows(matrix: np.ndarray, rows: int) -> np.ndarray:
    if matrix.shape[0] >= rows:
        return matrix
    return np.vstack([matrix, np.zeros((rows - matrix.shape[0], matrix.shape[1]))])


@dataclass(frozen=True, eq=False)
class RobustMPCProblem:
    """
    Args:
        model: Feedback-Modell, dessen Horizont den Planungshorizont festlegt
        x_init: nominaler Anfangszustand (= w_init^(0))
        uncertainty: Ellipsoide für w_init und w_t
        obstacles: Hindernisse pro Stufe
        q_sqrt: Q^{1/2}, k×n
        r_sqrt: R^{1/2}, l×m
        qn_sqrt: Q_N^{1/2}, k_N×n (Standard: q_sqrt)
        u_lower, u_upper: Stellgrenzen (±inf erlaubt)
        eps_safe: Abstand der strikten Sicherheitsungleichung
    """
    model: FeedbackModel
    x_init: np.ndarray
    uncertainty: UncertaintyModel
    obstacles: ObstacleSet
    q_sqrt: np.ndarray
    r_sqrt: np.ndarray
    qn_sqrt: Optional[np.ndarray] = None
    u_lower: Optional[np.ndarray] = None
    u_upper: Optional[np.ndarray] = None
    eps_safe: float = SCR_CONFIG['eps_safe']
    name: str = field(default='problem', compare=False)

    def __post_init__(self):
        n, m = self.model.n, self.model.m
        x_init = np.asarray(self.x_init, dtype=float).reshape(-1)
        if x_init.shape[0] != n:
            raise DimensionError(0, 'x_init', n, x_init.shape[0])
        object.__setattr__(self, 'x_init', x_init)
        object.__setattr__(self, 'uncertainty', self.uncertainty.with_initial_state(x_init))

        q_sqrt = np.atleast_2d(np.asarray(self.q_sqrt, dtype=float))
        qn_sqrt = q_sqrt if self.qn_sqrt is None else np.atleast_2d(np.asarray(self.qn_sqrt, dtype=float))
        r_sqrt = np.asarray(self.r_sqrt, dtype=float).reshape(-1, m) if m else np.zeros((0, 0))
        for label, matrix, cols in (('q_sqrt', q_sqrt, n), ('qn_sqrt', qn_sqrt, n), ('r_sqrt', r_sqrt, m)):
            if matrix.shape[1] != cols:
                raise DimensionError(None, label, f"(k, {cols})", matrix.shape)
            if not np.all(np.isfinite(matrix)):
                raise NonPSDError(label, float('nan'))
        k = max(q_sqrt.shape[0], qn_sqrt.shape[0])
        object.__setattr__(self, 'q_sqrt', _pad_rows(q_sqrt, k))
        object.__setattr__(self, 'qn_sqrt', _pad_rows(qn_sqrt, k))
        object.__setattr__(self, 'r_sqrt', r_sqrt)

        lower = np.full(m, -np.inf) if self.u_lower is None else np.asarray(self.u_lower, dtype=float).reshape(-1)
        upper = np.full(m, np.inf) if self.u_upper is None else np.asarray(self.u_upper, dtype=float).reshape(-1)
        if lower.shape != (m,) or upper.shape != (m,):
            raise DimensionError(None, 'control_bounds', m, (lower.shape, upper.shape))
        if np.any(lower > upper):
            raise DimensionError(None, 'control_bounds', 'lower <= upper', (lower.tolist(), upper.tolist()))
        object.__setattr__(self, 'u_lower', lower)
        object.__setattr__(self, 'u_upper', upper)

        if self.eps_safe < 0:
            raise DimensionError(None, 'eps_safe', '>= 0', self.eps_safe)
        if self.uncertainty.n != n:
            raise DimensionError(None, 'uncertainty.sigma_init', n, self.uncertainty.n)
        if self.uncertainty.r != self.model.r:
            raise DimensionError(None, 'uncertainty.sigma_dyn', self.model.r, self.uncertainty.r)

    # === DIMENSIONEN ===
    @property
    def horizon(self) -> int:
        return self.model.horizon

    @property
    def cost_rows(self) -> int:
        return self.q_sqrt.shape[0]

    @property
    def R(self) -> np.ndarray:
        return self.r_sqrt.T @ self.r_sqrt

    def state_weight(self, t: int) -> np.ndarray:
        return self.qn_sqrt if t == self.horizon else self.q_sqrt

    # === ABGELEITETE PROBLEME ===
    def with_horizon(self, horizon: int) -> 'RobustMPCProblem':
        return replace(self, model=self.model.with_horizon(horizon), uncertainty=self.uncertainty.shifted(0, horizon))

    def with_initial_state(self, x0: np.ndarray) -> 'RobustMPCProblem':
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        return replace(self, x_init=x0, uncertainty=self.uncertainty.with_initial_state(x0))

    def with_uncertainty(self, uncertainty: UncertaintyModel) -> 'RobustMPCProblem':
        return replace(self, uncertainty=uncertainty)

    def with_eps_safe(self, eps_safe: float) -> 'RobustMPCProblem':
        return replace(self, eps_safe=eps_safe)

    # === KOSTEN ===
    def cost(self, x: np.ndarray, u: np.ndarray) -> float:
        """Wahre Kosten einer Trajektorie x (N+1, n), u (N, m)."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float).reshape(-1, self.model.m) if self.model.m else np.zeros((0, 0))
        N = x.shape[0] - 1
        state = sum(float(np.sum((self.q_sqrt @ x[t]) ** 2)) for t in range(N))
        state += float(np.sum((self.qn_sqrt @ x[N]) ** 2))
        control = float(np.sum((u @ self.r_sqrt.T) ** 2)) if u.size else 0.0
        return 0.5 * (state + control)

    def clip_controls(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_lower, self.u_upper)


__all__ = ['RobustMPCProblem']
