"""
Algebra gestapelter Trajektorien.

Rollouts, das Residuum F der gestapelten Dynamik, die Sensitivitätsblöcke der
geschlossenen Inversen von J_F, der Fixpunktoperator T und die Matrizen K, R der
Self-Mapping-Bedingung.

Konvention: S = -J_F^{-1} ist blockweise untere Dreiecksmatrix mit
S[i, j] = J_f(i, j) = J_{f_{i-1}} ··· J_{f_j} für j < i und S[i, i] = I.
"""

from typing import Optional, Tuple
from dataclasses import dataclass

import numpy as np

from ..data_models import NominalPoint
from ..exceptions import DimensionError, NonFiniteStateError
from .model import FeedbackModel, eval_dynamics, jacobian_dynamics, residual


@dataclass(frozen=True)
class TrajectoryBundle:
    """x = (x_0..x_N), u = (u_0..u_{N-1}), w = (w_init, w_0..w_{N-1})."""
    x: np.ndarray        # (N+1, n)
    u: np.ndarray        # (N, m)
    w_init: np.ndarray   # (n,)
    w: np.ndarray        # (N, r)

    @property
    def x_flat(self) -> np.ndarray:
        return self.x.reshape(-1)

    @property
    def u_flat(self) -> np.ndarray:
        return self.u.reshape(-1)

    @property
    def w_flat(self) -> np.ndarray:
        return np.concatenate([self.w_init, self.w.reshape(-1)])

    def z(self, model: FeedbackModel) -> np.ndarray:
        return np.array([model.C(t) @ self.x[t] for t in range(self.x.shape[0])])


@dataclass(frozen=True)
class SensitivityBlocks:
    """Tabelle J_f(i, j) für 0 <= j <= i <= N (Diagonale = Identität)."""
    blocks: np.ndarray       # (N+1, N+1, n, n), obere Hälfte = 0
    jacobians: np.ndarray    # (N, n, n), J_{f_t}^(0)

    @property
    def horizon(self) -> int:
        return self.jacobians.shape[0]

    def block(self, i: int, j: int) -> np.ndarray:
        if j > i:
            raise IndexError(f"Sensitivity block ({i}, {j}) is above the diagonal")
        return self.blocks[i, j]

    def dense(self) -> np.ndarray:
        """S = -J_F^{-1} als dichte Matrix (n(N+1) × n(N+1))."""
        N1, n = self.blocks.shape[0], self.blocks.shape[2]
        return self.blocks.transpose(0, 2, 1, 3).reshape(N1 * n, N1 * n)


@dataclass(frozen=True)
class KRMatrices:
    """
    K = [G; -G] und R = [H; -H] mit G = C S M und H = C S B.

    G hat die Spalten (0-Block der Größe n, g_0, ..., g_{N-1}); der erste Block
    gehört zum Anfangswert und ist immer null, da dort kein Residuum eingeht.
    """
    K: np.ndarray
    R: np.ndarray
    G: np.ndarray
    H: np.ndarray
    n: int

    @property
    def K_plus(self) -> np.ndarray:
        return np.maximum(self.K, 0.0)

    @property
    def K_minus(self) -> np.ndarray:
        return np.minimum(self.K, 0.0)

    @property
    def G_residual(self) -> np.ndarray:
        """Spalten von G, die zu g_0..g_{N-1} gehören."""
        return self.G[:, self.n:]


def _as_stages(values: np.ndarray, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != rows * cols:
        raise DimensionError(None, name, (rows, cols), arr.shape)
    return arr.reshape(rows, cols)


def rollout(model: FeedbackModel, x0: np.ndarray, u: np.ndarray,
            w: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Vorwärtssimulation x_{t+1} = f_t(x_t, u_t) + B_t w_t mit x_0 = x0.

    Returns:
        Zustände (N+1, n)

    Raises:
        NonFiniteStateError: nicht-endlicher Zustand, mit Stufe
    """
    N, n = model.horizon, model.n
    u = _as_stages(u, N, model.m, 'u')
    w = np.zeros((N, model.r)) if w is None else _as_stages(w, N, model.r, 'w')
    x = np.zeros((N + 1, n))
    x[0] = np.asarray(x0, dtype=float).reshape(n)
    if not np.all(np.isfinite(x[0])):
        raise NonFiniteStateError(0)
    for t in range(N):
        x[t + 1] = eval_dynamics(model, t, x[t], u[t], w[t])
        if not np.all(np.isfinite(x[t + 1])):
            raise NonFiniteStateError(t + 1)
    return x


def nominal_from_controls(model: FeedbackModel, w_init: np.ndarray, u: np.ndarray,
                          w: Optional[np.ndarray] = None) -> NominalPoint:
    """Nominalpunkt als Rollout von (u, w) ab w_init; z = C x."""
    N = model.horizon
    u = _as_stages(u, N, model.m, 'u')
    w = np.zeros((N, model.r)) if w is None else _as_stages(w, N, model.r, 'w')
    x = rollout(model, w_init, u, w)
    z = np.array([model.C(t) @ x[t] for t in range(N + 1)])
    return NominalPoint(x=x, u=u.copy(), w_init=np.asarray(w_init, dtype=float).reshape(model.n).copy(),
                        w=w.copy(), z=z)


def assemble_F(model: FeedbackModel, bundle: TrajectoryBundle) -> np.ndarray:
    """
    Gestapeltes Residuum: erster Block w_init - x_0, danach f_t(x_t, u_t) + B_t w_t - x_{t+1}.
    """
    N = model.horizon
    blocks = [bundle.w_init - bundle.x[0]]
    for t in range(N):
        blocks.append(eval_dynamics(model, t, bundle.x[t], bundle.u[t], bundle.w[t]) - bundle.x[t + 1])
    return np.concatenate(blocks)


def sensitivity_blocks(model: FeedbackModel, nominal: Optional[NominalPoint] = None) -> SensitivityBlocks:
    """
    Alle Produkte J_f(i, j) durch kumulative Multiplikation in aufsteigender Zeit.

    J_F selbst wird nie aufgebaut oder faktorisiert.
    """
    if nominal is not None:
        model = model.with_nominal(nominal)
    model.require_nominal('sensitivity_blocks')
    N, n = model.horizon, model.n

    jacobians = np.array([jacobian_dynamics(model, t) for t in range(N)]).reshape(N, n, n)
    blocks = np.zeros((N + 1, N + 1, n, n))
    for i in range(N + 1):
        blocks[i, i] = np.eye(n)
        for j in range(i):
            blocks[i, j] = jacobians[i - 1] @ blocks[i - 1, j]
    return SensitivityBlocks(blocks=blocks, jacobians=jacobians)


def apply_T(model: FeedbackModel, sensitivity: SensitivityBlocks, x: np.ndarray, u: np.ndarray,
            w_init: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    Fixpunktoperator T[x]_t = J_f(t,0) w_init + Σ_τ<t J_f(t,τ+1) (M_τ g_τ(C_τ x_τ, u_τ) + B_τ w_τ).

    Returns:
        T[x] als (N+1, n)
    """
    model.require_nominal('apply_T')
    N, n = model.horizon, model.n
    x = _as_stages(x, N + 1, n, 'x')
    u = _as_stages(u, N, model.m, 'u')
    w = _as_stages(w, N, model.r, 'w')

    # Eingang pro Stufe: M_τ g_τ + B_τ w_τ
    drive = np.zeros((N, n))
    for tau in range(N):
        stage = model.stage(tau)
        g = residual(model, tau, stage.C @ x[tau], u[tau])
        drive[tau] = stage.M @ g + stage.B @ w[tau]

    result = np.zeros((N + 1, n))
    for t in range(N + 1):
        acc = sensitivity.blocks[t, 0] @ np.asarray(w_init, dtype=float)
        for tau in range(t):
            acc = acc + sensitivity.blocks[t, tau + 1] @ drive[tau]
        result[t] = acc
    return result


def build_K_R(model: FeedbackModel, sensitivity: SensitivityBlocks) -> KRMatrices:
    """
    K = [-C J^{-1} M; C J^{-1} M] und R = [-C J^{-1} B; C J^{-1} B] aus den Sensitivitätsblöcken.

    Mit J^{-1} = -S gilt -C J^{-1} M = C S M =: G, analog H = C S B.
    """
    N, n, p, q, r = model.horizon, model.n, model.p, model.q, model.r
    G = np.zeros((q * (N + 1), n + p * N))
    H = np.zeros((q * (N + 1), n + r * N))

    for t in range(N + 1):
        C_t = model.C(t)
        rows = slice(q * t, q * (t + 1))
        H[rows, :n] = C_t @ sensitivity.blocks[t, 0]
        for tau in range(t):
            stage = model.stage(tau)
            S = C_t @ sensitivity.blocks[t, tau + 1]
            G[rows, n + p * tau: n + p * (tau + 1)] = S @ stage.M
            H[rows, n + r * tau: n + r * (tau + 1)] = S @ stage.B

    return KRMatrices(K=np.vstack([G, -G]), R=np.vstack([H, -H]), G=G, H=H, n=n)


def split_plus_minus(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(A^+, A^-) mit A^+ = max(A, 0), A^- = min(A, 0)."""
    matrix = np.asarray(matrix, dtype=float)
    return np.maximum(matrix, 0.0), np.minimum(matrix, 0.0)


__all__ = [
    'TrajectoryBundle', 'SensitivityBlocks', 'KRMatrices', 'rollout', 'nominal_from_controls',
    'assemble_F', 'sensitivity_blocks', 'apply_T', 'build_K_R', 'split_plus_minus'
]
