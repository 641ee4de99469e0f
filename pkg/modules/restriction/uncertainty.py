"""
Ellipsoidische Unsicherheit und Support-Term.

Die Unsicherheitsmenge ist ein Produkt von Ellipsoiden: der Anfangszustand
w_init liegt in {w_init^(0) + γ_init Σ_init^{1/2} e : ‖e‖ <= 1}, jede Störung w_t
in ihrem eigenen Ellipsoid mit γ_dyn und Σ_t. Das Maximum von R_i w über diese
Menge ist R_i w^(0) + Σ_b γ_b √(R_{i,b} Σ_b R_{i,b}ᵀ).
"""

from typing import List, Optional, Sequence, Tuple
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import block_diag

from config import SOLVER_CONFIG
from ..data_models import MarginMode
from ..exceptions import DimensionError, NonPSDError


def check_psd(matrix: np.ndarray, source: str, tol: Optional[float] = None) -> np.ndarray:
    """Symmetrisiert und prüft eine Matrix auf positive Semidefinitheit."""
    tol = 1e-12 if tol is None else tol
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(None, source, 'square', matrix.shape)
    if not np.all(np.isfinite(matrix)):
        raise NonPSDError(source, float('nan'))
    if not np.allclose(matrix, matrix.T, atol=1e-12, rtol=1e-9):
        raise NonPSDError(source, float(np.linalg.eigvals(matrix).real.min()))
    matrix = 0.5 * (matrix + matrix.T)
    if matrix.size:
        smallest = float(np.linalg.eigvalsh(matrix).min())
        if smallest < -tol:
            raise NonPSDError(source, smallest)
    return matrix


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetrische Wurzel Σ^{1/2} über eigh (negative Rundungsfehler werden auf 0 gesetzt)."""
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def block_support(R: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """√(R_i Σ R_iᵀ) für jede Zeile von R."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] == 0:
        return np.zeros(R.shape[0])
    quad = np.einsum('ij,jk,ik->i', R, sigma, R)
    return np.sqrt(np.clip(quad, 0.0, None))


def xi_support(R: np.ndarray, sigma: np.ndarray, w_nominal: np.ndarray, gamma: float = 1.0,
               block_sizes: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Support-Term ξ_i = R_i w^(0) + γ Σ_b √(R_{i,b} Σ_b R_{i,b}ᵀ).

    Ohne block_sizes ist Σ ein einzelner Block, das Ergebnis also
    R w^(0) + γ √(R_i Σ R_iᵀ). Mit block_sizes wird Σ blockdiagonal zerlegt.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    sigma = check_psd(sigma, 'xi_support.sigma', SOLVER_CONFIG['psd_tol'])
    w_nominal = np.asarray(w_nominal, dtype=float).reshape(-1)
    if R.shape[1] != sigma.shape[0] or w_nominal.shape[0] != R.shape[1]:
        raise DimensionError(None, 'xi_support', R.shape[1], (sigma.shape, w_nominal.shape))

    sizes = [R.shape[1]] if block_sizes is None else list(block_sizes)
    if sum(sizes) != R.shape[1]:
        raise DimensionError(None, 'block_sizes', R.shape[1], sum(sizes))

    spread = np.zeros(R.shape[0])
    start = 0
    for size in sizes:
        cols = slice(start, start + size)
        spread += block_support(R[:, cols], sigma[cols, cols])
        start += size
    return R @ w_nominal + gamma * spread


@dataclass(frozen=True, eq=False)
class SupportTerm:
    """ξ(γ) = nominal + γ·spread; im Margen-Modus ist γ Entscheidungsvariable."""
    nominal: np.ndarray
    spread: np.ndarray

    def value(self, gamma: float = 1.0) -> np.ndarray:
        return self.nominal + gamma * self.spread


@dataclass(frozen=True, eq=False)
class UncertaintyModel:
    """
    Args:
        w_init_nominal: nominaler Anfangszustand (n,)
        sigma_init: Form des Anfangs-Ellipsoids (n×n, PSD)
        gamma_init: Radius des Anfangs-Ellipsoids
        sigma_dyn: Form der Störungs-Ellipsoide, eine r×r Matrix oder eine je Stufe
        gamma_dyn: Radius der Störungs-Ellipsoide
        w_nominal: nominale Störungen (N, r); None = 0
    """
    w_init_nominal: np.ndarray
    sigma_init: np.ndarray
    gamma_init: float
    sigma_dyn: Tuple[np.ndarray, ...]
    gamma_dyn: float
    w_nominal: Optional[np.ndarray] = None
    labels: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        w0 = np.asarray(self.w_init_nominal, dtype=float).reshape(-1)
        object.__setattr__(self, 'w_init_nominal', w0)
        object.__setattr__(self, 'sigma_init', check_psd(self.sigma_init, 'sigma_init'))
        sigmas = self.sigma_dyn
        if isinstance(sigmas, np.ndarray) and sigmas.ndim <= 2:
            sigmas = (sigmas,)
        checked = tuple(check_psd(s, f'sigma_dyn[{t}]') if np.size(s) else np.zeros((0, 0))
                        for t, s in enumerate(sigmas))
        object.__setattr__(self, 'sigma_dyn', checked)
        if self.sigma_init.shape[0] != w0.shape[0]:
            raise DimensionError(None, 'sigma_init', (w0.shape[0], w0.shape[0]), self.sigma_init.shape)
        if self.gamma_init < 0 or self.gamma_dyn < 0:
            raise NonPSDError('gamma', min(self.gamma_init, self.gamma_dyn))
        sizes = {s.shape[0] for s in checked}
        if len(sizes) > 1:
            raise DimensionError(None, 'sigma_dyn', 'equal block sizes', sorted(sizes))

    @property
    def n(self) -> int:
        return self.w_init_nominal.shape[0]

    @property
    def r(self) -> int:
        return self.sigma_dyn[0].shape[0] if self.sigma_dyn else 0

    def sigma_at(self, t: int) -> np.ndarray:
        return self.sigma_dyn[0] if len(self.sigma_dyn) == 1 else self.sigma_dyn[t]

    def nominal_disturbances(self, horizon: int) -> np.ndarray:
        if self.w_nominal is None:
            return np.zeros((horizon, self.r))
        w = np.asarray(self.w_nominal, dtype=float).reshape(-1, self.r)
        if w.shape[0] < horizon:
            w = np.vstack([w, np.zeros((horizon - w.shape[0], self.r))])
        return w[:horizon].reshape(horizon, self.r)

    def stacked_nominal(self, horizon: int) -> np.ndarray:
        """w^(0) = (w_init^(0), w_0^(0), ..., w_{N-1}^(0))."""
        return np.concatenate([self.w_init_nominal, self.nominal_disturbances(horizon).reshape(-1)])

    def check_horizon(self, horizon: int) -> None:
        if len(self.sigma_dyn) not in (1, horizon):
            raise DimensionError(None, 'sigma_dyn', f"1 or {horizon} blocks", len(self.sigma_dyn))

    def block_weights(self, mode: Optional[MarginMode] = None) -> Tuple[float, float]:
        """
        Gewichte (init, dyn) der Blöcke im Support-Term.

        Ohne Modus sind es die festen Radien; im Margen-Modus 1 für aktive und 0 für
        ausgeblendete Blöcke (γ ist dann die Variable).
        """
        if mode is None:
            return self.gamma_init, self.gamma_dyn
        if mode == MarginMode.INIT:
            return 1.0, 0.0
        if mode == MarginMode.DYNAMICS:
            return 0.0, 1.0
        return 1.0, 1.0

    def blocks(self, horizon: int) -> List[Tuple[slice, np.ndarray, str]]:
        """Blöcke in der Reihenfolge (init, 0..N-1) als (Spalten, Σ_b, Art)."""
        self.check_horizon(horizon)
        n, r = self.n, self.r
        result = [(slice(0, n), self.sigma_init, 'init')]
        for t in range(horizon):
            result.append((slice(n + r * t, n + r * (t + 1)), self.sigma_at(t), 'dyn'))
        return result

    def sigma_matrix(self, horizon: int) -> np.ndarray:
        """Blockdiagonales Σ über (init, 0..N-1)."""
        return block_diag(*[sigma for _, sigma, _ in self.blocks(horizon)])

    def support(self, H: np.ndarray, horizon: int, mode: Optional[MarginMode] = None) -> SupportTerm:
        """
        Support-Term der Zeilen von H = C S B über alle Blöcke.

        Args:
            H: Matrix (rows, n + rN)
            mode: None = feste Radien, sonst Einheitsgewichte der aktiven Blöcke
        """
        H = np.atleast_2d(np.asarray(H, dtype=float))
        w_init_weight, dyn_weight = self.block_weights(mode)
        spread = np.zeros(H.shape[0])
        for cols, sigma, kind in self.blocks(horizon):
            weight = w_init_weight if kind == 'init' else dyn_weight
            if weight == 0.0:
                continue
            spread += weight * block_support(H[:, cols], sigma)
        return SupportTerm(nominal=H @ self.stacked_nominal(horizon), spread=spread)

    def with_initial_state(self, x0: np.ndarray) -> 'UncertaintyModel':
        return replace(self, w_init_nominal=np.asarray(x0, dtype=float).reshape(-1))

    def scaled(self, factor: float) -> 'UncertaintyModel':
        """Beide Radien mit `factor` multipliziert (Stresstests)."""
        return replace(self, gamma_init=self.gamma_init * factor, gamma_dyn=self.gamma_dyn * factor)

    def with_gammas(self, gamma_init: float, gamma_dyn: float) -> 'UncertaintyModel':
        return replace(self, gamma_init=gamma_init, gamma_dyn=gamma_dyn)

    def shifted(self, offset: int, horizon: int) -> 'UncertaintyModel':
        """Zeitvariante Blöcke und nominale Störungen um `offset` Stufen verschoben."""
        sigmas = self.sigma_dyn
        if len(sigmas) > 1:
            sigmas = tuple(sigmas[min(offset + t, len(sigmas) - 1)] for t in range(horizon))
        w_nominal = None
        if self.w_nominal is not None:
            w = np.asarray(self.w_nominal, dtype=float)
            w_nominal = w[min(offset, w.shape[0]):]
        return replace(self, sigma_dyn=sigmas, w_nominal=w_nominal)


__all__ = ['check_psd', 'psd_sqrt', 'block_support', 'xi_support', 'SupportTerm', 'UncertaintyModel']
