"""
Systemmodelle in nichtlinearer Feedback-Darstellung.

Jede Stufe wird als f_t(x, u) = M_t psi_t(C_t x, u) mit Störeingang B_t w dargestellt.
Nach Abzug der Linearisierung am Nominalpunkt bleibt das Residuum
g_t(z, u) = psi_t(z, u) - J_psi^(0) z, das über Envelopes beschränkt wird.
"""

from typing import Callable, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field, replace

import numpy as np

from config import MODEL_CONFIG
from ..data_models import NominalPoint
from ..envelopes.quadratic import QuadraticEnvelope, linear_envelope
from ..exceptions import (
    DimensionError, EnvelopeError, ModelError, NominalNotRegisteredError
)
from ..utils.logger import logger

BasisFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]     # (z, u) -> (p,)
BasisJacobian = Callable[[np.ndarray, np.ndarray], np.ndarray]     # (z, u) -> (p, q)
EnvelopeBuilder = Callable[[np.ndarray, np.ndarray], QuadraticEnvelope]  # (z0, u0) -> Envelope von psi_k
ReferenceDynamics = Callable[[np.ndarray, np.ndarray], np.ndarray]  # (x, u) -> f_t(x, u)


def _as_matrix(value, rows: int) -> np.ndarray:
    """Matrix mit fester Zeilenzahl; leere Eingaben werden zu (rows, 0)."""
    arr = np.asarray(value, dtype=float)
    if arr.size == 0:
        return np.zeros((rows, 0))
    return arr.reshape(rows, -1)


@dataclass(frozen=True)
class StageModel:
    """
    Eine Stufe der Feedback-Darstellung.

    Args:
        M: n×p Kombinationsmatrix
        C: q×n Transformation z = C x (Rang n)
        B: n×r Störeingang
        basis: psi(z, u)
        basis_jacobian: analytische Jacobi-Matrix von psi nach z
        sparsity: Indexmenge I_k je Basiskomponente
        envelopes: Envelope-Builder je Basiskomponente (None = fehlt)
        n_controls: m
        reference: optionale Originaldynamik f_t(x, u) zur Validierung
    """
    M: np.ndarray
    C: np.ndarray
    B: np.ndarray
    basis: BasisFunction
    basis_jacobian: BasisJacobian
    sparsity: Tuple[Tuple[int, ...], ...]
    envelopes: Tuple[Optional[EnvelopeBuilder], ...]
    n_controls: int
    reference: Optional[ReferenceDynamics] = None
    C_pinv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'M', np.atleast_2d(np.asarray(self.M, dtype=float)))
        object.__setattr__(self, 'C', np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, 'B', _as_matrix(self.B, self.M.shape[0]))
        object.__setattr__(self, 'sparsity', tuple(tuple(int(i) for i in s) for s in self.sparsity))
        object.__setattr__(self, 'envelopes', tuple(self.envelopes))
        object.__setattr__(self, 'C_pinv', np.linalg.pinv(self.C))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.n_controls

    def validate(self, stage: Optional[int] = None) -> None:
        """Prüft Dimensionen, Rang von C und Sparsity-Mengen."""
        n, p, q = self.n, self.p, self.q
        if self.C.shape[1] != n:
            raise DimensionError(stage, 'C', f"(q, {n})", self.C.shape)
        if len(self.sparsity) != p:
            raise DimensionError(stage, 'sparsity', p, len(self.sparsity))
        if len(self.envelopes) != p:
            raise DimensionError(stage, 'envelopes', p, len(self.envelopes))
        for k, idx in enumerate(self.sparsity):
            if any(i < 0 or i >= q for i in idx):
                raise ModelError(f"Stage {stage}: sparsity set of component {k} has indices outside 0..{q - 1}")

        singular = np.linalg.svd(self.C, compute_uv=False)
        if singular.size < n or singular[-1] <= MODEL_CONFIG['rank_tol'] * max(singular[0], 1e-300):
            raise ModelError(f"Stage {stage}: C must have rank n={n} (linear transform must be one-to-one)")

    @property
    def max_sparsity(self) -> int:
        return max((len(s) for s in self.sparsity), default=0)


@dataclass(frozen=True)
class FeedbackModel:
    """
    Zeitdiskretes System über N Stufen in Feedback-Darstellung.

    Zeitinvariante Modelle speichern genau eine Stufe, zeitvariante N Stufen.
    Ein registrierter Nominalpunkt (with_nominal) wird für Residuen und Jacobi-Matrizen benötigt.
    """
    name: str
    horizon: int
    stages: Tuple[StageModel, ...]
    nominal: Optional[NominalPoint] = None

    def __post_init__(self):
        object.__setattr__(self, 'stages', tuple(self.stages))
        if self.horizon < 1:
            raise ModelError(f"Model '{self.name}': horizon must be >= 1 (got {self.horizon})")
        if len(self.stages) not in (1, self.horizon):
            raise ModelError(f"Model '{self.name}': expected 1 or {self.horizon} stages, got {len(self.stages)}")

        first = self.stages[0]
        for t, stage in enumerate(self.stages):
            stage.validate(t)
            dims = (stage.n, stage.m, stage.p, stage.q, stage.r)
            if dims != (first.n, first.m, first.p, first.q, first.r):
                raise DimensionError(t, 'dims', (first.n, first.m, first.p, first.q, first.r), dims)

        if self.nominal is not None:
            self._check_nominal(self.nominal)

    # === DIMENSIONEN ===
    @property
    def n(self) -> int:
        return self.stages[0].n

    @property
    def m(self) -> int:
        return self.stages[0].m

    @property
    def p(self) -> int:
        return self.stages[0].p

    @property
    def q(self) -> int:
        return self.stages[0].q

    @property
    def r(self) -> int:
        return self.stages[0].r

    @property
    def time_invariant(self) -> bool:
        return len(self.stages) == 1

    @property
    def sparsity_degree(self) -> int:
        """|I| = max_k |I_k| über alle Stufen."""
        return max(stage.max_sparsity for stage in self.stages)

    def stage(self, t: int) -> StageModel:
        """Stufe t (0 <= t < N); für t = N wird die letzte Stufe für C geliefert."""
        if t < 0 or t > self.horizon:
            raise DimensionError(t, 'stage', f"0..{self.horizon}", t)
        if self.time_invariant:
            return self.stages[0]
        return self.stages[min(t, self.horizon - 1)]

    def C(self, t: int) -> np.ndarray:
        return self.stage(t).C

    # === ABGELEITETE MODELLE ===
    def with_horizon(self, horizon: int) -> 'FeedbackModel':
        """Gleiches zeitinvariantes Modell mit anderem Horizont."""
        if not self.time_invariant and horizon != self.horizon:
            raise ModelError(f"Model '{self.name}' is time-varying; its horizon is fixed at {self.horizon}")
        return replace(self, horizon=horizon, nominal=None)

    def with_nominal(self, nominal: NominalPoint) -> 'FeedbackModel':
        """Kopie des Modells mit registriertem Nominalpunkt."""
        return replace(self, nominal=nominal)

    def _check_nominal(self, nominal: NominalPoint) -> None:
        N = self.horizon
        expected = {
            'x': (N + 1, self.n), 'u': (N, self.m), 'w_init': (self.n,),
            'w': (N, self.r), 'z': (N + 1, self.q),
        }
        for name, shape in expected.items():
            got = getattr(nominal, name).shape
            if got != shape:
                raise DimensionError(None, f'nominal.{name}', shape, got)

    def require_nominal(self, operation: str) -> NominalPoint:
        if self.nominal is None:
            raise NominalNotRegisteredError(operation)
        return self.nominal

    def basis_jacobian_at_nominal(self, t: int) -> np.ndarray:
        """J_psi_t^(0), (p, q)."""
        nominal = self.require_nominal('basis_jacobian_at_nominal')
        stage = self.stage(t)
        return np.asarray(stage.basis_jacobian(nominal.z[t], nominal.u[t]), dtype=float).reshape(stage.p, stage.q)


# === AUSWERTUNG ===
def _check_vector(value: np.ndarray, size: int, stage: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape[0] != size:
        raise DimensionError(stage, name, size, arr.shape[0])
    return arr


def eval_basis(model: FeedbackModel, t: int, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """psi_t(z, u)."""
    stage = model.stage(t)
    z = _check_vector(z, stage.q, t, 'z')
    u = _check_vector(u, stage.m, t, 'u')
    return np.asarray(stage.basis(z, u), dtype=float).reshape(stage.p)


def eval_dynamics(model: FeedbackModel, t: int, x: np.ndarray, u: np.ndarray,
                  w: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Ein Schritt x_{t+1} = M_t psi_t(C_t x, u) + B_t w.

    Raises:
        DimensionError: mit Angabe der Stufe und des Feldes
    """
    if t < 0 or t >= model.horizon:
        raise DimensionError(t, 'stage', f"0..{model.horizon - 1}", t)
    stage = model.stage(t)
    x = _check_vector(x, stage.n, t, 'x')
    u = _check_vector(u, stage.m, t, 'u')
    w = np.zeros(stage.r) if w is None else _check_vector(w, stage.r, t, 'w')
    return stage.M @ eval_basis(model, t, stage.C @ x, u) + stage.B @ w


def residual(model: FeedbackModel, t: int, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """g_t(z, u) = psi_t(z, u) - J_psi^(0) z (benötigt registrierten Nominalpunkt)."""
    model.require_nominal('residual')
    J = model.basis_jacobian_at_nominal(t)
    return eval_basis(model, t, z, u) - J @ np.asarray(z, dtype=float).reshape(-1)


def jacobian_dynamics(model: FeedbackModel, t: int,
                      nominal: Optional[NominalPoint] = None) -> np.ndarray:
    """J_f_t^(0) = M_t J_psi_t^(0) C_t."""
    if nominal is not None:
        model = model.with_nominal(nominal)
    stage = model.stage(t)
    return stage.M @ model.basis_jacobian_at_nominal(t) @ stage.C


def residual_envelope(model: FeedbackModel, t: int, k: int) -> QuadraticEnvelope:
    """
    Envelope der Residualkomponente g_{t,k}, verankert am registrierten Nominalpunkt.

    Raises:
        EnvelopeError: kein Envelope-Builder für die Komponente hinterlegt
    """
    nominal = model.require_nominal('residual_envelope')
    stage = model.stage(t)
    builder = stage.envelopes[k]
    if builder is None:
        raise EnvelopeError(f"Missing envelope for residual component {k} at stage {t}")

    envelope = builder(nominal.z[t], nominal.u[t])
    if envelope.indices != stage.sparsity[k] or envelope.n_controls != stage.m:
        raise EnvelopeError(
            f"Envelope of component {k} at stage {t} covers {envelope.indices} with "
            f"{envelope.n_controls} controls; expected {stage.sparsity[k]} with {stage.m}"
        )
    J_row = model.basis_jacobian_at_nominal(t)[k]
    return envelope.minus_linear(J_row[list(envelope.indices)])


# === KONSTRUKTION ===
@dataclass(frozen=True)
class ContinuousFeedback:
    """
    Kontinuierliche rechte Seite xdot = M_c psi_c(C x, u) + B_c w.

    Wird mit discretize_euler in eine StageModel überführt.
    """
    n_states: int
    n_controls: int
    C: np.ndarray
    M: np.ndarray
    basis: BasisFunction
    basis_jacobian: BasisJacobian
    sparsity: Tuple[Tuple[int, ...], ...]
    envelopes: Tuple[Optional[EnvelopeBuilder], ...]
    B: np.ndarray
    reference: Optional[ReferenceDynamics] = None


def identity_envelope_builder(index: int, n_controls: int) -> EnvelopeBuilder:
    """Exaktes Envelope der Komponente psi_k = z_index."""
    def build(z0: np.ndarray, u0: np.ndarray) -> QuadraticEnvelope:
        return linear_envelope((index,), n_controls, np.ones(1), np.zeros(n_controls),
                               z0[[index]], u0)
    return build


def control_envelope_builder(control: int, n_controls: int) -> EnvelopeBuilder:
    """Exaktes Envelope der Komponente psi_k = u_control."""
    def build(z0: np.ndarray, u0: np.ndarray) -> QuadraticEnvelope:
        coeff_u = np.zeros(n_controls)
        coeff_u[control] = 1.0
        return linear_envelope((), n_controls, np.zeros(0), coeff_u, np.zeros(0), u0)
    return build


def discretize_euler(rhs: ContinuousFeedback, h: float) -> StageModel:
    """
    Explizites Euler-Verfahren: f(x, u) = x + h·rhs(x, u).

    Die Basis wird um die Identitätskomponenten z erweitert: psi = (z, psi_c),
    M = [C^+, h M_c], B = h B_c.
    """
    if h <= 0:
        raise ModelError(f"Euler step must be positive (got {h})")

    C = np.atleast_2d(np.asarray(rhs.C, dtype=float))
    q, m = C.shape[0], rhs.n_controls
    C_pinv = np.linalg.pinv(C)
    M_c = _as_matrix(rhs.M, rhs.n_states)
    pc = M_c.shape[1]

    def basis(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        extra = np.asarray(rhs.basis(z, u), dtype=float).reshape(pc)
        return np.concatenate([z, extra])

    def basis_jacobian(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        extra = np.asarray(rhs.basis_jacobian(z, u), dtype=float).reshape(pc, q)
        return np.vstack([np.eye(q), extra])

    reference = None
    if rhs.reference is not None:
        def reference(x: np.ndarray, u: np.ndarray) -> np.ndarray:
            return x + h * np.asarray(rhs.reference(x, u), dtype=float)

    sparsity = tuple((i,) for i in range(q)) + tuple(rhs.sparsity)
    envelopes = tuple(identity_envelope_builder(i, m) for i in range(q)) + tuple(rhs.envelopes)

    return StageModel(
        M=np.hstack([C_pinv, h * M_c]),
        C=C,
        B=h * _as_matrix(rhs.B, rhs.n_states),
        basis=basis,
        basis_jacobian=basis_jacobian,
        sparsity=sparsity,
        envelopes=envelopes,
        n_controls=m,
        reference=reference,
    )


# === VALIDIERUNG ===
def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], z: np.ndarray,
                               step: Optional[float] = None) -> np.ndarray:
    """Zentrale Differenzen mit Schrittweite step·(1 + |z_j|). Nur zur Validierung."""
    step = MODEL_CONFIG['fd_step'] if step is None else step
    z = np.asarray(z, dtype=float)
    f0 = np.asarray(fn(z), dtype=float)
    J = np.zeros((f0.shape[0], z.shape[0]))
    for j in range(z.shape[0]):
        dz = step * (1.0 + abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += dz
        zm[j] -= dz
        J[:, j] = (np.asarray(fn(zp)) - np.asarray(fn(zm))) / (2.0 * dz)
    return J


def validate_representation(model: FeedbackModel, samples: Optional[int] = None, seed: int = 0,
                            scale: float = 1.0, strict: bool = True) -> float:
    """
    Prüft f_t(x, u) = M_t psi_t(C_t x, u) an Zufallspunkten gegen die Originaldynamik.

    Returns:
        Größter relativer Fehler über alle Stufen (0.0 falls keine Referenz hinterlegt)
    """
    samples = MODEL_CONFIG['consistency_samples'] if samples is None else samples
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, stage in enumerate(model.stages):
        if stage.reference is None:
            continue
        for _ in range(samples):
            x = scale * rng.standard_normal(stage.n)
            u = scale * rng.standard_normal(stage.m)
            expected = np.asarray(stage.reference(x, u), dtype=float)
            got = stage.M @ np.asarray(stage.basis(stage.C @ x, u), dtype=float)
            err = float(np.max(np.abs(expected - got), initial=0.0)) / (1.0 + float(np.max(np.abs(expected), initial=0.0)))
            worst = max(worst, err)

    if strict and worst > MODEL_CONFIG['consistency_tol']:
        raise ModelError(f"Model '{model.name}': representation error {worst:.3e} exceeds tolerance")
    return worst


def check_sparsity(model: FeedbackModel, samples: int = 20, seed: int = 0,
                   strict: bool = True) -> List[Tuple[int, int, int]]:
    """
    Stichprobe: Störung von z_j mit j außerhalb I_k darf psi_k nicht ändern.

    Returns:
        Liste (Stufe, Komponente, Koordinate) aller Verstöße
    """
    rng = np.random.default_rng(seed)
    offenders = set()
    for t, stage in enumerate(model.stages):
        for _ in range(samples):
            z = rng.standard_normal(stage.q)
            u = rng.standard_normal(stage.m)
            base = np.asarray(stage.basis(z, u), dtype=float)
            for j in range(stage.q):
                zp = z.copy()
                zp[j] += 1.0 + rng.random()
                moved = np.asarray(stage.basis(zp, u), dtype=float)
                for k, idx in enumerate(stage.sparsity):
                    if j not in idx and moved[k] != base[k]:
                        offenders.add((t, k, j))

    result = sorted(offenders)
    if result:
        logger.warning(f"Model '{model.name}': {len(result)} sparsity violations, first {result[0]}")
        if strict:
            raise ModelError(f"Model '{model.name}': basis component depends on coordinates outside its sparsity set: {result[:5]}")
    return result


__all__ = [
    'StageModel', 'FeedbackModel', 'ContinuousFeedback', 'eval_basis', 'eval_dynamics',
    'residual', 'jacobian_dynamics', 'residual_envelope', 'discretize_euler',
    'identity_envelope_builder', 'control_envelope_builder', 'finite_difference_jacobian',
    'validate_representation', 'check_sparsity'
]
