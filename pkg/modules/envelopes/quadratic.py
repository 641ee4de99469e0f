"""
Quadratische Envelope-Paare für Residualkomponenten.

Ein Envelope besteht aus einer konvexen Oberschranke und einer konkaven Unterschranke,
beide als quadratische Form in den lokalen Koordinaten y = (z_I, u) um einen Ankerpunkt.
Die Konstruktoren decken bilineare Terme, sin/cos, Produkte v·cos(θ)/v·sin(θ) und
affine Komponenten ab.
"""

from typing import Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np

from config import ENVELOPE_CONFIG
from ..exceptions import EnvelopeError


@dataclass(frozen=True)
class QuadraticForm:
    """q(y) = c + aᵀ(y - y0) + ½ (y - y0)ᵀ H (y - y0), y0 = Anker des Envelopes."""
    c: float
    a: np.ndarray
    H: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def __call__(self, delta: np.ndarray) -> np.ndarray:
        """Auswertung für einen Versatz (d,) oder einen Batch (S, d)."""
        delta = np.asarray(delta, dtype=float)
        linear = delta @ self.a
        quad = 0.5 * np.einsum('...i,ij,...j->...', delta, self.H, delta)
        return self.c + linear + quad

    def shifted(self, dc: float, da: np.ndarray) -> 'QuadraticForm':
        return QuadraticForm(self.c + dc, self.a + da, self.H)

    def is_zero_curvature(self) -> bool:
        return not np.any(self.H)


@dataclass(frozen=True)
class QuadraticEnvelope:
    """
    Envelope-Paar lower(y) <= g(y) <= upper(y) für eine Residualkomponente.

    Args:
        indices: Koordinaten I_k des transformierten Zustands z, von denen die Komponente abhängt
        n_controls: Anzahl m der Steuergrößen (lokale Koordinaten sind (z_I, u))
        anchor: Ankerpunkt y0 = (z0[I], u0)
        upper: konvexe Oberschranke (H positiv semidefinit)
        lower: konkave Unterschranke (H negativ semidefinit)
    """
    indices: Tuple[int, ...]
    n_controls: int
    anchor: np.ndarray
    upper: QuadraticForm
    lower: QuadraticForm
    label: str = field(default="", compare=False)

    def __post_init__(self):
        dim = len(self.indices) + self.n_controls
        for name, form in (('anchor', self.anchor), ('upper.a', self.upper.a), ('lower.a', self.lower.a)):
            if np.shape(form) != (dim,):
                raise EnvelopeError(f"Envelope '{self.label}': {name} has shape {np.shape(form)}, expected ({dim},)")
        for name, form in (('upper', self.upper), ('lower', self.lower)):
            if form.H.shape != (dim, dim):
                raise EnvelopeError(f"Envelope '{self.label}': {name}.H has shape {form.H.shape}, expected ({dim}, {dim})")

        tol = ENVELOPE_CONFIG['convexity_tol']
        if dim > 0:
            if np.linalg.eigvalsh(self.upper.H).min() < -tol:
                raise EnvelopeError(f"Envelope '{self.label}': upper bound is not convex")
            if np.linalg.eigvalsh(self.lower.H).max() > tol:
                raise EnvelopeError(f"Envelope '{self.label}': lower bound is not concave")

    @property
    def dim(self) -> int:
        return len(self.indices) + self.n_controls

    def local_point(self, z_sub: np.ndarray, u: Optional[np.ndarray] = None) -> np.ndarray:
        """Baut y = (z_I, u); z_sub enthält nur die Koordinaten aus indices."""
        u = np.zeros(self.n_controls) if u is None else np.asarray(u, dtype=float)
        return np.concatenate([np.asarray(z_sub, dtype=float), u])

    def upper_at(self, y: np.ndarray) -> np.ndarray:
        return self.upper(np.asarray(y, dtype=float) - self.anchor)

    def lower_at(self, y: np.ndarray) -> np.ndarray:
        return self.lower(np.asarray(y, dtype=float) - self.anchor)

    def evaluate_upper(self, z_sub: np.ndarray, u: Optional[np.ndarray] = None) -> float:
        return float(self.upper_at(self.local_point(z_sub, u)))

    def evaluate_lower(self, z_sub: np.ndarray, u: Optional[np.ndarray] = None) -> float:
        return float(self.lower_at(self.local_point(z_sub, u)))

    def minus_linear(self, coeff_z: np.ndarray) -> 'QuadraticEnvelope':
        """
        Envelope für g - coeff_zᵀ z_I.

        Damit wird aus dem Envelope einer Basisfunktion psi_k das Envelope des
        Residuums g_k = psi_k - J_psi,k z.
        """
        coeff_z = np.asarray(coeff_z, dtype=float)
        if coeff_z.shape != (len(self.indices),):
            raise EnvelopeError(f"Linear term has shape {coeff_z.shape}, expected ({len(self.indices)},)")
        da = np.concatenate([-coeff_z, np.zeros(self.n_controls)])
        dc = -float(coeff_z @ self.anchor[:len(self.indices)])
        return QuadraticEnvelope(self.indices, self.n_controls, self.anchor,
                                 self.upper.shifted(dc, da), self.lower.shifted(dc, da), self.label)

    def embed(self, indices: Sequence[int], n_controls: int,
              control_anchor: Optional[np.ndarray] = None) -> 'QuadraticEnvelope':
        """
        Überträgt ein Envelope ohne Steuergrößen auf Modellkoordinaten.

        Die bisherigen lokalen Koordinaten werden den z-Indizes `indices` zugeordnet,
        die Steuergrößen gehen mit Koeffizient 0 ein.
        """
        if self.n_controls != 0:
            raise EnvelopeError("embed() expects an envelope without control coordinates")
        if len(indices) != len(self.indices):
            raise EnvelopeError(f"embed(): {len(indices)} indices for a {len(self.indices)}-dimensional envelope")
        pad = n_controls
        u_anchor = np.zeros(pad) if control_anchor is None else np.asarray(control_anchor, dtype=float)

        def _pad(form: QuadraticForm) -> QuadraticForm:
            H = np.zeros((self.dim + pad, self.dim + pad))
            H[:self.dim, :self.dim] = form.H
            return QuadraticForm(form.c, np.concatenate([form.a, np.zeros(pad)]), H)

        return QuadraticEnvelope(tuple(int(i) for i in indices), n_controls,
                                 np.concatenate([self.anchor, u_anchor]),
                                 _pad(self.upper), _pad(self.lower), self.label)

    def z_dependence(self) -> Tuple[int, ...]:
        """Positionen innerhalb von indices, von denen eine der Schranken tatsächlich abhängt."""
        active = []
        for pos in range(len(self.indices)):
            for form in (self.upper, self.lower):
                if form.a[pos] != 0.0 or np.any(form.H[pos, :]) or np.any(form.H[:, pos]):
                    active.append(pos)
                    break
        return tuple(active)

    def gap_at_anchor(self) -> float:
        return float(self.upper.c - self.lower.c)


# === KONSTRUKTOREN ===
def bilinear_envelope(x0: float, y0: float, rho1: Optional[float] = None,
                      rho2: Optional[float] = None) -> QuadraticEnvelope:
    """
    Envelope-Paar für das Produkt x·y um (x0, y0).

    lower = x0 y0 + y0 Δx + x0 Δy - ¼ (ρ1 Δx - Δy/ρ1)²
    upper = x0 y0 + y0 Δx + x0 Δy + ¼ (ρ2 Δx + Δy/ρ2)²
    """
    rho1 = ENVELOPE_CONFIG['rho1'] if rho1 is None else rho1
    rho2 = ENVELOPE_CONFIG['rho2'] if rho2 is None else rho2
    if rho1 <= 0 or rho2 <= 0:
        raise EnvelopeError(f"Bilinear envelope needs rho1, rho2 > 0 (got {rho1}, {rho2})")

    c = x0 * y0
    a = np.array([y0, x0], dtype=float)
    v_up = np.array([rho2, 1.0 / rho2])
    v_lo = np.array([rho1, -1.0 / rho1])
    # ¼ (vᵀΔ)² = ½ Δᵀ (½ v vᵀ) Δ
    upper = QuadraticForm(c, a, 0.5 * np.outer(v_up, v_up))
    lower = QuadraticForm(c, a, -0.5 * np.outer(v_lo, v_lo))
    return QuadraticEnvelope((0, 1), 0, np.array([x0, y0], dtype=float), upper, lower, label='bilinear')


def sin_envelope(theta0: float) -> QuadraticEnvelope:
    """sin θ0 + cos θ0 Δθ ± ½ Δθ² (|sin''| <= 1)."""
    return curvature_bound_envelope(np.sin(theta0), np.array([np.cos(theta0)]),
                                    np.array([[1.0]]), np.array([theta0]), label='sin')


def cos_envelope(theta0: float) -> QuadraticEnvelope:
    """cos θ0 - sin θ0 Δθ ± ½ Δθ² (|cos''| <= 1)."""
    return curvature_bound_envelope(np.cos(theta0), np.array([-np.sin(theta0)]),
                                    np.array([[1.0]]), np.array([theta0]), label='cos')


def curvature_bound_envelope(value: float, gradient: np.ndarray, curvature: np.ndarray,
                             anchor: np.ndarray, indices: Optional[Sequence[int]] = None,
                             label: str = 'curvature') -> QuadraticEnvelope:
    """
    Taylor-Envelope aus Wert, Gradient und einer Krümmungsschranke D.

    Voraussetzung: |g(y) - g(y0) - ∇g(y0)ᵀΔ| <= ½ ΔᵀDΔ auf dem gesamten Definitionsbereich.
    Dann ist g(y0) + ∇gᵀΔ ± ½ ΔᵀDΔ ein gültiges Paar.
    """
    gradient = np.atleast_1d(np.asarray(gradient, dtype=float))
    curvature = np.atleast_2d(np.asarray(curvature, dtype=float))
    anchor = np.atleast_1d(np.asarray(anchor, dtype=float))
    curvature = 0.5 * (curvature + curvature.T)
    if curvature.size and np.linalg.eigvalsh(curvature).min() < -ENVELOPE_CONFIG['convexity_tol']:
        raise EnvelopeError(f"Curvature bound for '{label}' must be positive semidefinite")
    idx = tuple(range(gradient.shape[0])) if indices is None else tuple(int(i) for i in indices)
    return QuadraticEnvelope(idx, 0, anchor,
                             QuadraticForm(float(value), gradient, curvature),
                             QuadraticForm(float(value), gradient, -curvature), label=label)


def trig_product_envelope(v0: float, theta0: float, kind: str = 'cos',
                          rho: Optional[float] = None) -> QuadraticEnvelope:
    """
    Envelope für v·cos(θ) bzw. v·sin(θ) um (v0, θ0).

    Zerlegung v·cos θ = v0·cos θ + Δv·cos θ: der erste Term ist durch die
    Taylor-Schranke von cos mit Faktor |v0| beschränkt, der zweite durch
    |Δv|·|Δθ| <= ½(ρΔv² + Δθ²/ρ). Ergibt die Krümmungsschranke diag(ρ, |v0| + 1/ρ).
    """
    rho = ENVELOPE_CONFIG['rho_trig_product'] if rho is None else rho
    if rho <= 0:
        raise EnvelopeError(f"trig_product_envelope needs rho > 0 (got {rho})")

    c, s = np.cos(theta0), np.sin(theta0)
    if kind == 'cos':
        value, gradient = v0 * c, np.array([c, -v0 * s])
    elif kind == 'sin':
        value, gradient = v0 * s, np.array([s, v0 * c])
    else:
        raise EnvelopeError(f"Unknown trig product kind '{kind}'")

    curvature = np.diag([rho, abs(v0) + 1.0 / rho])
    return curvature_bound_envelope(value, gradient, curvature, np.array([v0, theta0]),
                                    label=f'v*{kind}')


def linear_envelope(indices: Sequence[int], n_controls: int, coeff_z: np.ndarray,
                    coeff_u: np.ndarray, z0_sub: np.ndarray, u0: np.ndarray,
                    const: float = 0.0) -> QuadraticEnvelope:
    """Exaktes Envelope einer affinen Komponente const + coeff_zᵀ z_I + coeff_uᵀ u."""
    coeff = np.concatenate([np.asarray(coeff_z, dtype=float), np.asarray(coeff_u, dtype=float)])
    anchor = np.concatenate([np.asarray(z0_sub, dtype=float), np.asarray(u0, dtype=float)])
    dim = coeff.shape[0]
    value = const + float(coeff @ anchor)
    form = QuadraticForm(value, coeff, np.zeros((dim, dim)))
    return QuadraticEnvelope(tuple(int(i) for i in indices), n_controls, anchor, form, form, label='linear')


__all__ = [
    'QuadraticForm', 'QuadraticEnvelope', 'bilinear_envelope', 'sin_envelope', 'cos_envelope',
    'curvature_bound_envelope', 'trig_product_envelope', 'linear_envelope'
]
