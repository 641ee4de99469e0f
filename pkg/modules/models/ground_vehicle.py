"""
Bodenfahrzeug (Einspurmodell mit Geschwindigkeit und Kurs).

Zustand x = (x1, x2, v, θ), Steuerung u = (Beschleunigung, Drehrate),
Störung w wirkt auf die Positionszeilen. Euler-Diskretisierung mit Schritt h.
"""

from typing import Optional

import numpy as np

from config import ENVELOPE_CONFIG, MODEL_CONFIG
from ..core.model import (
    ContinuousFeedback, FeedbackModel, control_envelope_builder, discretize_euler
)
from ..envelopes.quadratic import trig_product_envelope

# Koordinaten in z (C = I)
POS_X, POS_Y, SPEED, HEADING = 0, 1, 2, 3
N_STATES, N_CONTROLS = 4, 2


def _vehicle_basis(z: np.ndarray, u: np.ndarray) -> np.ndarray:
    v, theta = z[SPEED], z[HEADING]
    return np.array([v * np.cos(theta), v * np.sin(theta), u[0], u[1]])


def _vehicle_basis_jacobian(z: np.ndarray, u: np.ndarray) -> np.ndarray:
    v, theta = z[SPEED], z[HEADING]
    c, s = np.cos(theta), np.sin(theta)
    J = np.zeros((4, N_STATES))
    J[0, SPEED], J[0, HEADING] = c, -v * s
    J[1, SPEED], J[1, HEADING] = s, v * c
    return J


def _vehicle_rhs(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    v, theta = x[SPEED], x[HEADING]
    return np.array([v * np.cos(theta), v * np.sin(theta), u[0], u[1]])


def _trig_builder(kind: str, rho: float):
    def build(z0: np.ndarray, u0: np.ndarray):
        envelope = trig_product_envelope(z0[SPEED], z0[HEADING], kind, rho)
        return envelope.embed((SPEED, HEADING), N_CONTROLS, control_anchor=u0)
    return build


def vehicle_continuous(rho: Optional[float] = None) -> ContinuousFeedback:
    """Kontinuierliche Feedback-Darstellung: psi_c = (v cos θ, v sin θ, u1, u2), M_c = I."""
    rho = ENVELOPE_CONFIG['rho_trig_product'] if rho is None else rho
    disturbance = np.zeros((N_STATES, 2))
    disturbance[POS_X, 0] = 1.0
    disturbance[POS_Y, 1] = 1.0

    return ContinuousFeedback(
        n_states=N_STATES,
        n_controls=N_CONTROLS,
        C=np.eye(N_STATES),
        M=np.eye(N_STATES),
        basis=_vehicle_basis,
        basis_jacobian=_vehicle_basis_jacobian,
        sparsity=((SPEED, HEADING), (SPEED, HEADING), (), ()),
        envelopes=(_trig_builder('cos', rho), _trig_builder('sin', rho),
                   control_envelope_builder(0, N_CONTROLS), control_envelope_builder(1, N_CONTROLS)),
        B=disturbance,
        reference=_vehicle_rhs,
    )


def ground_vehicle_model(h: Optional[float] = None, horizon: int = 20,
                         rho: Optional[float] = None) -> FeedbackModel:
    """
    Fahrzeugmodell mit Basis {x1, x2, v, θ, v cos θ, v sin θ, u1, u2}.

    B_t = h·[I2; 0] leitet die Störung in die Positionszeilen.

    Args:
        h: Euler-Schrittweite (Standard 0.05)
        horizon: Anzahl N der Steuerstufen
        rho: Gewichtung der Produkt-Envelopes
    """
    h = MODEL_CONFIG['default_step'] if h is None else h
    stage = discretize_euler(vehicle_continuous(rho), h)
    return FeedbackModel(name='ground_vehicle', horizon=horizon, stages=(stage,))


def open_loop_schedule(horizon: int, first=(15.0, 0.75), second=(-15.0, -0.75)) -> np.ndarray:
    """Steuerfolge: `first` für t <= N/2, danach `second`."""
    u = np.zeros((horizon, N_CONTROLS))
    for t in range(horizon):
        u[t] = first if t <= horizon / 2 else second
    return u


__all__ = ['ground_vehicle_model', 'vehicle_continuous', 'open_loop_schedule',
           'POS_X', 'POS_Y', 'SPEED', 'HEADING']
