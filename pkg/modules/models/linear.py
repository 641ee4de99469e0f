"""
Lineare Systeme x_{t+1} = A x_t + B_u u_t + B_w w_t.

Basis psi = (z, u) mit M = [A C^+, B_u]; alle Residuen sind konstant in z,
die Restriktion ist damit exakt.
"""

from typing import Optional

import numpy as np

from ..core.model import (
    FeedbackModel, StageModel, control_envelope_builder, identity_envelope_builder
)
from ..exceptions import DimensionError


def linear_stage(A: np.ndarray, B_u: np.ndarray, B_w: Optional[np.ndarray] = None,
                 C: Optional[np.ndarray] = None) -> StageModel:
    """Eine lineare Stufe in Feedback-Darstellung."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(None, 'A', (n, n), A.shape)
    B_u = np.asarray(B_u, dtype=float).reshape(n, -1)
    m = B_u.shape[1]
    B_w = np.eye(n) if B_w is None else np.asarray(B_w, dtype=float).reshape(n, -1)
    C = np.eye(n) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
    q = C.shape[0]
    C_pinv = np.linalg.pinv(C)

    def basis(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.concatenate([z, u])

    def basis_jacobian(z: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.vstack([np.eye(q), np.zeros((m, q))])

    def reference(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return A @ x + B_u @ u

    return StageModel(
        M=np.hstack([A @ C_pinv, B_u]),
        C=C,
        B=B_w,
        basis=basis,
        basis_jacobian=basis_jacobian,
        sparsity=tuple((i,) for i in range(q)) + tuple(() for _ in range(m)),
        envelopes=tuple(identity_envelope_builder(i, m) for i in range(q))
        + tuple(control_envelope_builder(j, m) for j in range(m)),
        n_controls=m,
        reference=reference,
    )


def linear_model(A: np.ndarray, B_u: np.ndarray, B_w: Optional[np.ndarray] = None,
                 C: Optional[np.ndarray] = None, horizon: int = 10,
                 name: str = 'linear') -> FeedbackModel:
    """Zeitinvariantes lineares Modell über `horizon` Stufen."""
    return FeedbackModel(name=name, horizon=horizon, stages=(linear_stage(A, B_u, B_w, C),))


__all__ = ['linear_stage', 'linear_model']
