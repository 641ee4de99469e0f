"""
Halbraum-Restriktion der Hindernisvermeidung.

Für den Projektionspunkt b des nominalen Zustands x^(0) auf ein konvexes Hindernis
gilt (x^(0) - b)ᵀ(y - b) <= 0 für alle y im Hindernis. Jeder Zustand mit
(b - x^(0))ᵀ(x - b) < 0 liegt daher außerhalb. In z = C x:
L = (b - x^(0))ᵀ C^+,  d = (x^(0) - b)ᵀ b.
"""

from typing import Callable, Dict, List, Optional, Sequence, Union
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NominalInObstacleError
from ..utils.logger import logger
from .obstacles import ObstacleSet

# Abstand, ab dem der Nominalzustand als auf dem Rand liegend gilt
BOUNDARY_TOL = 1e-12


@dataclass(eq=False)
class SafetyRestriction:
    """L_t, d_t und die Projektionspunkte b je Stufe (nur Stufen mit Hindernissen)."""
    L: Dict[int, np.ndarray] = field(default_factory=dict)          # t -> (s_t, q)
    d: Dict[int, np.ndarray] = field(default_factory=dict)          # t -> (s_t,)
    witnesses: Dict[int, np.ndarray] = field(default_factory=dict)  # t -> (s_t, n)

    @property
    def stages(self) -> List[int]:
        return sorted(self.L)

    @property
    def rows(self) -> int:
        return sum(block.shape[0] for block in self.L.values())

    def margin(self, t: int, z: np.ndarray) -> np.ndarray:
        """L_t z + d_t (negativ = sicher)."""
        return self.L[t] @ np.asarray(z, dtype=float) + self.d[t]


def safety_halfspaces(x_nominal: np.ndarray, obstacles: ObstacleSet,
                      C_pinv: Union[np.ndarray, Callable[[int], np.ndarray]],
                      stages: Optional[Sequence[int]] = None) -> SafetyRestriction:
    """
    Halbräume aus der Projektion der nominalen Zustände auf alle Hindernisse.

    Args:
        x_nominal: nominale Zustände (N+1, n)
        obstacles: Hindernisse pro Stufe
        C_pinv: C^+ (konstant) oder t -> C_t^+
        stages: Stufen mit Sicherheitsbedingung (Standard 1..N)

    Raises:
        NominalInObstacleError: Nominalzustand im Hindernis oder auf dem Rand
    """
    pinv = C_pinv if callable(C_pinv) else (lambda t: C_pinv)
    stages = range(1, x_nominal.shape[0]) if stages is None else stages
    restriction = SafetyRestriction()
    for t in stages:
        rows_L, rows_d, rows_b = [], [], []
        for i, obstacle in enumerate(obstacles.at(t)):
            x0 = x_nominal[t]
            b = obstacle.project(x0)
            distance = float(np.linalg.norm(b - x0))
            if distance <= BOUNDARY_TOL or obstacle.contains(x0):
                raise NominalInObstacleError(t, i, distance)
            rows_L.append((b - x0) @ pinv(t))
            rows_d.append(float((x0 - b) @ b))
            rows_b.append(b)
        if rows_L:
            restriction.L[t] = np.array(rows_L)
            restriction.d[t] = np.array(rows_d)
            restriction.witnesses[t] = np.array(rows_b)

    logger.debug(f"Safety restriction: {restriction.rows} half-spaces over {len(restriction.stages)} stages")
    return restriction


__all__ = ['SafetyRestriction', 'safety_halfspaces', 'BOUNDARY_TOL']
