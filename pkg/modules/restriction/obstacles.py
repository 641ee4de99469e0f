"""
Konvexe Hindernisse und ihre Projektion.

Jedes Hindernis lebt in einem Unterraum des Zustands (coords, z.B. die Positionen
x1, x2 des Fahrzeugs). Die Projektion ersetzt nur diese Koordinaten; die übrigen
bleiben unverändert, sodass b - x^(0) außerhalb von coords null ist.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ..exceptions import ObstacleError
from ..utils.logger import logger


class Obstacle(ABC):
    """Basisklasse: abgeschlossene konvexe Menge über den Koordinaten `coords`."""

    coords: Tuple[int, ...]
    label: str

    @abstractmethod
    def project_local(self, point: np.ndarray) -> np.ndarray:
        """Projektion eines Punkts im Unterraum (len(coords),) auf das Hindernis."""

    @abstractmethod
    def contains_local(self, point: np.ndarray, tol: float = 0.0) -> bool:
        """Liegt der Punkt im Hindernis (mit Toleranz nach außen)?"""

    @abstractmethod
    def to_dict(self) -> Dict:
        """Szenario-Darstellung."""

    def _local(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if max(self.coords) >= x.shape[0]:
            raise ObstacleError(f"Obstacle '{self.label}' uses coordinate {max(self.coords)}, state has {x.shape[0]}")
        return x[list(self.coords)]

    def project(self, x: np.ndarray) -> np.ndarray:
        """Nächster Punkt des Hindernisses im vollen Zustandsraum."""
        b = np.asarray(x, dtype=float).reshape(-1).copy()
        b[list(self.coords)] = self.project_local(self._local(x))
        return b

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return self.contains_local(self._local(x), tol)

    def distance(self, x: np.ndarray) -> float:
        local = self._local(x)
        return float(np.linalg.norm(local - self.project_local(local)))


@dataclass(frozen=True, eq=False)
class BoxObstacle(Obstacle):
    """Achsenparallele Box lower <= x[coords] <= upper; ±inf erlaubt (Halbräume, Streifen)."""
    lower: np.ndarray
    upper: np.ndarray
    coords: Tuple[int, ...] = (0, 1)
    label: str = field(default='box', compare=False)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'coords', tuple(int(c) for c in self.coords))
        if lower.shape != upper.shape or lower.shape[0] != len(self.coords):
            raise ObstacleError(f"Box '{self.label}': bounds must have {len(self.coords)} entries")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)) or np.any(lower > upper):
            raise ObstacleError(f"Box '{self.label}' is empty (lower > upper)")

    def project_local(self, point: np.ndarray) -> np.ndarray:
        return np.clip(point, self.lower, self.upper)

    def contains_local(self, point: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def to_dict(self) -> Dict:
        def _bound(values: np.ndarray) -> List[Optional[float]]:
            return [None if not np.isfinite(v) else float(v) for v in values]
        return {'type': 'box', 'coords': list(self.coords), 'lower': _bound(self.lower),
                'upper': _bound(self.upper)}


@dataclass(frozen=True, eq=False)
class BallObstacle(Obstacle):
    """Kugel ‖x[coords] - center‖ <= radius."""
    center: np.ndarray
    radius: float
    coords: Tuple[int, ...] = (0, 1)
    label: str = field(default='ball', compare=False)

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        object.__setattr__(self, 'center', center)
        object.__setattr__(self, 'coords', tuple(int(c) for c in self.coords))
        if center.shape[0] != len(self.coords):
            raise ObstacleError(f"Ball '{self.label}': center must have {len(self.coords)} entries")
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ObstacleError(f"Ball '{self.label}': radius must be finite and >= 0 (got {self.radius})")

    def project_local(self, point: np.ndarray) -> np.ndarray:
        offset = point - self.center
        dist = float(np.linalg.norm(offset))
        if dist <= self.radius:
            return point.copy()
        return self.center + offset * (self.radius / dist)

    def contains_local(self, point: np.ndarray, tol: float = 0.0) -> bool:
        return float(np.linalg.norm(point - self.center)) <= self.radius + tol

    def to_dict(self) -> Dict:
        return {'type': 'ball', 'coords': list(self.coords), 'center': self.center.tolist(),
                'radius': float(self.radius)}


@dataclass(frozen=True, eq=False)
class PolytopeObstacle(Obstacle):
    """
    Polytop {x : A x[coords] <= b}.

    Leere Polytope werden beim Anlegen per LP erkannt; die Projektion ist ein
    kleines QP über cvxpy.
    """
    A: np.ndarray
    b: np.ndarray
    coords: Tuple[int, ...] = (0, 1)
    label: str = field(default='polytope', compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'coords', tuple(int(c) for c in self.coords))
        if A.shape != (b.shape[0], len(self.coords)):
            raise ObstacleError(f"Polytope '{self.label}': A must be {b.shape[0]}x{len(self.coords)}, got {A.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ObstacleError(f"Polytope '{self.label}' has non-finite data")

        check = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=b, bounds=[(None, None)] * A.shape[1],
                        method='highs')
        if check.status == 2:
            raise ObstacleError(f"Polytope '{self.label}' is empty (infeasible inequalities)")

    def project_local(self, point: np.ndarray) -> np.ndarray:
        if self.contains_local(point):
            return point.copy()
        try:
            import cvxpy as cp
        except ImportError as e:
            raise ObstacleError(f"Polytope projection needs cvxpy: {e}") from e

        y = cp.Variable(point.shape[0])
        problem = cp.Problem(cp.Minimize(0.5 * cp.sum_squares(y - point)), [self.A @ y <= self.b])
        problem.solve()
        if y.value is None or problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise ObstacleError(f"Projection onto polytope '{self.label}' failed ({problem.status})")
        return np.asarray(y.value, dtype=float)

    def contains_local(self, point: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(self.A @ point <= self.b + tol))

    def to_dict(self) -> Dict:
        return {'type': 'polytope', 'coords': list(self.coords), 'A': self.A.tolist(), 'b': self.b.tolist()}


def project_to_obstacle(point: np.ndarray, obstacle: Obstacle) -> np.ndarray:
    """argmin_{y in Hindernis} ½‖y - point‖² im vollen Zustandsraum."""
    return obstacle.project(point)


def obstacle_from_dict(data: Dict, label: str = '') -> Obstacle:
    """Erzeugt ein Hindernis aus der Szenario-Darstellung."""
    kind = data.get('type')
    coords = tuple(data.get('coords', (0, 1)))
    label = label or str(kind)
    if kind == 'box':
        def _bound(values, default):
            return np.array([default if v is None else float(v) for v in values])
        return BoxObstacle(_bound(data['lower'], -np.inf), _bound(data['upper'], np.inf), coords, label)
    if kind == 'ball':
        return BallObstacle(np.asarray(data['center'], dtype=float), float(data['radius']), coords, label)
    if kind == 'polytope':
        return PolytopeObstacle(np.asarray(data['A'], dtype=float), np.asarray(data['b'], dtype=float),
                                coords, label)
    raise ObstacleError(f"Unknown obstacle type '{kind}' (expected box, ball or polytope)")


@dataclass(frozen=True)
class ObstacleSet:
    """
    Hindernisse pro Stufe.

    `static` gilt für alle Stufen, `per_stage` ergänzt einzelne Stufen.
    """
    static: Tuple[Obstacle, ...] = ()
    per_stage: Dict[int, Tuple[Obstacle, ...]] = field(default_factory=dict)

    def at(self, t: int) -> Tuple[Obstacle, ...]:
        return tuple(self.static) + tuple(self.per_stage.get(t, ()))

    def count(self, t: int) -> int:
        return len(self.at(t))

    def total(self, stages: Sequence[int]) -> int:
        return sum(self.count(t) for t in stages)

    @property
    def is_empty(self) -> bool:
        return not self.static and not any(self.per_stage.values())

    def first_hit(self, states: np.ndarray, stages: Sequence[int], tol: float = 0.0) -> Optional[Tuple[int, int]]:
        """(Stufe, Hindernis) der ersten Kollision einer Zustandsfolge, sonst None."""
        for t in stages:
            for i, obstacle in enumerate(self.at(t)):
                if obstacle.contains(states[t], tol):
                    return t, i
        return None

    def min_distance(self, states: np.ndarray, stages: Sequence[int]) -> float:
        distances = [obstacle.distance(states[t]) for t in stages for obstacle in self.at(t)]
        if not distances:
            return float('inf')
        worst = min(distances)
        logger.debug(f"Minimum obstacle distance over {len(stages)} stages: {worst:.4g}")
        return worst


__all__ = [
    'Obstacle', 'BoxObstacle', 'BallObstacle', 'PolytopeObstacle', 'ObstacleSet',
    'project_to_obstacle', 'obstacle_from_dict'
]
