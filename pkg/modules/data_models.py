"""
Zentrale Datenmodelle und Type Definitions für das Robust-MPC-Toolkit.

Diese Datei definiert alle Datenstrukturen, die zwischen den Modulen ausgetauscht werden:
Nominalpunkte, Tubes, Solver-Ergebnisse, Zertifikate und Verifikationsberichte.
"""

from typing import Dict, List, Any, Optional, Tuple
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# === ENUMS ===
class SolveStatus(Enum):
    """Status eines einzelnen Conic-Solves."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"
    ITERATION_LIMIT = "iteration-limit"


class CertificateStatus(Enum):
    """Ergebnis der SCR-Schleife."""
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
    INFEASIBLE_AT_SEED = "infeasible-at-seed"
    SOLVER_FAILURE = "solver-failure"

    @property
    def certified(self) -> bool:
        return self in (CertificateStatus.CONVERGED, CertificateStatus.ITERATION_LIMIT,
                        CertificateStatus.SOLVER_FAILURE)


class MarginMode(Enum):
    """Welche Unsicherheitsblöcke bei der Margenmaximierung aktiv sind."""
    INIT = "init"
    DYNAMICS = "dyn"
    JOINT = "joint"

    @classmethod
    def parse(cls, value: str) -> 'MarginMode':
        aliases = {'init': cls.INIT, 'dyn': cls.DYNAMICS, 'dynamics': cls.DYNAMICS, 'joint': cls.JOINT}
        if value not in aliases:
            raise ValueError(f"Unknown margin mode '{value}' (expected init, dyn or joint)")
        return aliases[value]


# === TRAJEKTORIEN ===
@dataclass(frozen=True)
class NominalPoint:
    """
    Nominale Trajektorie (x^(0), u^(0), w^(0), z^(0)).

    Arrays sind stufenweise abgelegt: x und z mit N+1 Zeilen, u und w mit N Zeilen.
    Die gestapelten Vektoren des Fixpunkt-Formalismus liefern die *_flat Properties.
    """
    x: np.ndarray       # (N+1, n)
    u: np.ndarray       # (N, m)
    w_init: np.ndarray  # (n,)
    w: np.ndarray       # (N, r)
    z: np.ndarray       # (N+1, q), z_t = C_t x_t

    @property
    def horizon(self) -> int:
        return self.u.shape[0]

    @property
    def x_flat(self) -> np.ndarray:
        return self.x.reshape(-1)

    @property
    def u_flat(self) -> np.ndarray:
        return self.u.reshape(-1)

    @property
    def w_flat(self) -> np.ndarray:
        return np.concatenate([self.w_init, self.w.reshape(-1)])

    @property
    def z_flat(self) -> np.ndarray:
        return self.z.reshape(-1)


@dataclass(frozen=True)
class Tube:
    """Obere/untere Schranken (z^u, z^l) der Tube P(z~) pro Stufe."""
    z_upper: np.ndarray  # (N+1, q)
    z_lower: np.ndarray  # (N+1, q)

    def __post_init__(self):
        if self.z_upper.shape != self.z_lower.shape:
            raise ValueError(f"Tube bounds differ in shape: {self.z_upper.shape} vs {self.z_lower.shape}")

    def is_ordered(self, tol: float = 1e-7) -> bool:
        return bool(np.all(self.z_lower <= self.z_upper + tol))

    @property
    def z_tilde(self) -> np.ndarray:
        """Gestapelter Vektor [z^u; -z^l]."""
        return np.concatenate([self.z_upper.reshape(-1), -self.z_lower.reshape(-1)])

    @property
    def width(self) -> np.ndarray:
        return self.z_upper - self.z_lower

    def contains(self, z: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(z <= self.z_upper + tol) and np.all(z >= self.z_lower - tol))

    def excess(self, z: np.ndarray) -> float:
        """Größte Überschreitung einer Schranke (<= 0 falls enthalten)."""
        return float(max(np.max(z - self.z_upper), np.max(self.z_lower - z)))


# === SOLVER ===
@dataclass
class SolverStats:
    """Statistiken eines Conic-Solves."""
    backend: str
    solver: str
    iterations: Optional[int] = None
    wall_time: float = 0.0
    max_violation: Optional[float] = None
    raw_status: str = ""

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = {
            'backend': self.backend,
            'solver': self.solver,
            'iterations': self.iterations,
            'raw_status': self.raw_status,
        }
        if include_timing:
            data['wall_time'] = self.wall_time
        return data


@dataclass
class SolveOutcome:
    """Ergebnis eines Conic-Solves nach unabhängiger Nachprüfung."""
    status: SolveStatus
    primal: Optional[np.ndarray]
    objective: Optional[float]
    stats: SolverStats

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


# === ZERTIFIKATE ===
@dataclass
class CertifiedSolution:
    """Steuerfolge mit Tube-Zertifikat und Kostenschranke."""
    status: CertificateStatus
    u: Optional[np.ndarray]                  # (N, m)
    tube: Optional[Tube]
    gamma_init: float
    gamma_dyn: float
    cost_upper: Optional[float]
    nominal: Optional[NominalPoint]          # rollout(u, w^(0))
    anchor: Optional[NominalPoint]           # Nominalpunkt der letzten Restriktion
    iterations: int = 0
    objective_history: List[float] = field(default_factory=list)
    census: Dict[str, int] = field(default_factory=dict)
    solver_stats: List[SolverStats] = field(default_factory=list)
    nominal_cost: Optional[float] = None
    message: str = ""
    primal: Optional[np.ndarray] = field(default=None, repr=False)   # Primalpunkt des letzten Solves

    @property
    def certified(self) -> bool:
        return self.status.certified and self.tube is not None

    @property
    def gamma(self) -> float:
        return min(self.gamma_init, self.gamma_dyn)


@dataclass
class MarginResult:
    """Zertifizierte untere Schranke der Robustheitsmarge."""
    mode: MarginMode
    gamma: float
    status: SolveStatus
    tube: Optional[Tube] = None
    diagnostic: str = ""
    census: Dict[str, int] = field(default_factory=dict)
    solver_stats: Optional[SolverStats] = None


# === VERIFIKATION ===
@dataclass
class VerificationReport:
    """Monte-Carlo-Befund zu einem Zertifikat."""
    samples: int
    seed: int
    tube_exits: int = 0
    obstacle_hits: int = 0
    cost_violations: int = 0
    max_cost: float = float('-inf')
    cost_upper: Optional[float] = None
    worst_tube_excess: float = float('-inf')
    first_exit_stage: Optional[int] = None
    containment_tol: float = 0.0

    @property
    def violations(self) -> int:
        return self.tube_exits + self.obstacle_hits + self.cost_violations

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'samples': self.samples,
            'seed': self.seed,
            'tube_exits': self.tube_exits,
            'obstacle_hits': self.obstacle_hits,
            'cost_violations': self.cost_violations,
            'max_cost': self.max_cost,
            'cost_upper': self.cost_upper,
            'worst_tube_excess': self.worst_tube_excess,
            'first_exit_stage': self.first_exit_stage,
            'containment_tol': self.containment_tol,
            'passed': self.passed,
        }


# === RECEDING HORIZON ===
@dataclass
class CycleRecord:
    """Ein Replanning-Zyklus des Receding-Horizon-Laufs."""
    cycle: int
    start_step: int
    x_start: np.ndarray
    status: str
    applied_u: np.ndarray                 # (k, m)
    states: np.ndarray                    # (k+1, n) inkl. Startzustand
    cost_upper: Optional[float] = None
    iterations: int = 0
    used_fallback: bool = False
    tube: Optional[Tube] = None


@dataclass
class RunLog:
    """Protokoll eines Closed-Loop-Laufs."""
    total_steps: int
    replan_period: int
    seed: int
    cycles: List[CycleRecord] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    controls: List[np.ndarray] = field(default_factory=list)
    events: List[str] = field(default_factory=list)

    @property
    def state_array(self) -> np.ndarray:
        return np.array(self.states)

    @property
    def control_array(self) -> np.ndarray:
        return np.array(self.controls)

    @property
    def completed_steps(self) -> int:
        return len(self.controls)


__all__ = [
    'SolveStatus', 'CertificateStatus', 'MarginMode', 'NominalPoint', 'Tube',
    'SolverStats', 'SolveOutcome', 'CertifiedSolution', 'MarginResult',
    'VerificationReport', 'CycleRecord', 'RunLog'
]
