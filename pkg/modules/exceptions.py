"""
Fehlerhierarchie des Toolkits.

Jede Exception trägt einen Exit-Code, den die CLI direkt zurückgibt:
2 = unzulässig, 3 = Solver/Backend-Fehler, 4 = Eingabefehler.
"""

from typing import Any, Optional


class SCRError(Exception):
    """Basisklasse aller Fehler des Toolkits."""
    exit_code = 1


# === EINGABEFEHLER (Exit 4) ===
class InputError(SCRError):
    exit_code = 4


class DimensionError(InputError):
    """Dimensionsfehler mit Angabe von Stufe und Feld."""

    def __init__(self, stage: Optional[int], field: str, expected: Any, got: Any):
        self.stage = stage
        self.field = field
        self.expected = expected
        self.got = got
        where = f"stage {stage}" if stage is not None else "model"
        super().__init__(f"Dimension mismatch at {where}, field '{field}': expected {expected}, got {got}")


class ModelError(InputError):
    pass


class NominalNotRegisteredError(ModelError):
    def __init__(self, operation: str):
        super().__init__(f"{operation} requires a registered nominal point (use model.with_nominal)")


class NonFiniteStateError(InputError):
    def __init__(self, stage: int):
        self.stage = stage
        super().__init__(f"Non-finite state encountered at stage {stage}")


class EnvelopeError(InputError):
    pass


class SparsityCapError(EnvelopeError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(
            f"Sparsity set of size {size} exceeds cap {cap}: "
            f"split the basis function into components depending on fewer coordinates"
        )


class ObstacleError(InputError):
    pass


class NonPSDError(InputError):
    def __init__(self, source: str, min_eigenvalue: float):
        self.source = source
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"Matrix from '{source}' is not PSD (min eigenvalue {min_eigenvalue:.3e})")


class ScenarioError(InputError):
    """Schema-Verletzung mit Feldpfad und, wenn bekannt, Zeilennummer."""

    def __init__(self, path: str, field: str, message: str, line: Optional[int] = None):
        self.path = path
        self.field = field
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: field '{field}': {message}")


class OutputError(InputError):
    """Ergebnisdatei kann nicht geschrieben werden."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"Cannot write {path}: {reason}")


# === UNZULÄSSIGKEIT (Exit 2) ===
class InfeasibilityError(SCRError):
    exit_code = 2


class NominalInObstacleError(InfeasibilityError):
    def __init__(self, stage: int, obstacle: int, distance: float):
        self.stage = stage
        self.obstacle = obstacle
        self.distance = distance
        super().__init__(
            f"Nominal state at stage {stage} lies inside or on obstacle {obstacle} "
            f"(distance {distance:.3e}); the safety restriction is empty"
        )


class SeedInfeasibleError(InfeasibilityError):
    def __init__(self, detail: str):
        super().__init__(f"Initial control seed is not usable: {detail}. Supply a seed whose nominal rollout avoids all obstacles")


class RestrictionInfeasibleError(InfeasibilityError):
    """Die Restriktion ist bereits am Startpunkt unzulässig."""

    def __init__(self, detail: str):
        super().__init__(f"Convex restriction is infeasible: {detail}")


# === SOLVER-FEHLER (Exit 3) ===
class SolverFailureError(SCRError):
    exit_code = 3


class BackendUnavailableError(SolverFailureError):
    def __init__(self, backend: str, reason: str = ""):
        self.backend = backend
        super().__init__(f"Solver backend '{backend}' is not available{': ' + reason if reason else ''}")


class NumericalFailureError(SolverFailureError):
    """Der Solver meldet optimal, die unabhängige Nachprüfung scheitert."""

    def __init__(self, violation: float, row: str = ""):
        self.violation = violation
        self.row = row
        super().__init__(f"Solver point violates constraint '{row or '?'}' by {violation:.3e} after re-check")


__all__ = [
    'SCRError', 'InputError', 'DimensionError', 'ModelError', 'NominalNotRegisteredError',
    'NonFiniteStateError', 'EnvelopeError', 'SparsityCapError', 'ObstacleError', 'NonPSDError',
    'ScenarioError', 'OutputError', 'InfeasibilityError', 'NominalInObstacleError', 'SeedInfeasibleError',
    'RestrictionInfeasibleError', 'SolverFailureError', 'BackendUnavailableError',
    'NumericalFailureError'
]
