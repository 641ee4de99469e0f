"""
Solver-unabhängige Zwischendarstellung konvexer QCQPs.

Lineare Nebenbedingungen liegen als scipy.sparse-Blöcke vor, konvexe quadratische
Zeilen ½yᵀPy + aᵀy <= b über einer Indexauswahl y = v[idx]. canonicalize() stapelt
alles in ein ConicProgram mit fester Variablenreihenfolge und Namensliste.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from config import SOLVER_CONFIG
from ..exceptions import DimensionError, NonPSDError


@dataclass(frozen=True, eq=False)
class QuadraticRow:
    """½ yᵀ P y + aᵀ y <= b mit y = v[idx]."""
    name: str
    idx: np.ndarray
    P: np.ndarray
    a: np.ndarray
    b: float
    category: str = 'envelope'

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=int).reshape(-1)
        object.__setattr__(self, 'idx', idx)
        object.__setattr__(self, 'P', np.asarray(self.P, dtype=float).reshape(idx.shape[0], idx.shape[0]))
        object.__setattr__(self, 'a', np.asarray(self.a, dtype=float).reshape(idx.shape[0]))
        object.__setattr__(self, 'b', float(self.b))

    def terms(self, v: np.ndarray) -> Tuple[float, float]:
        """(quadratischer Anteil, linearer Anteil) an der Stelle v."""
        y = np.asarray(v, dtype=float)[self.idx]
        return 0.5 * float(y @ self.P @ y), float(self.a @ y)

    def value(self, v: np.ndarray) -> float:
        quad, lin = self.terms(v)
        return quad + lin

    def normalized_violation(self, v: np.ndarray) -> float:
        quad, lin = self.terms(v)
        y = np.asarray(v, dtype=float)[self.idx]
        scale = 1.0 + abs(self.b) + abs(quad) + float(np.abs(self.a) @ np.abs(y))
        return (quad + lin - self.b) / scale

    @property
    def is_linear(self) -> bool:
        return not np.any(self.P)


@dataclass(eq=False)
class LinearBlock:
    """Block A v <= b (bzw. = b) mit gemeinsamer Kategorie."""
    name: str
    A: sp.csr_matrix
    b: np.ndarray
    category: str
    equality: bool = False

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise DimensionError(None, f'{self.name}.b', self.A.shape[0], self.b.shape[0])

    @property
    def rows(self) -> int:
        return self.A.shape[0]


def _empty_rows(n_var: int) -> sp.csr_matrix:
    return sp.csr_matrix((0, n_var))


@dataclass(eq=False)
class ConicProgram:
    """
    Konvexes QCQP in Standardform.

    min/max  ½ vᵀP₀v + cᵀv
    s.t.     A_in v <= b_in,  A_eq v = b_eq,
             ½ v[idx]ᵀ P v[idx] + aᵀ v[idx] <= b   (je quadratische Zeile),
             lower <= v <= upper
    """
    n_var: int
    A_in: sp.csr_matrix
    b_in: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    quadratics: List[QuadraticRow]
    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = 'minimize'
    objective_P: Optional[sp.csr_matrix] = None
    var_names: List[str] = field(default_factory=list)
    in_names: List[str] = field(default_factory=list)
    census: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> 'ConicProgram':
        return cls(0, _empty_rows(0), np.zeros(0), _empty_rows(0), np.zeros(0), [], np.zeros(0),
                   np.zeros(0), np.zeros(0))

    # === ZÄHLER ===
    @property
    def n_in(self) -> int:
        return self.A_in.shape[0]

    @property
    def n_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_quad(self) -> int:
        return len(self.quadratics)

    @property
    def n_constraints(self) -> int:
        return self.n_in + self.n_eq + self.n_quad

    def variable_map(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.var_names)}

    # === PRÜFUNG ===
    def validate(self) -> None:
        """Dimensionen, Endlichkeit und PSD-Eigenschaft aller Daten."""
        n = self.n_var
        if self.A_in.shape[1] != n or self.A_eq.shape[1] != n:
            raise DimensionError(None, 'A', n, (self.A_in.shape[1], self.A_eq.shape[1]))
        for name, arr in (('b_in', self.b_in), ('b_eq', self.b_eq), ('objective', self.objective)):
            if not np.all(np.isfinite(arr)):
                raise NonPSDError(f'non-finite {name}', float('nan'))
        if self.objective.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise DimensionError(None, 'objective/bounds', n, (self.objective.shape, self.lower.shape))
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise DimensionError(None, f'bounds of {self._name(bad)}', 'lower <= upper',
                                 (self.lower[bad], self.upper[bad]))
        tol = SOLVER_CONFIG['psd_tol']
        for row in self.quadratics:
            if row.idx.size and (row.idx.min() < 0 or row.idx.max() >= n):
                raise DimensionError(None, row.name, f"indices in 0..{n - 1}", (row.idx.min(), row.idx.max()))
            _check_row_psd(row, tol)
        if self.objective_P is not None and self.objective_P.nnz:
            smallest = float(np.linalg.eigvalsh(self.objective_P.toarray()).min())
            if smallest < -tol:
                raise NonPSDError('objective', smallest)

    def _name(self, i: int) -> str:
        return self.var_names[i] if i < len(self.var_names) else f'v[{i}]'

    def evaluate_objective(self, v: np.ndarray) -> float:
        value = float(self.objective @ v)
        if self.objective_P is not None:
            value += 0.5 * float(v @ (self.objective_P @ v))
        return value

    def max_violation(self, v: np.ndarray) -> Tuple[float, str]:
        """
        Größte normierte Verletzung aller Nebenbedingungen an der Stelle v.

        Jede Zeile wird durch 1 + |rechte Seite| + Summe der Beträge ihrer Terme geteilt.
        """
        v = np.asarray(v, dtype=float).reshape(-1)
        worst, where = 0.0, ''
        if self.n_in:
            lhs = self.A_in @ v
            scale = 1.0 + np.abs(self.b_in) + abs(self.A_in) @ np.abs(v)
            viol = (lhs - self.b_in) / scale
            i = int(np.argmax(viol))
            if viol[i] > worst:
                worst, where = float(viol[i]), self.in_names[i] if i < len(self.in_names) else f'in[{i}]'
        if self.n_eq:
            lhs = self.A_eq @ v
            scale = 1.0 + np.abs(self.b_eq) + abs(self.A_eq) @ np.abs(v)
            viol = np.abs(lhs - self.b_eq) / scale
            i = int(np.argmax(viol))
            if viol[i] > worst:
                worst, where = float(viol[i]), f'eq[{i}]'
        for row in self.quadratics:
            viol = row.normalized_violation(v)
            if viol > worst:
                worst, where = viol, row.name
        if self.n_var:
            below = (self.lower - v) / (1.0 + np.abs(np.where(np.isfinite(self.lower), self.lower, 0.0)))
            above = (v - self.upper) / (1.0 + np.abs(np.where(np.isfinite(self.upper), self.upper, 0.0)))
            bound_viol = np.maximum(below, above)
            i = int(np.argmax(bound_viol))
            if bound_viol[i] > worst:
                worst, where = float(bound_viol[i]), f'bound {self._name(i)}'
        return worst, where

    def quadratic_factors(self) -> Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix, np.ndarray]:
        """
        Faktorisierte Form aller quadratischen Zeilen: ½ S (F v)² + A_q v <= b_q.

        F stapelt die Zeilen √λ·Vᵀ der Eigenzerlegung jedes P (nur λ > psd_tol),
        S summiert die Quadrate zeilenweise.
        """
        tol = SOLVER_CONFIG['psd_tol']
        n = self.n_var
        f_rows, f_cols, f_vals = [], [], []
        s_rows, s_cols = [], []
        a_rows, a_cols, a_vals = [], [], []
        b_q = np.zeros(self.n_quad)
        offset = 0
        for i, row in enumerate(self.quadratics):
            values, vectors = np.linalg.eigh(0.5 * (row.P + row.P.T))
            for lam, vec in zip(values, vectors.T):
                if lam <= tol:
                    continue
                weights = np.sqrt(lam) * vec
                nz = np.flatnonzero(weights)
                f_rows.extend([offset] * nz.size)
                f_cols.extend(row.idx[nz].tolist())
                f_vals.extend(weights[nz].tolist())
                s_rows.append(i)
                s_cols.append(offset)
                offset += 1
            nz = np.flatnonzero(row.a)
            a_rows.extend([i] * nz.size)
            a_cols.extend(row.idx[nz].tolist())
            a_vals.extend(row.a[nz].tolist())
            b_q[i] = row.b

        F = sp.csr_matrix((f_vals, (f_rows, f_cols)), shape=(offset, n))
        S = sp.csr_matrix((np.ones(len(s_rows)), (s_rows, s_cols)), shape=(self.n_quad, offset))
        A_q = sp.csr_matrix((a_vals, (a_rows, a_cols)), shape=(self.n_quad, n))
        return F, S, A_q, b_q


def _check_row_psd(row: QuadraticRow, tol: float) -> None:
    if not (np.all(np.isfinite(row.P)) and np.all(np.isfinite(row.a)) and np.isfinite(row.b)):
        raise NonPSDError(f"{row.name} (non-finite data)", float('nan'))
    if row.P.size:
        smallest = float(np.linalg.eigvalsh(0.5 * (row.P + row.P.T)).min())
        if smallest < -tol:
            raise NonPSDError(row.name, smallest)


def _row_to_linear(row: QuadraticRow, n_var: int) -> sp.csr_matrix:
    return sp.csr_matrix((row.a, (np.zeros(row.idx.shape[0], dtype=int), row.idx)), shape=(1, n_var))


def canonicalize(restriction: Optional[Any]) -> ConicProgram:
    """
    Überführt eine aufgebaute Restriktion in ein ConicProgram.

    Erwartet ein Objekt mit n_var, var_names, linear_blocks, quadratic_rows, lower,
    upper, objective, sense und census. Quadratische Zeilen ohne Krümmung werden zu
    linearen Zeilen. None oder eine Restriktion ohne Variablen ergibt das leere Programm.

    Raises:
        NonPSDError: quadratische Zeile mit negativem Eigenwert (Name der Zeile)
    """
    if restriction is None or restriction.n_var == 0:
        return ConicProgram.empty()

    n = restriction.n_var
    tol = SOLVER_CONFIG['psd_tol']

    in_blocks: List[sp.csr_matrix] = []
    in_rhs: List[np.ndarray] = []
    in_names: List[str] = []
    eq_blocks: List[sp.csr_matrix] = []
    eq_rhs: List[np.ndarray] = []

    for block in restriction.linear_blocks:
        if block.A.shape[1] != n:
            raise DimensionError(None, block.name, n, block.A.shape[1])
        if block.equality:
            eq_blocks.append(block.A)
            eq_rhs.append(block.b)
        else:
            in_blocks.append(block.A)
            in_rhs.append(block.b)
            in_names.extend(f'{block.name}[{i}]' for i in range(block.rows))

    quadratics: List[QuadraticRow] = []
    for row in restriction.quadratic_rows:
        _check_row_psd(row, tol)
        if row.is_linear:
            in_blocks.append(_row_to_linear(row, n))
            in_rhs.append(np.array([row.b]))
            in_names.append(row.name)
        else:
            quadratics.append(row)

    A_in = sp.vstack(in_blocks, format='csr') if in_blocks else _empty_rows(n)
    A_eq = sp.vstack(eq_blocks, format='csr') if eq_blocks else _empty_rows(n)
    program = ConicProgram(
        n_var=n,
        A_in=A_in,
        b_in=np.concatenate(in_rhs) if in_rhs else np.zeros(0),
        A_eq=A_eq,
        b_eq=np.concatenate(eq_rhs) if eq_rhs else np.zeros(0),
        quadratics=quadratics,
        objective=np.asarray(restriction.objective, dtype=float),
        lower=np.asarray(restriction.lower, dtype=float),
        upper=np.asarray(restriction.upper, dtype=float),
        sense=restriction.sense,
        var_names=list(restriction.var_names),
        in_names=in_names,
        census=dict(restriction.census),
    )
    program.validate()
    return program


def program_from_arrays(objective: Sequence[float], A_in=None, b_in=None, lower=None, upper=None,
                        sense: str = 'minimize', quadratics: Optional[List[QuadraticRow]] = None,
                        A_eq=None, b_eq=None) -> ConicProgram:
    """Kleines Programm direkt aus Arrays (Tests und Hilfsprobleme)."""
    c = np.asarray(objective, dtype=float).reshape(-1)
    n = c.shape[0]
    program = ConicProgram(
        n_var=n,
        A_in=sp.csr_matrix(A_in) if A_in is not None else _empty_rows(n),
        b_in=np.asarray(b_in, dtype=float).reshape(-1) if b_in is not None else np.zeros(0),
        A_eq=sp.csr_matrix(A_eq) if A_eq is not None else _empty_rows(n),
        b_eq=np.asarray(b_eq, dtype=float).reshape(-1) if b_eq is not None else np.zeros(0),
        quadratics=list(quadratics or []),
        objective=c,
        lower=np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float),
        upper=np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float),
        sense=sense,
        var_names=[f'v[{i}]' for i in range(n)],
    )
    program.in_names = [f'in[{i}]' for i in range(program.n_in)]
    program.validate()
    return program


__all__ = ['QuadraticRow', 'LinearBlock', 'ConicProgram', 'canonicalize', 'program_from_arrays']
