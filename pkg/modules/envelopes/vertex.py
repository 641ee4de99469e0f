"""
Vertex-Enumeration der Envelope-Schranken über die Tube.

Das Maximum einer konvexen Oberschranke über der Box [z^l, z^u] wird in einer Ecke
angenommen (analog das Minimum der konkaven Unterschranke). Für jede Ecke entsteht
eine konvexe Ungleichung in den Entscheidungsvariablen.
"""

import itertools
from typing import Any, List, Optional, Sequence, Tuple
from dataclasses import dataclass

import numpy as np

from config import ENVELOPE_CONFIG
from ..exceptions import EnvelopeError, SparsityCapError
from .quadratic import QuadraticEnvelope, QuadraticForm


@dataclass(frozen=True)
class TubeSlots:
    """
    Platzhalter einer Stufe: beliebige indizierbare Einträge für z^u, z^l, u und g^u_P, g^l_P.

    Beim Aufbau der Restriktion sind das Variablenindizes, in Tests Zahlenwerte.
    """
    z_upper: Sequence[Any]
    z_lower: Sequence[Any]
    u: Sequence[Any]
    g_upper: Any
    g_lower: Any


@dataclass(frozen=True)
class VertexBound:
    """Eine Ungleichung g^u_P >= upper(Ecke, u) bzw. g^l_P <= lower(Ecke, u)."""
    side: str                       # 'upper' oder 'lower'
    selection: Tuple[bool, ...]     # True = z^u, False = z^l, je Eintrag in envelope.indices
    z_slots: Tuple[Any, ...]
    u_slots: Tuple[Any, ...]
    g_slot: Any
    envelope: QuadraticEnvelope

    @property
    def form(self) -> QuadraticForm:
        return self.envelope.upper if self.side == 'upper' else self.envelope.lower

    def envelope_value(self, z_values: np.ndarray, u_values: np.ndarray) -> float:
        """Wert der Schranke in der gewählten Ecke (Zahlenwerte der Slots)."""
        y = np.concatenate([np.asarray(z_values, dtype=float), np.asarray(u_values, dtype=float)])
        return float(self.form(y - self.envelope.anchor))

    def is_satisfied(self, z_values: np.ndarray, u_values: np.ndarray, g_value: float,
                     tol: float = 0.0) -> bool:
        bound = self.envelope_value(z_values, u_values)
        if self.side == 'upper':
            return g_value >= bound - tol
        return g_value <= bound + tol

    def expanded(self) -> Tuple[np.ndarray, np.ndarray, float]:
        """
        Ungleichung in der Form ½ vᵀPv + aᵀv <= b mit v = (z_slots, u_slots, g_slot).

        Returns:
            (P, a, b) über die lokalen Koordinaten plus g als letzte Koordinate
        """
        form, y0 = self.form, self.envelope.anchor
        dim = y0.shape[0]
        const = form.c - float(form.a @ y0) + 0.5 * float(y0 @ form.H @ y0)
        lin = form.a - form.H @ y0

        P = np.zeros((dim + 1, dim + 1))
        a = np.zeros(dim + 1)
        if self.side == 'upper':
            # upper(y) - g <= 0
            P[:dim, :dim] = form.H
            a[:dim] = lin
            a[dim] = -1.0
            b = -const
        else:
            # g - lower(y) <= 0
            P[:dim, :dim] = -form.H
            a[:dim] = -lin
            a[dim] = 1.0
            b = const
        return P, a, b

    @property
    def slots(self) -> Tuple[Any, ...]:
        return tuple(self.z_slots) + tuple(self.u_slots) + (self.g_slot,)


def vertex_bound_constraints(envelope: QuadraticEnvelope, sparsity_set: Sequence[int],
                             tube_slice: TubeSlots, cap: Optional[int] = None) -> List[VertexBound]:
    """
    Erzeugt die Ecken-Ungleichungen einer Residualkomponente.

    Enumeriert wird nur über die Koordinaten, von denen das Envelope tatsächlich abhängt;
    die Anzahl ist damit höchstens 2^(|I_k|+1). Konstante Residuen liefern genau ein Paar.

    Args:
        envelope: Envelope der Residualkomponente, verankert am aktuellen Nominalpunkt
        sparsity_set: I_k, muss mit envelope.indices übereinstimmen
        tube_slice: Slots der Stufe (z^u, z^l über alle q Koordinaten, u, g^u_P, g^l_P)
        cap: Obergrenze für |I_k| (Standard aus ENVELOPE_CONFIG)

    Returns:
        Liste von VertexBound (erst alle Ober-, dann alle Unterschranken)
    """
    cap = ENVELOPE_CONFIG['max_sparsity'] if cap is None else cap
    sparsity_set = tuple(int(i) for i in sparsity_set)

    if len(sparsity_set) > cap:
        raise SparsityCapError(len(sparsity_set), cap)
    if sparsity_set != envelope.indices:
        raise EnvelopeError(
            f"Envelope '{envelope.label}' is defined over {envelope.indices}, sparsity set is {sparsity_set}"
        )

    active = envelope.z_dependence()
    u_slots = tuple(tube_slice.u)
    bounds: List[VertexBound] = []

    for side in ('upper', 'lower'):
        g_slot = tube_slice.g_upper if side == 'upper' else tube_slice.g_lower
        for choice in itertools.product((True, False), repeat=len(active)):
            selection = [True] * len(sparsity_set)
            for pos, pick_upper in zip(active, choice):
                selection[pos] = pick_upper
            z_slots = tuple(
                tube_slice.z_upper[idx] if pick else tube_slice.z_lower[idx]
                for idx, pick in zip(sparsity_set, selection)
            )
            bounds.append(VertexBound(side, tuple(selection), z_slots, u_slots, g_slot, envelope))

    return bounds


def vertex_extremes(envelope: QuadraticEnvelope, z_upper: np.ndarray, z_lower: np.ndarray,
                    u: np.ndarray) -> Tuple[float, float]:
    """Max der Ober- und Min der Unterschranke über alle Ecken (Brute Force, für Prüfungen)."""
    uppers, lowers = [], []
    for choice in itertools.product((True, False), repeat=len(envelope.indices)):
        z_sub = np.array([z_upper[i] if pick else z_lower[i] for i, pick in zip(envelope.indices, choice)])
        uppers.append(envelope.evaluate_upper(z_sub, u))
        lowers.append(envelope.evaluate_lower(z_sub, u))
    return max(uppers), min(lowers)


__all__ = ['TubeSlots', 'VertexBound', 'vertex_bound_constraints', 'vertex_extremes']
