"""
Randomisierte Soundness-Prüfung von Envelopes.

Sucht Punkte, an denen lower(y) <= g(y) <= upper(y) verletzt ist. Verletzungen sind
Befunde, keine Fehler: der Bericht enthält die größte gefundene Verletzung.
"""

from typing import Callable, Optional, Tuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import itertools

import numpy as np

from config import ENVELOPE_CONFIG
from ..exceptions import EnvelopeError
from .quadratic import QuadraticEnvelope

# Vektorisierte Referenzfunktion: (S, d) lokale Punkte -> (S,) Werte
BatchFunction = Callable[[np.ndarray], np.ndarray]


@dataclass
class FalsificationReport:
    """Ergebnis einer Falsifikation."""
    worst_violation: float
    worst_point: np.ndarray
    side: str
    samples: int
    seed: int

    def is_sound(self, tol: Optional[float] = None) -> bool:
        tol = ENVELOPE_CONFIG['soundness_tol'] if tol is None else tol
        return self.worst_violation <= tol


def default_domain_box(envelope: QuadraticEnvelope, lower: np.ndarray, upper: np.ndarray,
                       inflation: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Testbereich: die Box [lower, upper] (lokale Koordinaten) um den Faktor inflation aufgeweitet."""
    inflation = ENVELOPE_CONFIG['falsify_inflation'] if inflation is None else inflation
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != (envelope.dim,) or upper.shape != (envelope.dim,):
        raise EnvelopeError(f"Domain box must have {envelope.dim} coordinates")
    half = 0.5 * (upper - lower) * (1.0 + inflation)
    center = 0.5 * (upper + lower)
    return center - half, center + half


def _violations(envelope: QuadraticEnvelope, true_fn: BatchFunction,
                points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values = np.asarray(true_fn(points), dtype=float)
    return values - envelope.upper_at(points), envelope.lower_at(points) - values


def soundness_falsify(envelope: QuadraticEnvelope, true_fn: BatchFunction,
                      domain_box: Tuple[np.ndarray, np.ndarray], samples: Optional[int] = None,
                      seed: int = 0, max_workers: int = 1) -> FalsificationReport:
    """
    Zufallssuche nach Verletzungen der Envelope-Eigenschaft.

    Neben den Zufallspunkten werden immer der Anker (falls in der Box) und alle
    Ecken der Box geprüft.

    Args:
        envelope: zu prüfendes Envelope
        true_fn: Residualfunktion, ausgewertet auf einem Batch lokaler Punkte (S, d)
        domain_box: (lower, upper) in lokalen Koordinaten, endlich
        samples: Anzahl Zufallspunkte
        seed: Seed des aufteilbaren Generators (ein Teilstrom pro Worker)
        max_workers: Anzahl paralleler Worker

    Returns:
        FalsificationReport mit der größten vorzeichenbehafteten Verletzung
    """
    samples = ENVELOPE_CONFIG['falsify_samples'] if samples is None else samples
    lower, upper = (np.asarray(b, dtype=float) for b in domain_box)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise EnvelopeError("Falsification domain box must be finite")
    if np.any(lower > upper):
        raise EnvelopeError("Falsification domain box has lower > upper")

    dim = envelope.dim
    fixed = [np.array(corner) for corner in itertools.product(*zip(lower, upper))] if dim <= 10 else []
    if np.all(envelope.anchor >= lower) and np.all(envelope.anchor <= upper):
        fixed.append(envelope.anchor)

    workers = max(1, int(max_workers))
    chunk_sizes = [samples // workers + (1 if i < samples % workers else 0) for i in range(workers)]
    streams = np.random.SeedSequence(seed).spawn(workers)

    def _chunk(args):
        size, stream = args
        rng = np.random.default_rng(stream)
        return rng.uniform(lower, upper, size=(size, dim))

    if workers == 1:
        chunks = [_chunk((chunk_sizes[0], streams[0]))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(_chunk, zip(chunk_sizes, streams)))

    parts = chunks + ([np.array(fixed)] if fixed else [])
    points = np.vstack(parts) if parts else np.zeros((0, dim))
    if points.shape[0] == 0:
        return FalsificationReport(float('-inf'), np.zeros(dim), 'none', 0, seed)

    upper_viol, lower_viol = _violations(envelope, true_fn, points)
    iu, il = int(np.argmax(upper_viol)), int(np.argmax(lower_viol))
    if upper_viol[iu] >= lower_viol[il]:
        return FalsificationReport(float(upper_viol[iu]), points[iu], 'upper', samples, seed)
    return FalsificationReport(float(lower_viol[il]), points[il], 'lower', samples, seed)


__all__ = ['FalsificationReport', 'default_domain_box', 'soundness_falsify']
