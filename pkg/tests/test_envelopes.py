"""
Test Suite für Envelopes, Vertex-Enumeration und Soundness-Falsifikation.
"""

import unittest

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault('ENABLE_FILE_LOGGING', 'false')

import numpy as np

from modules.envelopes import (
    QuadraticForm, QuadraticEnvelope, bilinear_envelope, sin_envelope, cos_envelope,
    curvature_bound_envelope, trig_product_envelope, linear_envelope,
    TubeSlots, vertex_bound_constraints, vertex_extremes, default_domain_box, soundness_falsify
)
from modules.exceptions import EnvelopeError, SparsityCapError


class TestEnvelopeSoundness(unittest.TestCase):
    """Envelopes müssen die Residualfunktion auf dem ganzen Testbereich einschließen."""

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_bilinear_envelope_sound_for_random_anchors(self):
        """Test ob das bilineare Envelope an zufälligen Ankern keine Verletzung zeigt."""
        for _ in range(25):
            x0, y0 = self.rng.uniform(-5, 5, size=2)
            envelope = bilinear_envelope(x0, y0)
            box = default_domain_box(envelope, np.array([x0 - 2, y0 - 2]), np.array([x0 + 2, y0 + 2]))
            report = soundness_falsify(envelope, lambda p: p[:, 0] * p[:, 1], box, samples=2000, seed=1)
            self.assertTrue(report.is_sound(), f"violation {report.worst_violation} at {report.worst_point}")

    def test_bilinear_rho_changes_shape_not_soundness(self):
        """Test ob andere ρ-Werte weiterhin sound sind."""
        envelope = bilinear_envelope(1.0, -2.0, rho1=0.3, rho2=4.0)
        box = (np.array([-4.0, -6.0]), np.array([6.0, 2.0]))
        report = soundness_falsify(envelope, lambda p: p[:, 0] * p[:, 1], box, samples=5000, seed=3)
        self.assertTrue(report.is_sound())

    def test_sin_cos_envelopes_sound(self):
        """Test für sin/cos mit Krümmungsschranke 1."""
        for theta0 in self.rng.uniform(-np.pi, np.pi, size=20):
            box = (np.array([theta0 - 3.0]), np.array([theta0 + 3.0]))
            for envelope, fn in ((sin_envelope(theta0), np.sin), (cos_envelope(theta0), np.cos)):
                report = soundness_falsify(envelope, lambda p, fn=fn: fn(p[:, 0]), box, samples=2000, seed=5)
                self.assertTrue(report.is_sound(), f"{envelope.label} at {theta0}")

    def test_trig_product_envelope_sound(self):
        """Test ob v·cosθ und v·sinθ von den Produkt-Envelopes eingeschlossen werden."""
        functions = {'cos': lambda p: p[:, 0] * np.cos(p[:, 1]), 'sin': lambda p: p[:, 0] * np.sin(p[:, 1])}
        for _ in range(20):
            v0 = self.rng.uniform(-20, 20)
            theta0 = self.rng.uniform(-np.pi, np.pi)
            for kind, fn in functions.items():
                envelope = trig_product_envelope(v0, theta0, kind)
                box = (np.array([v0 - 10, theta0 - 2]), np.array([v0 + 10, theta0 + 2]))
                report = soundness_falsify(envelope, fn, box, samples=3000, seed=11)
                self.assertTrue(report.is_sound(), f"{kind} at ({v0}, {theta0}): {report.worst_violation}")

    def test_anchor_tightness(self):
        """Test ob Ober- und Unterschranke im Anker mit der Funktion übereinstimmen."""
        envelope = bilinear_envelope(1.5, -0.5)
        self.assertAlmostEqual(envelope.evaluate_upper(np.array([1.5, -0.5])), -0.75, places=12)
        self.assertAlmostEqual(envelope.evaluate_lower(np.array([1.5, -0.5])), -0.75, places=12)
        self.assertAlmostEqual(envelope.gap_at_anchor(), 0.0, places=12)

        product = trig_product_envelope(3.0, 0.4, 'sin')
        self.assertAlmostEqual(product.evaluate_upper(np.array([3.0, 0.4])), 3.0 * np.sin(0.4), places=12)

    def test_falsify_detects_broken_envelope(self):
        """Test ob eine zu enge Schranke als Verletzung gemeldet wird."""
        tight = curvature_bound_envelope(0.0, np.array([1.0]), np.array([[0.01]]), np.array([0.0]))
        report = soundness_falsify(tight, lambda p: np.sin(p[:, 0]), (np.array([-3.0]), np.array([3.0])),
                                   samples=1000, seed=0)
        self.assertFalse(report.is_sound())
        self.assertGreater(report.worst_violation, 0.1)

    def test_falsify_rejects_infinite_box(self):
        """Test ob ein unendlicher Testbereich abgelehnt wird."""
        envelope = sin_envelope(0.0)
        with self.assertRaises(EnvelopeError):
            soundness_falsify(envelope, lambda p: np.sin(p[:, 0]), (np.array([-np.inf]), np.array([1.0])))


class TestEnvelopeConstruction(unittest.TestCase):
    """Konstruktion und Transformation von Envelopes."""

    def test_nonconvex_upper_rejected(self):
        """Test ob eine nicht-konvexe Oberschranke abgelehnt wird."""
        form_up = QuadraticForm(0.0, np.zeros(1), np.array([[-1.0]]))
        form_lo = QuadraticForm(0.0, np.zeros(1), np.array([[-1.0]]))
        with self.assertRaises(EnvelopeError):
            QuadraticEnvelope((0,), 0, np.zeros(1), form_up, form_lo)

    def test_negative_rho_rejected(self):
        with self.assertRaises(EnvelopeError):
            bilinear_envelope(0.0, 0.0, rho1=-1.0)

    def test_linear_envelope_is_exact(self):
        """Test ob affine Komponenten identische Ober- und Unterschranken haben."""
        envelope = linear_envelope((0,), 1, np.array([2.0]), np.array([-1.0]), np.array([1.0]), np.array([0.5]),
                                   const=0.25)
        point = (np.array([3.0]), np.array([-2.0]))
        self.assertAlmostEqual(envelope.evaluate_upper(*point), envelope.evaluate_lower(*point))
        self.assertAlmostEqual(envelope.evaluate_upper(*point), 0.25 + 6.0 + 2.0)

    def test_minus_linear_removes_gradient(self):
        """Test ob g - Jz am Anker einen verschwindenden z-Gradienten hat."""
        envelope = trig_product_envelope(2.0, 0.3, 'cos')
        residual = envelope.minus_linear(envelope.upper.a)
        np.testing.assert_allclose(residual.upper.a, np.zeros(2), atol=1e-15)
        self.assertAlmostEqual(residual.upper.c, 2.0 * np.cos(0.3) - envelope.upper.a @ envelope.anchor)

    def test_embed_adds_control_coordinates(self):
        """Test für embed() in Modellkoordinaten."""
        envelope = trig_product_envelope(1.0, 0.0, 'cos').embed((2, 3), 2, control_anchor=np.array([0.5, 0.1]))
        self.assertEqual(envelope.indices, (2, 3))
        self.assertEqual(envelope.dim, 4)
        np.testing.assert_allclose(envelope.anchor, [1.0, 0.0, 0.5, 0.1])
        np.testing.assert_allclose(envelope.upper.a[2:], [0.0, 0.0])


class TestVertexEnumeration(unittest.TestCase):
    """Ecken-Ungleichungen über die Tube."""

    def setUp(self):
        self.slots = TubeSlots(z_upper=['zu0', 'zu1', 'zu2'], z_lower=['zl0', 'zl1', 'zl2'],
                               u=['u0'], g_upper='gu', g_lower='gl')

    def test_vertex_count_bound(self):
        """Test ob höchstens 2^(|I|+1) Ungleichungen entstehen."""
        envelope = bilinear_envelope(0.5, -1.0)
        embedded = QuadraticEnvelope((0, 2), 1, np.concatenate([envelope.anchor, [0.0]]),
                                     QuadraticForm(envelope.upper.c, np.append(envelope.upper.a, 0.0),
                                                   np.pad(envelope.upper.H, ((0, 1), (0, 1)))),
                                     QuadraticForm(envelope.lower.c, np.append(envelope.lower.a, 0.0),
                                                   np.pad(envelope.lower.H, ((0, 1), (0, 1)))))
        bounds = vertex_bound_constraints(embedded, (0, 2), self.slots)
        self.assertEqual(len(bounds), 2 ** (2 + 1))
        self.assertEqual(sum(1 for b in bounds if b.side == 'upper'), 4)
        self.assertEqual({b.z_slots for b in bounds if b.side == 'upper'},
                         {('zu0', 'zu2'), ('zu0', 'zl2'), ('zl0', 'zu2'), ('zl0', 'zl2')})

    def test_constant_residual_single_pair(self):
        """Test ob eine von z unabhängige Komponente genau ein Paar liefert."""
        envelope = linear_envelope((1,), 1, np.array([0.0]), np.array([1.0]), np.array([0.0]), np.array([0.0]))
        bounds = vertex_bound_constraints(envelope, (1,), self.slots)
        self.assertEqual(len(bounds), 2)

    def test_sparsity_cap(self):
        """Test ob |I_k| über der Obergrenze abgelehnt wird."""
        envelope = bilinear_envelope(0.0, 0.0)
        with self.assertRaises(SparsityCapError):
            vertex_bound_constraints(envelope, (0, 1), self.slots, cap=1)

    def test_mismatched_sparsity_set(self):
        envelope = bilinear_envelope(0.0, 0.0)
        with self.assertRaises(EnvelopeError):
            vertex_bound_constraints(envelope, (0, 2), self.slots)

    def test_vertex_extremes_dominate_interior(self):
        """Test ob die Ecken das Maximum der Oberschranke über der Box liefern."""
        envelope = bilinear_envelope(0.3, 0.7)
        z_upper, z_lower = np.array([1.0, 2.0]), np.array([-0.5, 0.2])
        upper_max, lower_min = vertex_extremes(envelope, z_upper, z_lower, np.zeros(0))
        rng = np.random.default_rng(0)
        points = rng.uniform(z_lower, z_upper, size=(2000, 2))
        self.assertLessEqual(float(np.max(envelope.upper_at(points))), upper_max + 1e-12)
        self.assertGreaterEqual(float(np.min(envelope.lower_at(points))), lower_min - 1e-12)

    def test_expanded_form_matches_vertex_value(self):
        """Test ob die ausmultiplizierte Ungleichung dem Envelope-Wert entspricht."""
        envelope = bilinear_envelope(0.3, 0.7)
        slots = TubeSlots(z_upper=[0, 1], z_lower=[2, 3], u=[], g_upper=4, g_lower=5)
        bound = vertex_bound_constraints(envelope, (0, 1), slots)[0]
        P, a, b = bound.expanded()
        z = np.array([1.2, -0.4])
        g = 0.8
        v = np.append(z, g)
        lhs = 0.5 * v @ P @ v + a @ v
        self.assertAlmostEqual(lhs - b, bound.envelope_value(z, np.zeros(0)) - g, places=12)


if __name__ == '__main__':
    unittest.main()
