"""
Tests für Systemmodelle, Registry und Modellvalidierung.
"""

import unittest

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault('ENABLE_FILE_LOGGING', 'false')

import numpy as np

from modules.core.model import (
    check_sparsity, eval_basis, eval_dynamics, finite_difference_jacobian, jacobian_dynamics, residual,
    residual_envelope, validate_representation
)
from modules.core.trajectory import nominal_from_controls, rollout
from modules.exceptions import DimensionError, ModelError, NominalNotRegisteredError
from modules.models import ModelRegistry, create_model, ground_vehicle_model, linear_model, open_loop_schedule


class TestGroundVehicle(unittest.TestCase):
    """Bodenfahrzeug in Feedback-Darstellung."""

    def setUp(self):
        self.model = ground_vehicle_model(h=0.05, horizon=10)

    def test_dimensions(self):
        """Test der Dimensionen n, m, p, q, r."""
        self.assertEqual((self.model.n, self.model.m, self.model.p, self.model.q, self.model.r), (4, 2, 8, 4, 2))
        self.assertTrue(self.model.time_invariant)
        self.assertEqual(self.model.sparsity_degree, 2)

    def test_representation_matches_euler_step(self):
        """Test ob M psi(Cx, u) dem Euler-Schritt entspricht."""
        worst = validate_representation(self.model, samples=50, seed=3, scale=5.0)
        self.assertLess(worst, 1e-12)

    def test_sparsity_sets_are_respected(self):
        self.assertEqual(check_sparsity(self.model, samples=10, seed=1), [])

    def test_disturbance_enters_positions(self):
        """Test ob B = h·[I2; 0]."""
        x = np.array([1.0, 2.0, 3.0, 0.5])
        u = np.array([0.2, -0.1])
        base = eval_dynamics(self.model, 0, x, u)
        pushed = eval_dynamics(self.model, 0, x, u, np.array([1.0, -2.0]))
        np.testing.assert_allclose(pushed - base, [0.05, -0.1, 0.0, 0.0], atol=1e-15)

    def test_euler_step_values(self):
        x = np.array([0.0, 0.0, 2.0, np.pi / 2])
        nxt = eval_dynamics(self.model, 0, x, np.array([1.0, 0.5]))
        np.testing.assert_allclose(nxt, [0.0, 0.1, 2.05, np.pi / 2 + 0.025], atol=1e-12)

    def test_wrong_dimension_names_stage_and_field(self):
        """Test ob DimensionError Stufe und Feld nennt."""
        with self.assertRaises(DimensionError) as ctx:
            eval_dynamics(self.model, 3, np.zeros(3), np.zeros(2))
        self.assertIn('x', str(ctx.exception))
        self.assertIn('3', str(ctx.exception))

    def test_stage_out_of_range(self):
        with self.assertRaises(DimensionError):
            eval_dynamics(self.model, 10, np.zeros(4), np.zeros(2))

    def test_residual_requires_nominal(self):
        """Test ob residual ohne registrierten Nominalpunkt abgelehnt wird."""
        with self.assertRaises(NominalNotRegisteredError):
            residual(self.model, 0, np.zeros(4), np.zeros(2))

    def test_residual_envelope_contains_residual(self):
        """Test ob die Residual-Envelopes am Nominalpunkt den echten Residualwert einschließen."""
        u = open_loop_schedule(10)
        nominal = nominal_from_controls(self.model, np.array([-25.0, -80.0, 0.0, 0.0]), u)
        model = self.model.with_nominal(nominal)
        rng = np.random.default_rng(0)
        for t in (0, 4, 9):
            for _ in range(20):
                z = nominal.z[t] + rng.uniform(-2, 2, size=4)
                g = residual(model, t, z, u[t])
                for k in range(model.p):
                    envelope = residual_envelope(model, t, k)
                    z_sub = z[list(envelope.indices)]
                    self.assertLessEqual(g[k], envelope.evaluate_upper(z_sub, u[t]) + 1e-9)
                    self.assertGreaterEqual(g[k], envelope.evaluate_lower(z_sub, u[t]) - 1e-9)

    def test_jacobian_matches_finite_differences(self):
        """Test ob J_f = M J_psi C an zufälligen Nominalpunkten mit zentralen Differenzen übereinstimmt."""
        rng = np.random.default_rng(11)
        for _ in range(5):
            x0 = rng.uniform(-5.0, 5.0, 4)
            nominal = nominal_from_controls(self.model, x0, rng.uniform(-2.0, 2.0, (10, 2)))
            model = self.model.with_nominal(nominal)
            for t in (0, 4, 9):
                exact = jacobian_dynamics(model, t)
                numeric = finite_difference_jacobian(lambda x: eval_dynamics(model, t, x, nominal.u[t]),
                                                     nominal.x[t])
                np.testing.assert_allclose(exact, numeric, atol=1e-6)

    def test_open_loop_schedule(self):
        """Test des Steuerschemas (15, 0.75) bis N/2, danach (-15, -0.75)."""
        u = open_loop_schedule(10)
        np.testing.assert_allclose(u[0], [15.0, 0.75])
        np.testing.assert_allclose(u[5], [15.0, 0.75])
        np.testing.assert_allclose(u[6], [-15.0, -0.75])

    def test_invalid_step(self):
        with self.assertRaises(ModelError):
            ground_vehicle_model(h=0.0)


class TestLinearModel(unittest.TestCase):
    """Lineares Modell: Basis (z, u), konstante Residuen."""

    def setUp(self):
        self.A = np.array([[1.0, 0.1], [0.0, 1.0]])
        self.B = np.array([[0.0], [0.1]])
        self.model = linear_model(self.A, self.B, horizon=5)

    def test_dynamics(self):
        x = np.array([1.0, 2.0])
        np.testing.assert_allclose(eval_dynamics(self.model, 0, x, np.array([3.0])),
                                   self.A @ x + self.B @ [3.0])
        self.assertLess(validate_representation(self.model, samples=10), 1e-12)

    def test_basis(self):
        np.testing.assert_allclose(eval_basis(self.model, 0, np.array([1.0, 2.0]), np.array([3.0])), [1.0, 2.0, 3.0])

    def test_residual_is_constant_in_z(self):
        """Test ob g = psi - J_psi z nicht von z abhängt."""
        nominal = nominal_from_controls(self.model, np.zeros(2), np.zeros((5, 1)))
        model = self.model.with_nominal(nominal)
        g1 = residual(model, 0, np.array([1.0, 2.0]), np.array([0.5]))
        g2 = residual(model, 0, np.array([-4.0, 7.0]), np.array([0.5]))
        np.testing.assert_allclose(g1, g2)

    def test_non_square_A(self):
        with self.assertRaises(DimensionError):
            linear_model(np.ones((2, 3)), self.B)

    def test_rollout_shape(self):
        x = rollout(self.model, np.array([1.0, 0.0]), np.ones((5, 1)))
        self.assertEqual(x.shape, (6, 2))

    def test_with_horizon(self):
        self.assertEqual(self.model.with_horizon(12).horizon, 12)

    def test_zero_horizon_rejected(self):
        with self.assertRaises(ModelError):
            linear_model(self.A, self.B, horizon=0)


class TestModelRegistry(unittest.TestCase):
    """Auflösung von Modellnamen."""

    def setUp(self):
        ModelRegistry.clear()

    def tearDown(self):
        ModelRegistry.clear()

    def test_create_builtin(self):
        """Test ob create_model die Registry bei Bedarf füllt."""
        model = create_model('ground_vehicle', 7, {'h': 0.1})
        self.assertEqual(model.horizon, 7)
        self.assertEqual(model.name, 'ground_vehicle')
        self.assertIn('linear', [entry['name'] for entry in ModelRegistry.list_models()])

    def test_unknown_model(self):
        ModelRegistry.auto_discover()
        with self.assertRaises(ModelError):
            ModelRegistry.create('unicycle', 5)

    def test_invalid_parameters(self):
        with self.assertRaises(ModelError):
            create_model('ground_vehicle', 5, {'wheelbase': 2.0})

    def test_custom_factory(self):
        """Test für 'paket.modul:funktion'."""
        model = create_model('custom', 4, {'factory': 'modules.models.ground_vehicle:ground_vehicle_model'})
        self.assertEqual(model.horizon, 4)

    def test_custom_factory_missing(self):
        with self.assertRaises(ModelError):
            create_model('custom', 4, {'factory': 'modules.models.ground_vehicle'})
        with self.assertRaises(ModelError):
            create_model('custom', 4, {'factory': 'modules.models.ground_vehicle:nope'})


if __name__ == '__main__':
    unittest.main()
