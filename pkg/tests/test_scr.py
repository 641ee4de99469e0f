"""
Tests der SCR-Schleife, der Margenzertifikate, der Monte-Carlo-Verifikation und des
Receding-Horizon-Betriebs.

Fälle mit Conic-Solver laufen nur mit installiertem cvxpy; die Fahrzeug-Benchmarks
zusätzlich nur mit SCR_SLOW_TESTS=1.
"""

import unittest

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault('ENABLE_FILE_LOGGING', 'false')

from dataclasses import replace

import numpy as np

from config import SCROptions
from modules.conic import CvxpyBackend
from modules.data_models import CertificateStatus, CertifiedSolution, MarginMode, Tube
from modules.exceptions import DimensionError, InputError, SeedInfeasibleError
from modules.driver import bench_table, load_scenario
from modules.models import linear_model, open_loop_schedule
from modules.restriction import (
    BoxObstacle, ObstacleSet, RobustMPCProblem, UncertaintyModel, VariableLayout
)
from modules.simulation import (
    certify_margin, draw_disturbances, empirical_margin, extend_controls, monte_carlo_verify,
    nominal_rollout, receding_horizon_run, sample_ellipsoid, scr_solve, shift_primal
)
from modules.simulation.receding_horizon import _disturbance_fn

HAS_CVXPY = CvxpyBackend().available()
SLOW = os.getenv('SCR_SLOW_TESTS', '') == '1'
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
VEHICLE_SCENARIO = os.path.join(ROOT, 'scenarios', 'ground_vehicle.scenario')
EPS_SAFE = 1e-6


def chain_problem(gamma: float = 0.1, with_wall: bool = True, horizon: int = 2) -> RobustMPCProblem:
    """x+ = x + u + w, x0 = 0, Wand x >= 1."""
    model = linear_model(np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]), horizon=horizon)
    wall = (BoxObstacle([1.0], [np.inf], coords=(0,), label='wall'),) if with_wall else ()
    uncertainty = UncertaintyModel(np.zeros(1), np.eye(1), gamma, (np.eye(1),), gamma)
    return RobustMPCProblem(model=model, x_init=np.zeros(1), uncertainty=uncertainty,
                            obstacles=ObstacleSet(static=wall), q_sqrt=[[1.0]], r_sqrt=[[1.0]],
                            u_lower=[-1.0], u_upper=[1.0], eps_safe=EPS_SAFE)


def chain_certificate(problem: RobustMPCProblem, width: float) -> CertifiedSolution:
    """Zertifikat mit u = 0 und Tube |x_t| <= width·(t+1) (ohne Solver gebaut)."""
    N = problem.horizon
    u = np.zeros((N, 1))
    bound = width * np.arange(1, N + 2, dtype=float).reshape(-1, 1)
    return CertifiedSolution(status=CertificateStatus.CONVERGED, u=u, tube=Tube(bound, -bound),
                             gamma_init=problem.uncertainty.gamma_init,
                             gamma_dyn=problem.uncertainty.gamma_dyn, cost_upper=100.0,
                             nominal=nominal_rollout(problem, u), anchor=None, iterations=1)


class TestHelpers(unittest.TestCase):
    """Hilfsfunktionen ohne Solver."""

    def test_extend_controls(self):
        u = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(extend_controls(u, 3), [[1, 2], [3, 4], [0, 0]])
        np.testing.assert_allclose(extend_controls(u, 1), [[1, 2]])
        self.assertEqual(extend_controls(np.zeros((0, 2)), 2, 2).shape, (2, 2))

    def test_shift_primal(self):
        """Test ob Steuerungen mit Nullen und Tube-Grenzen mit Endwerten aufgefüllt werden."""
        layout = VariableLayout(horizon=2, m=1, q=1, p=1, k=1)
        shifted = shift_primal(layout, np.arange(16, dtype=float), 1)
        np.testing.assert_allclose(shifted[layout.block('u')], [1.0, 0.0])
        np.testing.assert_allclose(shifted[layout.block('z_upper')], [3.0, 4.0, 4.0])
        np.testing.assert_allclose(shifted[layout.block('z_lower')], [6.0, 7.0, 7.0])
        np.testing.assert_allclose(shifted[layout.block('g_upper')], [9.0, 0.0])
        np.testing.assert_allclose(shifted[layout.block('y')], [13.0, 14.0, 14.0])
        self.assertEqual(shifted[layout.cost_upper], 15.0)

    def test_nominal_rollout_shape_checked(self):
        with self.assertRaises(DimensionError):
            nominal_rollout(chain_problem(), np.zeros(3))

    def test_seed_inside_obstacle(self):
        """Test ob eine Startsteuerung mit Kollision abgelehnt wird."""
        with self.assertRaises(SeedInfeasibleError):
            scr_solve(chain_problem(), np.array([[2.0], [0.0]]))


class TestMarginWithoutSolver(unittest.TestCase):
    """Randfälle der Marge, die ohne Conic-Solve entschieden werden."""

    def test_no_obstacles_unbounded(self):
        margin = certify_margin(chain_problem(with_wall=False), np.zeros((2, 1)), 'joint')
        self.assertEqual(margin.gamma, float('inf'))
        self.assertIn('unbounded', margin.diagnostic)

    def test_nominal_in_obstacle_zero(self):
        """Nominalzustand in der Wand: Marge 0 mit Diagnose."""
        margin = certify_margin(chain_problem(), np.array([[1.5], [0.0]]), MarginMode.INIT)
        self.assertEqual(margin.gamma, 0.0)
        self.assertIn('stage 1', margin.diagnostic)

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            certify_margin(chain_problem(), np.zeros((2, 1)), 'everything')


class TestSampling(unittest.TestCase):

    def test_sample_ellipsoid_boundary_and_interior(self):
        """Test ob Randpunkte auf und innere Punkte im Ellipsoid liegen."""
        rng = np.random.default_rng(0)
        sigma = np.array([[4.0, 1.0], [1.0, 2.0]])
        inv = np.linalg.inv(sigma)
        center = np.array([1.0, -1.0])
        boundary = sample_ellipsoid(center, sigma, 0.5, 200, True, rng)
        interior = sample_ellipsoid(center, sigma, 0.5, 200, False, rng)
        radius_b = np.sqrt(np.einsum('ij,jk,ik->i', boundary - center, inv, boundary - center))
        radius_i = np.sqrt(np.einsum('ij,jk,ik->i', interior - center, inv, interior - center))
        np.testing.assert_allclose(radius_b, 0.5, atol=1e-12)
        self.assertTrue(np.all(radius_i <= 0.5 + 1e-12))
        self.assertLess(radius_i.mean(), 0.49)

    def test_sampled_disturbance_centred_on_nominal(self):
        """Test ob gesampelte Closed-Loop-Störungen im Ellipsoid um w_t^(0) liegen."""
        problem = chain_problem(gamma=0.1, horizon=3)
        nominal = np.array([[0.5], [-0.5], [0.2]])
        problem = replace(problem, uncertainty=replace(problem.uncertainty, w_nominal=nominal))
        sampled = _disturbance_fn(problem, 'sampled')
        rng = np.random.default_rng(0)
        for step, center in enumerate([0.5, -0.5, 0.2, 0.0]):
            draws = np.array([sampled(step, rng) for _ in range(200)])[:, 0]
            self.assertTrue(np.all(np.abs(draws - center) <= 0.1 + 1e-12), step)
            self.assertAlmostEqual(float(draws.mean()), center, delta=0.03)

    def test_draws_are_reproducible(self):
        problem = chain_problem()
        first = draw_disturbances(problem, 10, seed=5, boundary_fraction=0.5)
        second = draw_disturbances(problem, 10, seed=5, boundary_fraction=0.5)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.v_dyn, b.v_dyn)
        np.testing.assert_allclose(np.abs(first[0].v_init), 1.0)


class TestMonteCarlo(unittest.TestCase):
    """Verifikation gegen eine exakt bekannte Tube."""

    def setUp(self):
        self.problem = chain_problem(gamma=0.1)

    def test_exact_tube_has_no_violations(self):
        report = monte_carlo_verify(chain_certificate(self.problem, 0.1), self.problem, samples=300, seed=1,
                                    max_workers=2)
        self.assertTrue(report.passed, report.to_dict())
        self.assertLessEqual(report.worst_tube_excess, 1e-12)

    def test_narrow_tube_is_detected(self):
        """Eine zu enge Tube muss Austritte zeigen."""
        report = monte_carlo_verify(chain_certificate(self.problem, 0.05), self.problem, samples=300, seed=1)
        self.assertGreater(report.tube_exits, 0)
        self.assertEqual(report.first_exit_stage, 0)

    def test_containment_tolerance(self):
        """Test ob ein Überstand von 1e-9 nur bei exakter Prüfung als Austritt zählt."""
        certificate = chain_certificate(self.problem, 0.1)
        bound = certificate.tube.z_upper - 1e-9
        certificate = replace(certificate, tube=Tube(bound, -bound))
        default = monte_carlo_verify(certificate, self.problem, samples=100, seed=1)
        self.assertTrue(default.passed, default.to_dict())
        self.assertEqual(default.containment_tol, 1e-7)
        exact = monte_carlo_verify(certificate, self.problem, samples=100, seed=1, containment_tol=0.0)
        self.assertGreater(exact.tube_exits, 0)
        self.assertEqual(exact.first_exit_stage, 0)
        self.assertEqual(exact.to_dict()['containment_tol'], 0.0)
        with self.assertRaises(InputError):
            monte_carlo_verify(certificate, self.problem, samples=10, containment_tol=-1.0)

    def test_inflated_gamma_hits_wall(self):
        report = monte_carlo_verify(chain_certificate(self.problem, 0.1), self.problem, samples=300, seed=2,
                                    gamma_scale=5.0)
        self.assertGreater(report.obstacle_hits, 0)
        self.assertFalse(report.passed)

    def test_invalid_inputs(self):
        with self.assertRaises(InputError):
            monte_carlo_verify(chain_certificate(self.problem, 0.1), self.problem, samples=0)
        failed = CertifiedSolution(status=CertificateStatus.INFEASIBLE_AT_SEED, u=None, tube=None,
                                   gamma_init=0.1, gamma_dyn=0.1, cost_upper=None, nominal=None, anchor=None)
        with self.assertRaises(InputError):
            monte_carlo_verify(failed, self.problem, samples=10)

    def test_empirical_margin_chain(self):
        """Kollision ab 3γ >= 1 bei u = 0."""
        gamma = empirical_margin(self.problem, np.zeros((2, 1)), 'joint', samples=200, seed=0)
        self.assertAlmostEqual(gamma, 1.0 / 3.0, places=6)
        self.assertGreaterEqual(gamma, 1.0 / 3.0 - 1e-12)
        init_only = empirical_margin(self.problem, np.zeros((2, 1)), 'init', samples=200, seed=0)
        self.assertAlmostEqual(init_only, 1.0, places=6)

    def test_empirical_margin_unbounded(self):
        problem = chain_problem(with_wall=False)
        self.assertEqual(empirical_margin(problem, np.zeros((2, 1)), 'joint', samples=5, gamma_max=100.0),
                         float('inf'))


@unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
class TestChainOracle(unittest.TestCase):
    """Eindimensionale Kette mit exakt bekannter Marge."""

    def setUp(self):
        self.problem = chain_problem()
        self.options = SCROptions(eps_safe=EPS_SAFE)

    def test_joint_margin(self):
        """Test ob die zertifizierte Marge (1 - eps)/3 beträgt."""
        margin = certify_margin(self.problem, np.zeros((2, 1)), MarginMode.JOINT, self.options)
        self.assertAlmostEqual(margin.gamma, (1.0 - EPS_SAFE) / 3.0, delta=1e-4)
        self.assertIsNotNone(margin.tube)

    def test_init_and_dyn_margins(self):
        init = certify_margin(self.problem, np.zeros((2, 1)), 'init', self.options)
        dyn = certify_margin(self.problem, np.zeros((2, 1)), 'dyn', self.options)
        self.assertAlmostEqual(init.gamma, 1.0 - EPS_SAFE, delta=1e-4)
        self.assertAlmostEqual(dyn.gamma, (1.0 - EPS_SAFE) / 2.0, delta=1e-4)

    def test_stage_sigmas(self):
        """Σ_0 = 1, Σ_1 = 4: breitere Tube bei x_2, dyn-Marge (1 - eps)/3 statt (1 - eps)/2."""
        uncertainty = UncertaintyModel(np.zeros(1), np.eye(1), 0.1, (np.eye(1), 4.0 * np.eye(1)), 0.1)
        problem = replace(self.problem, uncertainty=uncertainty)
        dyn = certify_margin(problem, np.zeros((2, 1)), 'dyn', self.options)
        self.assertAlmostEqual(dyn.gamma, (1.0 - EPS_SAFE) / 3.0, delta=1e-4)

        small = replace(self.problem, uncertainty=uncertainty.with_gammas(0.05, 0.05))
        certificate = scr_solve(small, np.zeros((2, 1)), self.options)
        self.assertTrue(certificate.certified, certificate.message)
        # |x_2 - x_2^(0)| <= γ(1 + 1 + 2)
        width = certificate.tube.z_upper[2, 0] - certificate.tube.z_lower[2, 0]
        self.assertGreaterEqual(width, 2 * 0.05 * 4.0 - 1e-6)
        report = monte_carlo_verify(certificate, small, samples=300, seed=4)
        self.assertTrue(report.passed, report.to_dict())

    def test_certified_below_empirical(self):
        """Die zertifizierte Marge darf die empirische nicht übersteigen."""
        certified = certify_margin(self.problem, np.zeros((2, 1)), 'joint', self.options).gamma
        empirical = empirical_margin(self.problem, np.zeros((2, 1)), 'joint', samples=200, seed=0)
        self.assertLessEqual(certified, empirical + 1e-9)

    def test_scr_certificate_is_sound(self):
        """SCR-Zertifikat: Tube hält die Wand ein, Monte Carlo ohne Verletzung."""
        certificate = scr_solve(self.problem, np.zeros((2, 1)), self.options)
        self.assertTrue(certificate.certified)
        self.assertTrue(np.all(certificate.tube.z_upper[1:] <= 1.0 - EPS_SAFE + 1e-6))
        self.assertTrue(certificate.tube.contains(certificate.nominal.z, tol=1e-6))
        self.assertGreaterEqual(certificate.cost_upper, certificate.nominal_cost - 1e-6)
        report = monte_carlo_verify(certificate, self.problem, samples=300, seed=3)
        self.assertTrue(report.passed, report.to_dict())
        self.assertLessEqual(report.max_cost, certificate.cost_upper + 1e-6)

    def test_linear_without_obstacles_converges_immediately(self):
        """Ohne Hindernisse ist die Restriktion exakt: der zweite Solve bestätigt den ersten."""
        problem = chain_problem(with_wall=False, horizon=4)
        certificate = scr_solve(problem, np.zeros((4, 1)), self.options)
        self.assertEqual(certificate.status, CertificateStatus.CONVERGED)
        self.assertEqual(certificate.iterations, 2)
        self.assertAlmostEqual(certificate.objective_history[1], certificate.objective_history[0], places=5)

    def test_infeasible_at_seed(self):
        """Zu große Unsicherheit: schon die erste Restriktion ist unzulässig."""
        certificate = scr_solve(chain_problem(gamma=1.2), np.zeros((2, 1)), self.options)
        self.assertEqual(certificate.status, CertificateStatus.INFEASIBLE_AT_SEED)
        self.assertFalse(certificate.certified)
        self.assertIsNone(certificate.tube)


@unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
class TestRecedingHorizon(unittest.TestCase):

    def setUp(self):
        self.problem = chain_problem()
        self.options = SCROptions(eps_safe=EPS_SAFE)

    def test_zero_disturbance_follows_first_plan(self):
        """Test ob der Lauf ohne Störung der nominalen Trajektorie des ersten Plans folgt."""
        certificate = scr_solve(self.problem, np.zeros((2, 1)), self.options)
        run = receding_horizon_run(self.problem, total_steps=2, replan_period=2, disturbance_source='zero',
                                   options=self.options)
        self.assertEqual(run.completed_steps, 2)
        np.testing.assert_allclose(run.state_array, certificate.nominal.x, atol=1e-8)

    def test_deterministic_for_fixed_seed(self):
        first = receding_horizon_run(self.problem, total_steps=4, replan_period=1, seed=7, options=self.options)
        second = receding_horizon_run(self.problem, total_steps=4, replan_period=1, seed=7, options=self.options)
        np.testing.assert_array_equal(first.state_array, second.state_array)
        self.assertEqual(len(first.cycles), 4)
        self.assertTrue(np.all(first.state_array[:, 0] < 1.0))

    def test_invalid_arguments(self):
        with self.assertRaises(InputError):
            receding_horizon_run(self.problem, total_steps=2, replan_period=0)
        with self.assertRaises(InputError):
            receding_horizon_run(self.problem, total_steps=2, disturbance_source='gaussian')


@unittest.skipUnless(HAS_CVXPY and SLOW, "Fahrzeug-Benchmark nur mit SCR_SLOW_TESTS=1")
class TestVehicleBenchmark(unittest.TestCase):
    """Bodenfahrzeug mit zwei Hindernissen aus scenarios/ground_vehicle.scenario."""

    def setUp(self):
        self.scenario = load_scenario(VEHICLE_SCENARIO)
        self.options = replace(self.scenario.to_options(), epsilon=1e-3, max_iterations=30)

    def test_converges_for_all_horizons(self):
        """Test ob SCR für N = 10, 20, 30, 40 in höchstens 30 Iterationen konvergiert."""
        for horizon in (10, 20, 30, 40):
            with self.subTest(horizon=horizon):
                problem = self.scenario.to_problem(horizon)
                certificate = scr_solve(problem, np.zeros((horizon, 2)), self.options)
                self.assertEqual(certificate.status, CertificateStatus.CONVERGED, certificate.message)
                self.assertLessEqual(certificate.iterations, 30)
                history = certificate.objective_history
                self.assertLess(abs(history[-1] - history[-2]), 1e-3)
                self.assertTrue(all(a >= b - 1e-3 for a, b in zip(history, history[1:])))

    def test_longer_horizon_is_not_more_expensive(self):
        """Nominelle Closed-Loop-Kosten bei N = 20 höchstens so hoch wie bei N = 10."""
        table = bench_table(self.scenario, [10, 20], closed_loop_steps=self.scenario.total_steps,
                            options=self.options)
        costs = dict(zip(table['horizon'], table['nominal_cost']))
        self.assertLessEqual(costs[20], costs[10] + 1e-6)
        self.assertTrue((table['status'] == 'converged').all())

    def test_monte_carlo_1000_samples(self):
        """Zertifikat bei N = 20: 1000 Rollouts ohne Austritt, Kollision oder Kostenverletzung."""
        problem = self.scenario.to_problem()
        certificate = scr_solve(problem, np.zeros((problem.horizon, 2)), self.options)
        self.assertTrue(certificate.certified, certificate.message)
        self.assertLessEqual(certificate.census['restriction_total'], certificate.census['bound'])
        report = monte_carlo_verify(certificate, problem, samples=1000, seed=self.scenario.seed)
        self.assertTrue(report.passed, report.to_dict())
        self.assertEqual(report.tube_exits, 0)
        self.assertEqual(report.obstacle_hits, 0)
        self.assertLessEqual(report.max_cost, certificate.cost_upper + 1e-6)


@unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
class TestVehicleOpenLoopMargin(unittest.TestCase):

    def test_init_margin_below_empirical(self):
        """Test ob die zertifizierte init-Marge der festen Steuerfolge positiv und nicht größer als die empirische ist."""
        scenario = load_scenario(VEHICLE_SCENARIO)
        problem = scenario.to_problem()
        u = open_loop_schedule(problem.horizon)
        margin = certify_margin(problem, u, 'init', scenario.to_options())
        self.assertGreater(margin.gamma, 0.0, margin.diagnostic)
        empirical = empirical_margin(problem, u, 'init', samples=200, seed=scenario.seed)
        self.assertLessEqual(margin.gamma, empirical + 1e-9)


if __name__ == '__main__':
    unittest.main()
