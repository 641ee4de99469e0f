"""
Tests für Szenario-Dateien, Ergebnisausgabe und Kommandozeile.
"""

import unittest

import sys
import os
import json
import logging
import tempfile
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
os.environ.setdefault('ENABLE_FILE_LOGGING', 'false')

import numpy as np
import pandas as pd

from modules.conic import CvxpyBackend
from modules.data_models import CertificateStatus, CertifiedSolution, Tube
from modules.driver import (
    emit_results, emit_scenario, load_scenario, parse_scenario, save_scenario, tube_polylines
)
from modules.driver.results import _finite, certificate_document
from modules.exceptions import ScenarioError
from modules.simulation import nominal_rollout
from modules.utils.logger import StructuredFormatter
from main import build_parser, main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
VEHICLE_SCENARIO = os.path.join(ROOT, 'scenarios', 'ground_vehicle.scenario')
CHAIN_SCENARIO = os.path.join(ROOT, 'scenarios', 'chain_1d.scenario')
HAS_CVXPY = CvxpyBackend().available()

MINIMAL = {
    "model": {"name": "linear", "params": {"A": [[1.0]], "B_u": [[1.0]]}},
    "horizon": 3,
    "initial_state": [0.5],
}


def scenario_text(**changes) -> str:
    data = json.loads(json.dumps(MINIMAL))
    data.update(changes)
    return json.dumps(data, indent=2)


class TestScenario(unittest.TestCase):
    """Laden, Defaults und Validierung."""

    def test_load_vehicle(self):
        scenario = load_scenario(VEHICLE_SCENARIO)
        self.assertEqual(scenario.model_params['h'], 0.05)
        self.assertEqual(scenario.horizon, 20)
        self.assertEqual(len(scenario.obstacles), 2)
        problem = scenario.to_problem()
        self.assertEqual(problem.horizon, 20)
        self.assertEqual(problem.with_horizon(10).horizon, 10)

    def test_emit_is_stable(self):
        """Test ob parse(emit(s)) erneut exakt denselben Text ergibt."""
        scenario = load_scenario(CHAIN_SCENARIO)
        text = emit_scenario(scenario)
        self.assertEqual(emit_scenario(parse_scenario(text)), text)
        self.assertEqual(parse_scenario(text).horizon, scenario.horizon)

    def test_save_and_load(self):
        scenario = parse_scenario(scenario_text())
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'copy.scenario')
            save_scenario(scenario, path)
            self.assertEqual(emit_scenario(load_scenario(path)), emit_scenario(scenario))

    def test_missing_sigma_is_deterministic(self):
        """Fehlendes Σ: Einheitsmatrix und γ = 0."""
        scenario = parse_scenario(scenario_text())
        self.assertEqual(scenario.sigma_init, [[1.0]])
        self.assertEqual(scenario.gamma_init, 0.0)
        self.assertEqual(scenario.gamma_dyn, 0.0)
        self.assertEqual(scenario.control_lower, [None])

    def test_gamma_without_sigma_is_kept(self):
        """Test ob ein γ ohne zugehöriges Σ mit der Einheitsmatrix erhalten bleibt."""
        scenario = parse_scenario(scenario_text(uncertainty={"gamma_dyn": 0.7}))
        self.assertEqual(scenario.gamma_dyn, 0.7)
        self.assertEqual(scenario.sigma_dyn, [[1.0]])
        self.assertEqual(scenario.gamma_init, 0.0)
        uncertainty = scenario.to_problem().uncertainty
        self.assertEqual(uncertainty.gamma_dyn, 0.7)
        np.testing.assert_array_equal(uncertainty.sigma_at(0), np.eye(1))

    def test_stage_sigmas(self):
        """Test ob je Stufe ein eigenes Σ_t gelesen, ausgegeben und weitergereicht wird."""
        data = json.loads(emit_scenario(load_scenario(CHAIN_SCENARIO)))
        data['uncertainty']['sigma_dyn'] = [[[1.0]], [[4.0]]]
        scenario = parse_scenario(json.dumps(data))
        self.assertEqual(scenario.sigma_dyn, [[[1.0]], [[4.0]]])
        text = emit_scenario(scenario)
        self.assertEqual(emit_scenario(parse_scenario(text)), text)

        uncertainty = scenario.to_problem().uncertainty
        self.assertEqual(len(uncertainty.sigma_dyn), 2)
        self.assertEqual(uncertainty.sigma_at(0)[0, 0], 1.0)
        self.assertEqual(uncertainty.sigma_at(1)[0, 0], 4.0)
        # x_2 = w_init + w_0 + w_1: γ(1 + 1 + 2) statt 3γ
        constant = load_scenario(CHAIN_SCENARIO).to_problem().uncertainty
        self.assertAlmostEqual(float(uncertainty.support(np.ones((1, 3)), 2).value()[0]), 0.4)
        self.assertAlmostEqual(float(constant.support(np.ones((1, 3)), 2).value()[0]), 0.3)

    def test_stage_sigmas_other_horizon(self):
        """Längere Horizonte wiederholen das letzte Σ_t, kürzere schneiden ab."""
        data = json.loads(emit_scenario(load_scenario(CHAIN_SCENARIO)))
        data['uncertainty']['sigma_dyn'] = [[[1.0]], [[4.0]]]
        scenario = parse_scenario(json.dumps(data))
        longer = scenario.to_problem(4).uncertainty
        self.assertEqual([float(s[0, 0]) for s in longer.sigma_dyn], [1.0, 4.0, 4.0, 4.0])
        shorter = scenario.to_problem().with_horizon(1).uncertainty
        self.assertEqual([float(s[0, 0]) for s in shorter.sigma_dyn], [1.0])

    def test_stage_sigma_count(self):
        data = json.loads(emit_scenario(load_scenario(CHAIN_SCENARIO)))
        data['uncertainty']['sigma_dyn'] = [[[1.0]], [[4.0]], [[9.0]]]
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(data))
        self.assertEqual(ctx.exception.field, 'uncertainty.sigma_dyn')
        data['uncertainty']['sigma_dyn'] = [[[1.0]], [[-4.0]]]
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(json.dumps(data))
        self.assertEqual(ctx.exception.field, 'uncertainty.sigma_dyn[1]')

    def test_negative_radius(self):
        text = scenario_text(obstacles=[{"type": "ball", "coords": [0], "center": [2.0], "radius": -1.0}])
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(text, 'bad.scenario')
        self.assertEqual(ctx.exception.field, 'obstacles[0].radius')
        self.assertIsNotNone(ctx.exception.line)

    def test_bad_json_reports_line(self):
        """Test ob Syntaxfehler mit Zeilennummer gemeldet werden."""
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario('{\n  "horizon": 2,\n  oops\n}', 'broken.scenario')
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('broken.scenario:3', str(ctx.exception))

    def test_unknown_model(self):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(scenario_text(model={"name": "unicycle"}))
        self.assertEqual(ctx.exception.field, 'model.name')

    def test_wrong_initial_state_size(self):
        with self.assertRaises(ScenarioError):
            parse_scenario(scenario_text(initial_state=[0.0, 1.0]))

    def test_unknown_solver_field(self):
        with self.assertRaises(ScenarioError) as ctx:
            parse_scenario(scenario_text(solver={"threads": 4}))
        self.assertIn('threads', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(ScenarioError):
            load_scenario(os.path.join(ROOT, 'scenarios', 'nope.scenario'))


class TestResults(unittest.TestCase):
    """Ergebnisdateien ohne Solver."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.problem = load_scenario(CHAIN_SCENARIO).to_problem()

    def tearDown(self):
        self.tmp.cleanup()

    def certificate(self, cost_upper: float) -> CertifiedSolution:
        u = np.zeros((2, 1))
        bound = 0.1 * np.arange(1, 4, dtype=float).reshape(-1, 1)
        return CertifiedSolution(status=CertificateStatus.CONVERGED, u=u, tube=Tube(bound, -bound),
                                 gamma_init=0.1, gamma_dyn=0.1, cost_upper=cost_upper,
                                 nominal=nominal_rollout(self.problem, u), anchor=None, iterations=2)

    def test_finite(self):
        data = _finite({'a': float('inf'), 'b': [np.float64(1.5), np.nan], 'c': np.int64(3)})
        self.assertEqual(data, {'a': None, 'b': [1.5, None], 'c': 3})

    def test_headers_without_certificate(self):
        """Test ob ohne Zertifikat nur Kopfzeilen geschrieben werden."""
        written = emit_results(self.tmp.name, self.problem)
        self.assertEqual(len(written), 2)
        with open(os.path.join(self.tmp.name, 'trajectory.csv'), encoding='utf-8') as f:
            self.assertEqual(f.read().strip(), 't,x0,z_upper0,z_lower0')
        self.assertEqual(len(pd.read_csv(os.path.join(self.tmp.name, 'controls.csv'))), 0)

    def test_certificate_files(self):
        emit_results(self.tmp.name, self.problem, certificate=self.certificate(float('inf')))
        with open(os.path.join(self.tmp.name, 'certificate.json'), encoding='utf-8') as f:
            document = json.load(f)
        self.assertIsNone(document['cost_upper'])
        self.assertEqual(document['status'], 'converged')
        self.assertTrue(document['certified'])
        trajectory = pd.read_csv(os.path.join(self.tmp.name, 'trajectory.csv'))
        self.assertEqual(list(trajectory['t']), [0, 1, 2])
        np.testing.assert_allclose(trajectory['z_upper0'], [0.1, 0.2, 0.3])

    def test_certificate_document_gamma(self):
        document = certificate_document(self.certificate(4.0))
        self.assertEqual(document['gamma'], 0.1)
        self.assertEqual(document['iterations'], 2)

    def test_tube_polylines(self):
        """Fünf Punkte je Stufe, geschlossenes Rechteck."""
        tube = Tube(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0, 0.0], [1.0, 1.0]]))
        frame = tube_polylines(tube)
        self.assertEqual(len(frame), 10)
        first = frame[frame['stage'] == 0]
        self.assertEqual(tuple(first.iloc[0][['a', 'b']]), tuple(first.iloc[4][['a', 'b']]))
        self.assertEqual(tuple(first.iloc[2][['a', 'b']]), (1.0, 2.0))
        self.assertTrue(tube_polylines(None).empty)


class TestStructuredLog(unittest.TestCase):

    def test_numpy_fields_are_serialized(self):
        """Test ob custom_-Felder mit numpy-Werten als JSON geschrieben werden."""
        record = logging.LogRecord('scr_mpc', logging.INFO, __file__, 1, 'solve', None, None)
        record.custom_gamma = np.float64(0.25)
        record.custom_tube = np.array([1.0, 2.0])
        record.custom_cost = np.float32(np.inf)
        record.custom_solves = np.int64(3)
        data = json.loads(StructuredFormatter().format(record))
        self.assertEqual(data['gamma'], 0.25)
        self.assertEqual(data['tube'], [1.0, 2.0])
        self.assertEqual(data['cost'], 'inf')
        self.assertEqual(data['solves'], 3)
        self.assertEqual(data['message'], 'solve')


class TestCommandLine(unittest.TestCase):
    """Parser und Exit-Codes."""

    def setUp(self):
        self.cwd = os.getcwd()
        self.tmp = tempfile.TemporaryDirectory()
        os.chdir(self.tmp.name)

    def tearDown(self):
        os.chdir(self.cwd)
        self.tmp.cleanup()

    def write_scenario(self, **changes) -> str:
        path = os.path.join(self.tmp.name, 'test.scenario')
        with open(path, 'w', encoding='utf-8') as f:
            f.write(scenario_text(**changes))
        return path

    def test_parser(self):
        args = build_parser().parse_args(['certify', '--scenario', 'x.scenario', '--mode', 'dyn'])
        self.assertEqual(args.command, 'certify')
        self.assertEqual(args.mode, 'dyn')
        self.assertEqual(args.controls, 'zero')
        with self.assertRaises(SystemExit):
            build_parser().parse_args(['certify'])

    def test_missing_scenario_exit_code(self):
        """Test ob eine fehlende Szenario-Datei Exit-Code 4 liefert."""
        self.assertEqual(main(['solve', '--scenario', 'does-not-exist.scenario']), 4)
        with open('health.json', encoding='utf-8') as f:
            self.assertFalse(json.load(f)['success'])

    def test_open_loop_needs_two_controls(self):
        path = self.write_scenario()
        self.assertEqual(main(['certify', '--scenario', path, '--controls', 'open-loop']), 4)

    def test_certify_without_obstacles(self):
        """Ohne Hindernis ist die Marge unbeschränkt und wird als null geschrieben."""
        path = self.write_scenario(uncertainty={"sigma_init": [[1.0]], "gamma_init": 0.1})
        out = os.path.join(self.tmp.name, 'out')
        self.assertEqual(main(['certify', '--scenario', path, '--out', out, '--timing']), 0)
        with open(os.path.join(out, 'margin.json'), encoding='utf-8') as f:
            margin = json.load(f)
        self.assertIsNone(margin['gamma'])
        self.assertTrue(margin['unbounded'])
        self.assertTrue(os.path.exists(os.path.join(out, 'timing.json')))

    @unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
    def test_certify_chain(self):
        out = os.path.join(self.tmp.name, 'chain')
        self.assertEqual(main(['certify', '--scenario', CHAIN_SCENARIO, '--out', out]), 0)
        with open(os.path.join(out, 'margin.json'), encoding='utf-8') as f:
            margin = json.load(f)
        self.assertAlmostEqual(margin['gamma'], (1.0 - 1e-6) / 3.0, delta=1e-4)

    @unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
    def test_verify_chain(self):
        out = os.path.join(self.tmp.name, 'verify')
        self.assertEqual(main(['verify', '--scenario', CHAIN_SCENARIO, '--out', out, '--samples', '100']), 0)
        with open(os.path.join(out, 'monte_carlo.json'), encoding='utf-8') as f:
            report = json.load(f)
        self.assertEqual(report['tube_exits'], 0)
        self.assertEqual(report['obstacle_hits'], 0)
        self.assertEqual(report['containment_tol'], 1e-7)

    def run_twice(self, *args: str) -> tuple:
        """Führt denselben Befehl in zwei Ausgabeverzeichnisse aus."""
        outs = []
        for name in ('first', 'second'):
            out = os.path.join(self.tmp.name, name)
            self.assertEqual(main(list(args) + ['--out', out]), 0)
            outs.append(out)
        return tuple(outs)

    def assert_same_files(self, first: str, second: str) -> None:
        names = sorted(os.listdir(first))
        self.assertEqual(names, sorted(os.listdir(second)))
        self.assertIn('certificate.json', names)
        for name in names:
            with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), name)

    @unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
    def test_verify_is_reproducible(self):
        """Test ob verify mit festem Seed byte-identische Ergebnisdateien schreibt."""
        first, second = self.run_twice('verify', '--scenario', CHAIN_SCENARIO, '--seed', '0', '--samples', '100')
        self.assertIn('monte_carlo.json', os.listdir(first))
        self.assert_same_files(first, second)

    @unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
    def test_solve_is_reproducible(self):
        first, second = self.run_twice('solve', '--scenario', CHAIN_SCENARIO, '--seed', '0')
        self.assert_same_files(first, second)

    @unittest.skipUnless(HAS_CVXPY, "cvxpy nicht installiert")
    def test_verify_exact_containment(self):
        out = os.path.join(self.tmp.name, 'exact')
        main(['verify', '--scenario', CHAIN_SCENARIO, '--out', out, '--samples', '50', '--containment-tol', '0'])
        with open(os.path.join(out, 'monte_carlo.json'), encoding='utf-8') as f:
            self.assertEqual(json.load(f)['containment_tol'], 0.0)


if __name__ == '__main__':
    unittest.main()
