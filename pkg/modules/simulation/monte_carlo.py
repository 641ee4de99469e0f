"""
Monte-Carlo-Verifikation von Zertifikaten.

Störungen werden aus den Ellipsoiden {w0 + γ Σ^{1/2} v : ‖v‖ <= 1} gezogen, zur Hälfte
auf dem Rand und zur Hälfte gleichverteilt im Inneren. Jede Stichprobe hat einen
eigenen Seed (SeedSequence.spawn), die Reihenfolge der Ergebnisse ist fest.
"""

from typing import List, Optional, Tuple, Union
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from config import VERIFY_CONFIG
from ..core.trajectory import rollout
from ..data_models import CertifiedSolution, MarginMode, VerificationReport
from ..exceptions import InputError, NonFiniteStateError
from ..restriction import RobustMPCProblem, psd_sqrt
from ..utils.logger import logger


# === STICHPROBEN ===
def unit_ball_samples(dim: int, count: int, boundary: bool, rng: np.random.Generator) -> np.ndarray:
    """Punkte auf der Einheitssphäre oder gleichverteilt in der Einheitskugel, (count, dim)."""
    if dim == 0:
        return np.zeros((count, 0))
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    directions /= np.where(norms > 0, norms, 1.0)
    if boundary:
        return directions
    radii = rng.random((count, 1)) ** (1.0 / dim)
    return directions * radii


def sample_ellipsoid(center: np.ndarray, sigma: np.ndarray, gamma: float, count: int,
                     boundary: bool, rng: np.random.Generator) -> np.ndarray:
    """
    Stichproben aus {center + γ Σ^{1/2} v : ‖v‖ <= 1}.

    Args:
        boundary: True = nur Randpunkte, False = gleichverteilt im Inneren

    Returns:
        (count, dim)
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    unit = unit_ball_samples(center.shape[0], count, boundary, rng)
    return center + gamma * unit @ psd_sqrt(sigma).T


@dataclass
class DisturbanceDraw:
    """Einheitsstichproben v_init (n,) und v_t (N, r) einer Realisierung."""
    v_init: np.ndarray
    v_dyn: np.ndarray

    def realize(self, problem: RobustMPCProblem, gamma_init: float, gamma_dyn: float,
                roots: Tuple[np.ndarray, List[np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
        """Skaliert auf die Ellipsoide: (w_init, w) mit w (N, r)."""
        N = problem.horizon
        root_init, roots_dyn = roots
        uncertainty = problem.uncertainty
        w_init = uncertainty.w_init_nominal + gamma_init * root_init @ self.v_init
        w = uncertainty.nominal_disturbances(N).copy()
        for t in range(N):
            w[t] += gamma_dyn * roots_dyn[t] @ self.v_dyn[t]
        return w_init, w


def _ellipsoid_roots(problem: RobustMPCProblem) -> Tuple[np.ndarray, List[np.ndarray]]:
    uncertainty = problem.uncertainty
    return (psd_sqrt(uncertainty.sigma_init),
            [psd_sqrt(uncertainty.sigma_at(t)) for t in range(problem.horizon)])


def draw_disturbances(problem: RobustMPCProblem, samples: int, seed: int,
                      boundary_fraction: float = VERIFY_CONFIG['boundary_fraction']) -> List[DisturbanceDraw]:
    """Eine Einheitsstichprobe pro Realisierung, die ersten boundary_fraction·samples auf dem Rand."""
    n, r, N = problem.model.n, problem.model.r, problem.horizon
    boundary_count = int(round(samples * boundary_fraction))
    draws = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(samples)):
        rng = np.random.default_rng(child)
        on_boundary = i < boundary_count
        draws.append(DisturbanceDraw(
            v_init=unit_ball_samples(n, 1, on_boundary, rng)[0],
            v_dyn=unit_ball_samples(r, N, on_boundary, rng),
        ))
    return draws


# === VERIFIKATION ===
@dataclass
class _SampleResult:
    tube_excess: float
    exit_stage: Optional[int]
    obstacle_hit: bool
    cost: float


def _check_sample(problem: RobustMPCProblem, certificate: CertifiedSolution, w_init: np.ndarray,
                  w: np.ndarray, tol: float) -> _SampleResult:
    model = problem.model
    N = problem.horizon
    try:
        x = rollout(model, w_init, certificate.u, w)
    except NonFiniteStateError as e:
        return _SampleResult(float('inf'), e.stage, True, float('inf'))

    z = np.array([model.C(t) @ x[t] for t in range(N + 1)])
    tube = certificate.tube
    per_stage = np.maximum(np.max(z - tube.z_upper, axis=1), np.max(tube.z_lower - z, axis=1))
    exits = np.flatnonzero(per_stage > tol)
    hit = problem.obstacles.first_hit(x, range(1, N + 1)) is not None
    return _SampleResult(float(np.max(per_stage)), int(exits[0]) if exits.size else None, hit,
                         problem.cost(x, certificate.u))


def monte_carlo_verify(certificate: CertifiedSolution, problem: RobustMPCProblem,
                       samples: int = VERIFY_CONFIG['samples'], seed: int = 0,
                       gamma_scale: float = 1.0, max_workers: Optional[int] = None,
                       containment_tol: Optional[float] = None) -> VerificationReport:
    """
    Prüft ein Zertifikat empirisch: Tube-Austritte, Kollisionen, Kosten über c^u.

    Args:
        certificate: Ergebnis von scr_solve
        samples: Anzahl Realisierungen (>= 1)
        gamma_scale: skaliert die Radien (Stresstest über das Zertifikat hinaus)
        containment_tol: zulässiger Überstand über die Tube-Grenzen; Standard aus VERIFY_CONFIG
            (Rundung des Conic-Solvers), 0.0 = exakte Prüfung

    Raises:
        InputError: samples < 1 oder Zertifikat ohne Tube
    """
    if samples < 1:
        raise InputError(f"Monte Carlo verification needs samples >= 1, got {samples}")
    if not certificate.certified or certificate.u is None:
        raise InputError(f"Certificate has status {certificate.status.value} and no tube to verify")

    tol = VERIFY_CONFIG['containment_tol'] if containment_tol is None else float(containment_tol)
    if tol < 0:
        raise InputError(f"containment_tol must be >= 0, got {tol}")
    cost_tol = VERIFY_CONFIG['cost_tol']
    gamma_init = certificate.gamma_init * gamma_scale
    gamma_dyn = certificate.gamma_dyn * gamma_scale
    roots = _ellipsoid_roots(problem)
    draws = draw_disturbances(problem, samples, seed)

    def check(draw: DisturbanceDraw) -> _SampleResult:
        w_init, w = draw.realize(problem, gamma_init, gamma_dyn, roots)
        return _check_sample(problem, certificate, w_init, w, tol)

    workers = max_workers or VERIFY_CONFIG['max_workers']
    with logger.track_performance(f"Monte Carlo verification ({samples} samples)"):
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(check, draws))

    report = VerificationReport(samples=samples, seed=seed, cost_upper=certificate.cost_upper,
                                containment_tol=tol)
    for result in results:
        if result.exit_stage is not None:
            report.tube_exits += 1
            if report.first_exit_stage is None or result.exit_stage < report.first_exit_stage:
                report.first_exit_stage = result.exit_stage
        report.obstacle_hits += int(result.obstacle_hit)
        if certificate.cost_upper is not None and result.cost > certificate.cost_upper + cost_tol:
            report.cost_violations += 1
        report.max_cost = max(report.max_cost, result.cost)
        report.worst_tube_excess = max(report.worst_tube_excess, result.tube_excess)

    if report.passed:
        logger.info(f"Monte Carlo: {samples} samples, no violations (max cost {report.max_cost:.6g})")
    else:
        logger.warning(f"Monte Carlo: {report.tube_exits} tube exits, {report.obstacle_hits} obstacle hits, "
                       f"{report.cost_violations} cost violations in {samples} samples")
    return report


# === EMPIRISCHE MARGE ===
def _mode_gammas(mode: MarginMode, gamma: float) -> Tuple[float, float]:
    if mode == MarginMode.INIT:
        return gamma, 0.0
    if mode == MarginMode.DYNAMICS:
        return 0.0, gamma
    return gamma, gamma


def empirical_margin(problem: RobustMPCProblem, u: np.ndarray, mode: Union[MarginMode, str],
                     samples: int = VERIFY_CONFIG['samples'], seed: int = 0,
                     steps: int = VERIFY_CONFIG['bisection_steps'], gamma_max: float = 1e6) -> float:
    """
    Kleinstes γ, bei dem eine Stichprobe ein Hindernis trifft (Bisektion).

    Für alle γ werden dieselben Einheitsstichproben verwendet. Da Stichproben den
    schlimmsten Fall höchstens verfehlen, liegt das Ergebnis nicht unter der wahren
    Marge. inf, wenn bis gamma_max keine Kollision auftritt.
    """
    mode = MarginMode.parse(mode) if isinstance(mode, str) else mode
    N = problem.horizon
    u = np.asarray(u, dtype=float).reshape(N, problem.model.m)
    roots = _ellipsoid_roots(problem)
    draws = draw_disturbances(problem, samples, seed)
    stages = range(1, N + 1)

    def collides(gamma: float) -> bool:
        gamma_init, gamma_dyn = _mode_gammas(mode, gamma)
        for draw in draws:
            w_init, w = draw.realize(problem, gamma_init, gamma_dyn, roots)
            try:
                x = rollout(problem.model, w_init, u, w)
            except NonFiniteStateError:
                return True
            if problem.obstacles.first_hit(x, stages) is not None:
                return True
        return False

    if collides(0.0):
        return 0.0

    low, high = 0.0, 1.0
    while not collides(high):
        low, high = high, 2.0 * high
        if high > gamma_max:
            logger.info(f"No collision up to gamma={gamma_max:g}, empirical margin unbounded")
            return float('inf')

    for _ in range(steps):
        mid = 0.5 * (low + high)
        if collides(mid):
            high = mid
        else:
            low = mid

    logger.debug(f"Empirical margin ({mode.value}): in [{low:.6g}, {high:.6g}]")
    return high


__all__ = [
    'unit_ball_samples', 'sample_ellipsoid', 'DisturbanceDraw', 'draw_disturbances',
    'monte_carlo_verify', 'empirical_margin'
]
