"""
Simulation Package: SCR-Schleife, Margenzertifikate, Receding Horizon und Monte-Carlo-Verifikation.
"""

from .scr import nominal_rollout, extend_controls, scr_solve, scr_solve_continuation, certify_margin
from .monte_carlo import (
    unit_ball_samples, sample_ellipsoid, DisturbanceDraw, draw_disturbances,
    monte_carlo_verify, empirical_margin
)
from .receding_horizon import shift_primal, receding_horizon_run

__all__ = [
    'nominal_rollout', 'extend_controls', 'scr_solve', 'scr_solve_continuation', 'certify_margin',
    'unit_ball_samples', 'sample_ellipsoid', 'DisturbanceDraw', 'draw_disturbances',
    'monte_carlo_verify', 'empirical_margin',
    'shift_primal', 'receding_horizon_run'
]
