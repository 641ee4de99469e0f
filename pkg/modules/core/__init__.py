"""
Core Package: Systemmodelle in Feedback-Darstellung und Trajektorien-Algebra.
"""

from .model import (
    StageModel, FeedbackModel, ContinuousFeedback, eval_basis, eval_dynamics, residual,
    jacobian_dynamics, residual_envelope, discretize_euler, identity_envelope_builder,
    control_envelope_builder, finite_difference_jacobian, validate_representation, check_sparsity
)
from .trajectory import (
    TrajectoryBundle, SensitivityBlocks, KRMatrices, rollout, nominal_from_controls,
    assemble_F, sensitivity_blocks, apply_T, build_K_R, split_plus_minus
)

__all__ = [
    'StageModel', 'FeedbackModel', 'ContinuousFeedback', 'eval_basis', 'eval_dynamics', 'residual',
    'jacobian_dynamics', 'residual_envelope', 'discretize_euler', 'identity_envelope_builder',
    'control_envelope_builder', 'finite_difference_jacobian', 'validate_representation', 'check_sparsity',
    'TrajectoryBundle', 'SensitivityBlocks', 'KRMatrices', 'rollout', 'nominal_from_controls',
    'assemble_F', 'sensitivity_blocks', 'apply_T', 'build_K_R', 'split_plus_minus'
]
