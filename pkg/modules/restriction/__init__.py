"""
Restriction Package: Hindernisse, Unsicherheit und Aufbau der konvexen Restriktion.
"""

from .obstacles import (
    Obstacle, BoxObstacle, BallObstacle, PolytopeObstacle, ObstacleSet,
    project_to_obstacle, obstacle_from_dict
)
from .uncertainty import check_psd, psd_sqrt, block_support, xi_support, SupportTerm, UncertaintyModel
from .problem import RobustMPCProblem
from .safety import SafetyRestriction, safety_halfspaces
from .assembly import (
    VariableLayout, RestrictionProgram, RestrictionSolution, build_envelope_constraints,
    build_selfmap_constraints, build_safety_constraints, build_cost_epigraph, constraint_count_bound,
    assemble_restriction, extract_solution
)

__all__ = [
    'Obstacle', 'BoxObstacle', 'BallObstacle', 'PolytopeObstacle', 'ObstacleSet',
    'project_to_obstacle', 'obstacle_from_dict',
    'check_psd', 'psd_sqrt', 'block_support', 'xi_support', 'SupportTerm', 'UncertaintyModel',
    'RobustMPCProblem', 'SafetyRestriction', 'safety_halfspaces',
    'VariableLayout', 'RestrictionProgram', 'RestrictionSolution', 'build_envelope_constraints',
    'build_selfmap_constraints', 'build_safety_constraints', 'build_cost_epigraph', 'constraint_count_bound',
    'assemble_restriction', 'extract_solution'
]
