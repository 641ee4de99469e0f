"""
Models Package: konkrete Systeme in Feedback-Darstellung.
"""

from .ground_vehicle import ground_vehicle_model, vehicle_continuous, open_loop_schedule
from .linear import linear_model, linear_stage
from .registry import ModelRegistry, create_model

__all__ = [
    'ground_vehicle_model', 'vehicle_continuous', 'open_loop_schedule',
    'linear_model', 'linear_stage', 'ModelRegistry', 'create_model'
]
