"""
Envelope Package.

Quadratische Envelope-Paare, Vertex-Enumeration über die Tube und
randomisierte Soundness-Prüfung.
"""

from .quadratic import (
    QuadraticForm, QuadraticEnvelope, bilinear_envelope, sin_envelope, cos_envelope,
    curvature_bound_envelope, trig_product_envelope, linear_envelope
)
from .vertex import TubeSlots, VertexBound, vertex_bound_constraints, vertex_extremes
from .falsify import FalsificationReport, default_domain_box, soundness_falsify

__all__ = [
    'QuadraticForm', 'QuadraticEnvelope', 'bilinear_envelope', 'sin_envelope', 'cos_envelope',
    'curvature_bound_envelope', 'trig_product_envelope', 'linear_envelope',
    'TubeSlots', 'VertexBound', 'vertex_bound_constraints', 'vertex_extremes',
    'FalsificationReport', 'default_domain_box', 'soundness_falsify'
]
