"""Lagrangian time-Taylor (Cauchy--Lagrangian) solver for 3D incompressible Euler flow."""

from .fields import AXIAL, POLAR, Geometry, LabelGrid, ScalarField, VectorField, curl, divergence, gradient, jacobian
from .presets import PRESETS, make_preset_fields
from .recursion import RecursionInput, TaylorSeries, cauchy_residual, curl_rhs, div_rhs, jacobian_residual
from .stepper import SimState, StepReport, advance, compute_coefficients, estimate_radius, run_until
from .weights import (
    EstimateConstants,
    WeightKind,
    WeightSequence,
    check_class_properties,
    denjoy_carleman,
    generating_function,
    make_weights,
    radius_from_cubic,
)

__version__ = "0.1.0"
