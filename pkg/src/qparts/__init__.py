"""
qparts: parts, coexistence and composites of quantum measurements.

Observables, instruments and measurement models on finite-dimensional
Hilbert spaces, the "part of" relation between them, and a seeded suite
that checks the calculus numerically.
"""

from .effects import Effect, DensityState, make_effect, make_state
from .errors import DimensionError, LabelError, QuantumError, ValidationError
from .instruments import Instrument, QuantumOperation, luders, make_instrument, make_operation
from .maps import Surjection
from .models import MeasurementModel, make_model, model_instrument
from .observables import Observable, make_observable
from .parts import enumerate_parts, find_part_map, part_of

__version__ = "0.1.0"

__all__ = [
    "DensityState",
    "DimensionError",
    "Effect",
    "Instrument",
    "LabelError",
    "MeasurementModel",
    "Observable",
    "QuantumError",
    "QuantumOperation",
    "Surjection",
    "ValidationError",
    "enumerate_parts",
    "find_part_map",
    "luders",
    "make_effect",
    "make_instrument",
    "make_model",
    "make_observable",
    "make_operation",
    "make_state",
    "model_instrument",
    "part_of",
]
