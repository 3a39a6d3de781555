"""Perpetuities of a +/-1 compound Poisson walk and their q-calculus closed forms."""

from .perpetuity import PerpetuityLaw, cdf, density, mellin
from .qcalc import CapExceededError, DomainError, QParams, SeriesTolerance
from .qgamma import QGammaLaw
from .rng import RngState
from .samplers import SampleBatch, draw_batch

__version__ = "0.1.0"

__all__ = [
    "CapExceededError",
    "DomainError",
    "PerpetuityLaw",
    "QGammaLaw",
    "QParams",
    "RngState",
    "SampleBatch",
    "SeriesTolerance",
    "cdf",
    "density",
    "draw_batch",
    "mellin",
]
