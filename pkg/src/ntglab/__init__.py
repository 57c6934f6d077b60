"""Normal-truncated-gamma priors, confidence-procedure risk calculus, and
numeric verification suites for the Gaussian location-scale model."""

from .blyth import BlythContext, Observation
from .ntg import LocationScale, NtGParams
from .numint import EstimateWithError
from .specfun import Tolerance

__all__ = [
    "BlythContext",
    "Observation",
    "LocationScale",
    "NtGParams",
    "EstimateWithError",
    "Tolerance",
]

__version__ = "0.1.0"
