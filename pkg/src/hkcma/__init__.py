"""Hyper-Kaehler metrics from exponential-sum solutions of a linearised
Legendre-transformed complex Monge-Ampere equation."""

__version__ = "0.1.0"

from .errors import (DomainError, HKError, NearLocusError, OrientationError, RangeError,  # noqa: E402
                     SingularInputError)
from .expsum import CoordPoint, ExpSumPotential, ExpTerm, evaluate, jet  # noqa: E402
from .spectrum import Mode, SingularFamily, SpectrumData, expand, singular_family  # noqa: E402

__all__ = [
    "__version__", "HKError", "DomainError", "NearLocusError", "OrientationError", "RangeError",
    "SingularInputError", "CoordPoint", "ExpSumPotential", "ExpTerm", "evaluate", "jet", "Mode",
    "SingularFamily", "SpectrumData", "expand", "singular_family",
]
