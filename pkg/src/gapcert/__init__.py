"""Certified spectral-gap bounds for reversible jump processes."""

from . import bounds, cheeger, chains, expr, forms, spectral
from .chains import BirthDeathSpec, LatticeChainSpec, build_fixture
from .errors import GapCertError
from .forms import PathForm, RateChain, SymmetricJumpForm

__all__ = [
    "bounds",
    "cheeger",
    "chains",
    "expr",
    "forms",
    "spectral",
    "BirthDeathSpec",
    "LatticeChainSpec",
    "PathForm",
    "RateChain",
    "SymmetricJumpForm",
    "GapCertError",
    "build_fixture",
]

__version__ = "0.1.0"
