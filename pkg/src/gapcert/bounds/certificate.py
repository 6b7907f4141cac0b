"""Certificate records shared by every bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..chains import BirthDeathSpec
from ..expr import Expr, parse_expr

__all__ = ["BoundCertificate", "DriftReport", "phi_values", "clamp_lower"]

TARGETS = ("lambda0", "lambda1", "k_prime", "h_B", "lambda0_complement")


@dataclass(frozen=True)
class BoundCertificate:
    """One bound on an eigenvalue or a Cheeger constant.

    ``inputs`` snapshots every constant that entered the formula and ``flags``
    records how it was obtained: whether the normalisation was checked, the
    rescale factor applied to the weights, and ``vacuous`` when a lower
    bound was clamped at 0 (or an upper bound is infinite).
    """

    target: str
    direction: str
    value: float
    theorem: str
    inputs: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")
        if self.direction not in ("lower", "upper"):
            raise ValueError(f"direction must be 'lower' or 'upper', got {self.direction!r}")
        flags = {"vacuous": False, **self.flags}
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "flags", flags)

    @property
    def vacuous(self) -> bool:
        return bool(self.flags.get("vacuous"))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "direction": self.direction,
            "value": self.value,
            "theorem": self.theorem,
            "inputs": {k: _plain(v) for k, v in self.inputs.items()},
            "flags": {k: _plain(v) for k, v in self.flags.items()},
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def clamp_lower(value: float):
    """``(max(value, 0), vacuous)`` for a lower-bound formula."""
    value = float(value)
    if math.isnan(value):
        return 0.0, True
    if value <= 0.0:
        return 0.0, True
    return value, False


@dataclass(frozen=True)
class DriftReport:
    """A drift quantity evaluated state by state over a window.

    ``classification`` is ``"negative-on-window"`` when every value is
    negative and the block-wise suprema do not decay towards 0 (fitted
    power-law exponent of ``|sup|`` at least ``-decay_tol``); otherwise
    ``"indeterminate"``.  A finite window only supports the limsup
    condition, it cannot prove it.
    """

    window: tuple
    states: np.ndarray
    values: np.ndarray
    sup: float
    decay_exponent: float
    classification: str
    phi: str
    note: str = "a finite window supports but does not prove the limsup condition"

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "sup": self.sup,
            "decay_exponent": self.decay_exponent,
            "classification": self.classification,
            "phi": self.phi,
            "note": self.note,
        }


def phi_values(phi, idx, params=None) -> np.ndarray:
    """Evaluate a test function given as array, callable, expression or text.

    Callables and expressions receive the integer index array ``idx``.
    """
    idx = np.asarray(idx)
    if isinstance(phi, str):
        phi = parse_expr(phi)
    if isinstance(phi, Expr):
        return phi.evaluate(idx, params or {})
    if callable(phi):
        return np.asarray(phi(idx), dtype=float)
    out = np.asarray(phi, dtype=float)
    if out.shape != idx.shape:
        raise ValueError(f"phi has shape {out.shape}, expected {idx.shape}")
    return out


def spec_params(obj) -> dict:
    return dict(obj.params) if isinstance(obj, BirthDeathSpec) else {}
