"""Certified lower and upper bounds on ``lambda0`` and ``lambda1``."""

from .certificate import BoundCertificate, DriftReport, clamp_lower, phi_values
from .cheeger_bounds import (
    gap_cheeger_bounds,
    jump_density,
    killing_cheeger_bound,
    lawler_sokal_bounds,
    resolve_weights,
    tilted_measure_bounds,
    uniform_rate_bound,
)
from .drift import (
    DECAY_TOL,
    MinimaxResult,
    ProbeResult,
    integrability_probe,
    lattice_drift,
    lyapunov_ratio,
    minimax_crossing,
    moment_upper_bound,
    normalized_drift,
)
from .local import (
    drift_gap_bound,
    gap_sandwich,
    generator_apply,
    local_h_from_drift,
    lyapunov_dirichlet_bound,
    lyapunov_gap_bound,
    phi_oscillation,
    small_side_drift_bound,
    small_side_from_local,
)

__all__ = [
    "BoundCertificate",
    "DriftReport",
    "MinimaxResult",
    "ProbeResult",
    "DECAY_TOL",
    "clamp_lower",
    "phi_values",
    "resolve_weights",
    "jump_density",
    "killing_cheeger_bound",
    "gap_cheeger_bounds",
    "uniform_rate_bound",
    "lawler_sokal_bounds",
    "tilted_measure_bounds",
    "small_side_from_local",
    "local_h_from_drift",
    "small_side_drift_bound",
    "gap_sandwich",
    "lyapunov_dirichlet_bound",
    "drift_gap_bound",
    "lyapunov_gap_bound",
    "generator_apply",
    "phi_oscillation",
    "normalized_drift",
    "lattice_drift",
    "lyapunov_ratio",
    "integrability_probe",
    "moment_upper_bound",
    "minimax_crossing",
]
