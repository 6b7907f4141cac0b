"""Lower bounds on lambda0 and lambda1 from Cheeger constants of modified forms,
the classical Lawler-Sokal baseline and the change-of-measure bounds."""

from __future__ import annotations

import math

import numpy as np

from ..cheeger import as_form_like, cheeger_constants
from ..errors import (
    GapCertError,
    InvalidM,
    KillingPresent,
    NormalizationViolated,
    ValidityViolated,
)
from ..forms import (
    PathForm,
    _logadd,
    apply_params,
    condition_report,
    default_params,
    tilt_measure,
)
from ..spectral import lambda0_exact, lambda1_exact
from .certificate import BoundCertificate, clamp_lower, phi_values, spec_params

__all__ = [
    "resolve_weights",
    "killing_cheeger_bound",
    "gap_cheeger_bounds",
    "uniform_rate_bound",
    "jump_density",
    "lawler_sokal_bounds",
    "tilted_measure_bounds",
]


def _root(x: float) -> float:
    """``sqrt(max(x, 0))``: rounding can push ``1 - c^2`` just below 0."""
    return math.sqrt(max(x, 0.0))


def resolve_weights(obj, params=None, *, rescale: bool = True):
    """Weights with the normalisation checked, plus the flags to record.

    Without ``params`` the default ``r = max(q_i, q_j)``, ``s = q`` is used.
    Supplied weights that violate the normalisation are rescaled when
    ``rescale`` is true and rejected otherwise.
    """
    if params is None:
        params = default_params(obj)
    else:
        report = condition_report(obj, params)
        if not report.holds:
            if not rescale:
                raise NormalizationViolated(
                    f"weights give jump density {report.max_density!r} > 1 and rescaling is disabled"
                )
            params = params.with_rescale(params.rescale * report.rescale)
    return params, {"normalized": True, "rescale": float(params.rescale)}


def _modified_eigenvalue(obj, params, which: int):
    """Exact bottom eigenvalue of the fully modified form, or ``None``."""
    try:
        mod = apply_params(obj, params.with_alpha(1.0))
        return (lambda0_exact if which == 0 else lambda1_exact)(mod).value
    except GapCertError:
        return None


def killing_cheeger_bound(obj, params=None, *, rescale: bool = True, lambda0_modified=None) -> BoundCertificate:
    """Lower bound on ``lambda0`` from ``h^(1/2)`` and ``h^(1)``.

    Two values are formed: ``h^(1/2)^2 / (2 - lambda0^(1))`` and
    ``h^(1/2)^2 / (1 + sqrt(1 - h^(1)^2))``.  ``lambda0^(1)`` is the exact
    bottom of the fully modified form when it can be computed, otherwise
    ``1 - sqrt(1 - h^(1)^2)``.  The certificate carries the larger value.
    """
    obj = as_form_like(obj)
    params, flags = resolve_weights(obj, params, rescale=rescale)
    half = cheeger_constants(obj, params.with_alpha(0.5))
    one = cheeger_constants(obj, params.with_alpha(1.0))
    chained = 1.0 - _root(1.0 - one.h**2)
    source = "given"
    if lambda0_modified is None:
        lambda0_modified = _modified_eigenvalue(obj, params, 0)
        source = "exact"
    if lambda0_modified is None:
        lambda0_modified, source = chained, "chained"
    via_eigen = half.h**2 / (2.0 - min(lambda0_modified, 1.0))
    via_h = half.h**2 / (1.0 + _root(1.0 - one.h**2))
    value, vacuous = clamp_lower(max(via_eigen, via_h))
    inputs = {
        "h_half": half.h,
        "h_one": one.h,
        "lambda0_modified": lambda0_modified,
        "lambda0_modified_source": source,
        "via_lambda0_modified": via_eigen,
        "via_h_one": via_h,
    }
    return BoundCertificate("lambda0", "lower", value, "cheeger-killing", inputs, {**flags, "vacuous": vacuous})


def gap_cheeger_bounds(obj, params=None, *, rescale: bool = True, lambda1_modified=None, chained: bool = False) -> dict:
    """Lower bounds on ``lambda1`` without killing.

    ``"two_sided"``: ``(k^(1/2) / (sqrt 2 + sqrt(2 - lambda1^(1))))^2``.
    ``"small_side"``: ``k^(1/2)'^2 / (1 + sqrt(1 - k^(1)'^2))``.

    ``lambda1^(1)`` is the exact gap of the fully modified form unless
    ``chained`` is set (or it cannot be computed), in which case the Cheeger
    estimate ``1 - sqrt(1 - k^(1)'^2)`` stands in for it.
    """
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("gap bounds need K = 0")
    params, flags = resolve_weights(obj, params, rescale=rescale)
    half = cheeger_constants(obj, params.with_alpha(0.5))
    one = cheeger_constants(obj, params.with_alpha(1.0))
    source = "given"
    if lambda1_modified is None and not chained:
        lambda1_modified = _modified_eigenvalue(obj, params, 1)
        source = "exact"
    if lambda1_modified is None:
        lambda1_modified, source = 1.0 - _root(1.0 - one.k_prime**2), "chained"
    lam = min(max(lambda1_modified, 0.0), 2.0)
    two_sided = (half.k / (math.sqrt(2.0) + _root(2.0 - lam))) ** 2
    small_side = half.k_prime**2 / (1.0 + _root(1.0 - one.k_prime**2))
    base = {
        "k_half": half.k,
        "k_half_exact": half.exact["k"],
        "k_prime_half": half.k_prime,
        "k_prime_one": one.k_prime,
    }
    v1, vac1 = clamp_lower(two_sided)
    v2, vac2 = clamp_lower(small_side)
    return {
        "two_sided": BoundCertificate(
            "lambda1",
            "lower",
            v1,
            "cheeger-two-sided",
            {**base, "lambda1_modified": lambda1_modified, "lambda1_modified_source": source},
            {**flags, "vacuous": vac1},
        ),
        "small_side": BoundCertificate(
            "lambda1", "lower", v2, "cheeger-small-side", base, {**flags, "vacuous": vac2}
        ),
    }


def jump_density(obj, killing_weight: float = 0.5) -> float:
    """``max_i (J(i, E) + killing_weight * K_i) / pi_i``."""
    obj = as_form_like(obj)
    if isinstance(obj, PathForm):
        left, right = obj._side_logs()
        jump = np.exp(_logadd(left, right) - obj.log_pi)
        kill = np.exp(obj.log_K - obj.log_pi)
    else:
        jump = obj.row_mass() / obj.pi
        kill = obj.K / obj.pi
    return float(np.max(jump + killing_weight * kill))


def uniform_rate_bound(k_prime: float, M: float, form=None) -> BoundCertificate:
    """``M (1 - sqrt(1 - k'^2 / M^2))``, between ``k'^2 / 2M`` and ``k'^2 / M``.

    With ``form`` given, ``M`` is checked against its jump density.
    """
    if not k_prime > 0:
        raise InvalidM("k' must be positive")
    if not M >= k_prime:
        raise InvalidM(f"M={M!r} is below k'={k_prime!r}")
    inputs = {"k_prime": float(k_prime), "M": float(M)}
    if form is not None:
        density = jump_density(form, 0.0)
        if M < density * (1.0 - 1e-12):
            raise InvalidM(f"M={M!r} is below the jump density {density!r}")
        inputs["density"] = density
    ratio = k_prime / M
    # 1 - sqrt(1 - x) written without cancellation
    value = M * ratio**2 / (1.0 + _root(1.0 - ratio**2))
    inputs["window"] = (k_prime**2 / (2.0 * M), k_prime**2 / M)
    return BoundCertificate("lambda1", "lower", value, "uniform-rate", inputs)


def lawler_sokal_bounds(obj, M=None, *, kappa: float = 1.0) -> dict:
    """Classical bounds with a uniform rate bound ``M``.

    ``killing_lower``: ``h^2 / 2M``; ``killing_upper``: ``h`` (when exact).
    Without killing also ``gap_lower``: ``max(kappa k^2 / 8M, k'^2 / 2M)``
    and ``gap_upper``: ``k`` (when ``k`` is exact).
    """
    obj = as_form_like(obj)
    density = jump_density(obj, 0.5)
    if M is None:
        M = density
    elif M < density * (1.0 - 1e-12):
        raise InvalidM(f"M={M!r} is below the density {density!r}")
    if not M > 0:
        raise InvalidM("M must be positive")
    c = cheeger_constants(obj)
    inputs = {"h": c.h, "k": c.k, "k_prime": c.k_prime, "M": float(M), "kappa": float(kappa)}
    out = {}
    v, vac = clamp_lower(c.h**2 / (2.0 * M))
    out["killing_lower"] = BoundCertificate("lambda0", "lower", v, "lawler-sokal-killing", inputs, {"vacuous": vac})
    if c.exact["h"]:
        out["killing_upper"] = BoundCertificate("lambda0", "upper", c.h, "cheeger-upper-killing", inputs)
    if not obj.has_killing:
        first = kappa * c.k**2 / (8.0 * M)
        second = c.k_prime**2 / (2.0 * M)
        v, vac = clamp_lower(max(first, second))
        out["gap_lower"] = BoundCertificate(
            "lambda1",
            "lower",
            v,
            "lawler-sokal-gap",
            {**inputs, "via_k": first, "via_k_prime": second},
            {"vacuous": vac},
        )
        if c.exact["k"]:
            out["gap_upper"] = BoundCertificate("lambda1", "upper", c.k, "cheeger-upper-gap", inputs)
    return out


def tilted_measure_bounds(obj, p, *, kappa: float = 1.0) -> dict:
    """Bounds after replacing ``pi`` by ``pi_p = p pi / beta_p``.

    The tilted form ``(pi_p, J / beta_p, K / beta_p)`` has jump density
    ``q_i / p_i``, so it is normalised when ``max q_i / p_i <= 1``.  With
    ``alpha_p = min p`` the certificates are

    * ``"spectral_lambda0"``, ``"spectral_lambda1"``: ``alpha_p`` times the
      exact eigenvalue of the tilted form;
    * ``"killing"``: ``alpha_p (1 - sqrt(1 - h_p^2))``;
    * ``"gap"``: ``max(kappa/8 alpha_p k_p^2, alpha_p (1 - sqrt(1 - k_p'^2)))``.

    ``p`` may be an array, a callable of the index array or an expression.
    """
    params = spec_params(obj)
    obj = as_form_like(obj)
    p_vals = phi_values(p, np.arange(obj.n), params)
    tilt = tilt_measure(obj, p_vals)
    if not tilt.valid:
        raise ValidityViolated(f"max q_i / p_i = {tilt.max_rate_ratio!r} exceeds 1")
    T = tilt.form
    a = tilt.alpha_p
    c = cheeger_constants(T)
    base = {
        "alpha_p": a,
        "beta_p": tilt.beta_p,
        "max_rate_ratio": tilt.max_rate_ratio,
        "h_p": c.h,
        "k_p": c.k,
        "k_p_prime": c.k_prime,
        "kappa": float(kappa),
    }
    flags = {"normalized": True, "rescale": 1.0}
    out = {}
    lam0 = lambda0_exact(T).value
    v, vac = clamp_lower(a * lam0)
    out["spectral_lambda0"] = BoundCertificate(
        "lambda0", "lower", v, "tilted-spectral", {**base, "lambda_p": lam0}, {**flags, "vacuous": vac}
    )
    v, vac = clamp_lower(a * c.h**2 / (1.0 + _root(1.0 - c.h**2)))
    out["killing"] = BoundCertificate("lambda0", "lower", v, "tilted-killing", base, {**flags, "vacuous": vac})
    if not T.has_killing:
        lam1 = lambda1_exact(T).value
        v, vac = clamp_lower(a * lam1)
        out["spectral_lambda1"] = BoundCertificate(
            "lambda1", "lower", v, "tilted-spectral", {**base, "lambda_p": lam1}, {**flags, "vacuous": vac}
        )
        first = kappa / 8.0 * a * c.k**2
        second = a * c.k_prime**2 / (1.0 + _root(1.0 - c.k_prime**2))
        v, vac = clamp_lower(max(first, second))
        out["gap"] = BoundCertificate(
            "lambda1",
            "lower",
            v,
            "tilted-gap",
            {**base, "via_k_p": first, "via_k_p_prime": second},
            {**flags, "vacuous": vac},
        )
    return out
