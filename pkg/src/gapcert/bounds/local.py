"""Bounds assembled from local quantities on subsets: the small-side constant
from a large set ``B``, Lyapunov-type lower bounds on local Dirichlet
eigenvalues, and the sandwich of ``lambda1`` between local eigenvalues."""

from __future__ import annotations

import numpy as np

from ..chains import BirthDeathSpec
from ..cheeger import as_form_like, local_constants
from ..errors import (
    BNotLargeEnough,
    DegeneratePhi,
    DegenerateSubset,
    EmptySubset,
    KillingPresent,
    NonpositiveDelta,
    NonpositiveGamma,
    SubsetNesting,
)
from ..forms import PathForm, apply_params
from ..spectral import dirichlet_lambda0, neumann_lambda1
from .certificate import BoundCertificate, clamp_lower, phi_values, spec_params
from .cheeger_bounds import resolve_weights

__all__ = [
    "generator_apply",
    "phi_oscillation",
    "small_side_from_local",
    "local_h_from_drift",
    "small_side_drift_bound",
    "gap_sandwich",
    "lyapunov_dirichlet_bound",
    "drift_gap_bound",
    "lyapunov_gap_bound",
]


def _indices(subset, n: int, name: str) -> np.ndarray:
    idx = np.unique(np.asarray(list(subset), dtype=int))
    if idx.size == 0:
        raise EmptySubset(f"{name} is empty")
    if idx[0] < 0 or idx[-1] >= n:
        raise EmptySubset(f"{name} has indices outside 0..{n - 1}")
    return idx


def _complement(idx: np.ndarray, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    return np.flatnonzero(mask)


def _mass(obj, idx: np.ndarray) -> float:
    if isinstance(obj, PathForm):
        return float(np.sum(np.exp(obj.log_pi[idx])))
    return float(np.sum(obj.pi[idx]))


def generator_apply(obj, f) -> np.ndarray:
    """``Omega f(i) = sum_j J_ij / pi_i (f_j - f_i) - K_i / pi_i f_i``."""
    f = np.asarray(f, dtype=float)
    if isinstance(obj, PathForm):
        out = -np.exp(obj.log_K - obj.log_pi) * f
        up = np.exp(obj.log_J - obj.log_pi[:-1])
        down = np.exp(obj.log_J - obj.log_pi[1:])
        out[:-1] += up * (f[1:] - f[:-1])
        out[1:] += down * (f[:-1] - f[1:])
        return out
    Jf = np.asarray(obj.J @ f).ravel()
    return (Jf - obj.row_mass() * f - obj.K * f) / obj.pi


def phi_oscillation(obj, phi: np.ndarray) -> float:
    """``max |phi_i - phi_j|`` over pairs that carry jump mass."""
    if isinstance(obj, PathForm):
        live = np.isfinite(obj.log_J)
        diffs = np.abs(np.diff(phi))[live]
    else:
        coo = obj.J.tocoo()
        diffs = np.abs(phi[coo.row] - phi[coo.col])
    return float(diffs.max()) if diffs.size else 0.0


def _modified_obj(obj, params, alpha: float):
    params, flags = resolve_weights(obj, params)
    params = params.with_alpha(alpha)
    return apply_params(obj, params), params, {**flags, "alpha": float(alpha)}


def _composite(h: float, k_B: float, pi_B: float, M_B: float, factor: float = 2.0) -> float:
    c = 2.0 * pi_B - 1.0
    return h * k_B * c / (k_B * c + factor * pi_B**2 * (M_B + h))


def small_side_from_local(obj, B, params=None, alpha: float = 1.0) -> BoundCertificate:
    """Lower bound on ``k^(alpha)'`` from ``k(B)``, ``M_B`` and ``h_{B^c}``.

    ``h_{B^c}`` is the infimum over ``A`` inside ``B^c`` of ``J(A x A^c) / pi(A)``
    with the complement taken in the whole space.  Needs ``pi(B) > 1/2`` and
    no killing.
    """
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("the small-side bound needs K = 0")
    b_idx = _indices(B, obj.n, "B")
    pi_B = _mass(obj, b_idx)
    if pi_B <= 0.5:
        raise BNotLargeEnough(f"pi(B) = {pi_B!r} must exceed 1/2")
    if b_idx.size < 2:
        raise DegenerateSubset("k(B) needs at least two states in B")
    c_idx = _complement(b_idx, obj.n)
    if c_idx.size == 0:
        raise DegenerateSubset("B is the whole space")
    params, flags = resolve_weights(obj, params)
    params = params.with_alpha(alpha)
    inner = local_constants(obj, B=b_idx, params=params)
    outer = local_constants(obj, B=c_idx, params=params)
    h = outer.h_B
    value, vacuous = clamp_lower(_composite(h, inner.k_B, pi_B, inner.M_B))
    inputs = {"pi_B": pi_B, "k_B": inner.k_B, "k_B_exact": inner.k_B_exact, "M_B": inner.M_B, "h_Bc": h}
    return BoundCertificate(
        "k_prime", "lower", value, "local-small-side", inputs, {**flags, "alpha": float(alpha), "vacuous": vacuous}
    )


def _phi(obj_raw, obj, phi):
    return phi_values(phi, np.arange(obj.n), spec_params(obj_raw))


def local_h_from_drift(obj, B, phi, params=None, alpha: float = 1.0) -> BoundCertificate:
    """Lower bound ``gamma_B / delta_1(phi)`` on ``h_B``.

    ``gamma_B = -max_{i in B} Omega^(alpha) phi(i)`` and ``delta_1(phi)`` is
    the largest jump of ``phi`` across an edge.  When ``B`` is small enough
    to enumerate, the exact ``h_B`` is recorded alongside.
    """
    raw = obj
    obj = as_form_like(obj)
    mod, params, flags = _modified_obj(obj, params, alpha)
    idx = _indices(B, obj.n, "B")
    phi = _phi(raw, obj, phi)
    delta1 = phi_oscillation(mod, phi)
    if not 0 < delta1 < np.inf:
        raise DegeneratePhi(f"phi oscillation {delta1!r} must be positive and finite")
    drift = generator_apply(mod, phi)[idx]
    gamma = float(-drift.max())
    if not gamma > 0:
        raise NonpositiveGamma(f"gamma_B = {gamma!r}: phi does not drift downwards on B")
    inputs = {"gamma_B": gamma, "delta_1": delta1}
    try:
        inputs["h_B_exact"] = local_constants(obj, B=idx, params=params).h_B
    except Exception:  # enumeration limits: the bound stands without the check
        pass
    return BoundCertificate("h_B", "lower", gamma / delta1, "drift-local-h", inputs, flags)


def small_side_drift_bound(obj, B, phi, params=None, alpha: float = 1.0) -> BoundCertificate:
    """Lower bound on ``k^(alpha)'`` with ``h_{B^c}`` replaced by ``gamma/delta_1``.

    The certified value substitutes the drift bound into the local
    small-side bound:

        gamma k(B) (2 pi(B) - 1)
        / (delta_1 k(B) (2 pi(B) - 1) + 2 pi(B)^2 (delta_1 M_B + gamma)).

    The same expression with ``pi(B)^2`` in place of ``2 pi(B)^2`` is
    recorded as ``single_factor_value`` for comparison; it is not certified.
    """
    raw = obj
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("the drift small-side bound needs K = 0")
    b_idx = _indices(B, obj.n, "B")
    pi_B = _mass(obj, b_idx)
    if pi_B <= 0.5:
        raise BNotLargeEnough(f"pi(B) = {pi_B!r} must exceed 1/2")
    if b_idx.size < 2:
        raise DegenerateSubset("k(B) needs at least two states in B")
    c_idx = _complement(b_idx, obj.n)
    if c_idx.size == 0:
        raise DegenerateSubset("B is the whole space")
    mod, params, flags = _modified_obj(obj, params, alpha)
    phi = _phi(raw, obj, phi)
    delta1 = phi_oscillation(mod, phi)
    if not 0 < delta1 < np.inf:
        raise DegeneratePhi(f"phi oscillation {delta1!r} must be positive and finite")
    gamma = float(-generator_apply(mod, phi)[c_idx].max())
    if not gamma > 0:
        raise NonpositiveGamma(f"gamma = {gamma!r}: phi does not drift downwards off B")
    inner = local_constants(obj, B=b_idx, params=params)
    h = gamma / delta1
    value, vacuous = clamp_lower(_composite(h, inner.k_B, pi_B, inner.M_B))
    single = _composite(h, inner.k_B, pi_B, inner.M_B, factor=1.0)
    inputs = {
        "pi_B": pi_B,
        "k_B": inner.k_B,
        "M_B": inner.M_B,
        "gamma_Bc": gamma,
        "delta_1": delta1,
        "single_factor_value": single,
    }
    return BoundCertificate("k_prime", "lower", value, "drift-small-side", inputs, {**flags, "vacuous": vacuous})


def gap_sandwich(obj, A, B, *, lambda0_complement=None, lambda1_local=None) -> dict:
    """``lambda0(A^c) / pi(A) >= lambda1 >= lower`` for ``A`` inside ``B``, with

        lower = lambda1(B) [lambda0(A^c) pi(B) - 2 M_A pi(B^c)]
                / (2 lambda1(B) + pi(B)^2 [lambda0(A^c) + 2 M_A]).

    The lower value increases in ``lambda0(A^c)`` and ``lambda1(B)``, so lower
    bounds may be passed in place of the exact values.  A negative bracket
    gives a vacuous certificate; enlarging ``B`` is the usual remedy.
    """
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("the sandwich needs K = 0")
    a_idx = _indices(A, obj.n, "A")
    b_idx = _indices(B, obj.n, "B")
    if not np.all(np.isin(a_idx, b_idx)):
        raise SubsetNesting("A must be contained in B")
    pi_A, pi_B = _mass(obj, a_idx), _mass(obj, b_idx)
    if b_idx.size == obj.n:
        raise SubsetNesting("B must leave out some mass (pi(B) < 1)")
    pi_Bc = _mass(obj, _complement(b_idx, obj.n))
    ac_idx = _complement(a_idx, obj.n)
    if lambda0_complement is None:
        lam0, lam0_src = dirichlet_lambda0(obj, ac_idx).value, "exact"
    else:
        lam0, lam0_src = float(lambda0_complement), "given"
    if lambda1_local is None:
        lam1, lam1_src = (neumann_lambda1(obj, b_idx).value if b_idx.size >= 2 else 0.0), "exact"
    else:
        lam1, lam1_src = float(lambda1_local), "given"
    M_A = local_constants(obj, A=a_idx).M_A
    inputs = {
        "pi_A": pi_A,
        "pi_B": pi_B,
        "pi_Bc": pi_Bc,
        "lambda0_Ac": lam0,
        "lambda0_Ac_source": lam0_src,
        "lambda1_B": lam1,
        "lambda1_B_source": lam1_src,
        "M_A": M_A,
    }
    num = lam1 * (lam0 * pi_B - 2.0 * M_A * pi_Bc)
    den = 2.0 * lam1 + pi_B**2 * (lam0 + 2.0 * M_A)
    lower, vacuous = clamp_lower(num / den if den > 0 else 0.0)
    flags = {"vacuous": vacuous}
    if vacuous:
        flags["hint"] = "enlarge B until lambda0(A^c) pi(B) exceeds 2 M_A pi(B^c)"
    out = {"lower": BoundCertificate("lambda1", "lower", lower, "local-sandwich", inputs, flags)}
    if lam0_src == "exact":
        out["upper"] = BoundCertificate("lambda1", "upper", lam0 / pi_A, "local-sandwich", inputs)
    return out


def lyapunov_dirichlet_bound(obj, B, phi) -> BoundCertificate:
    """``lambda0(B^c) >= delta`` with ``delta = -max_{i not in B} Omega(phi I_{B^c})(i) / phi_i``.

    ``phi`` must be positive off ``B``; its values on ``B`` are ignored.
    """
    raw = obj
    obj = as_form_like(obj)
    b_idx = _indices(B, obj.n, "B")
    out_idx = _complement(b_idx, obj.n)
    if out_idx.size == 0:
        raise EmptySubset("B^c is empty")
    phi = _phi(raw, obj, phi)
    if np.any(~(phi[out_idx] > 0)):
        raise DegeneratePhi("phi must be positive off B")
    psi = phi.copy()
    psi[b_idx] = 0.0
    ratio = generator_apply(obj, psi)[out_idx] / phi[out_idx]
    at = int(np.argmax(ratio))
    delta = float(-ratio[at])
    if not delta > 0:
        raise NonpositiveDelta(f"delta = {delta!r}: no decay off B")
    inputs = {"delta": delta, "argmax": int(out_idx[at])}
    return BoundCertificate("lambda0_complement", "lower", delta, "lyapunov-dirichlet", inputs)


def drift_gap_bound(obj, n: int, params=None) -> dict:
    """Gap lower bound from the drift of ``phi_i = i + 1`` outside ``{0..n}``.

    The drift small-side bound at ``alpha = 1/2`` and ``alpha = 1`` feeds the
    small-side Cheeger bound ``k^(1/2)'^2 / (1 + sqrt(1 - k^(1)'^2))``.  A
    birth-death spec without ``params`` uses its untruncated weights, since
    the truncated ones flatten the drift next to the top state.
    """
    obj_like = as_form_like(obj)
    if params is None and isinstance(obj, BirthDeathSpec):
        params = obj.family_weights()
    B = range(0, n + 1)
    half = small_side_drift_bound(obj, B, lambda i: i + 1.0, params, alpha=0.5)
    one = small_side_drift_bound(obj, B, lambda i: i + 1.0, params, alpha=1.0)
    kh, k1 = half.value, min(one.value, 1.0)
    value = kh**2 / (1.0 + np.sqrt(max(1.0 - k1**2, 0.0)))
    value, vacuous = clamp_lower(value)
    gap = BoundCertificate(
        "lambda1",
        "lower",
        value,
        "drift-gap",
        {"k_prime_half_lower": kh, "k_prime_one_lower": one.value, "n": int(n), "states": obj_like.n},
        {**half.flags, "vacuous": vacuous},
    )
    return {"k_prime_half": half, "k_prime_one": one, "gap": gap}


def lyapunov_gap_bound(obj, phi, A, B, *, lambda1_local=None) -> dict:
    """Gap lower bound: the Lyapunov bound on ``lambda0(A^c)`` in the sandwich.

    ``lambda1(B)`` is exact unless supplied; the Cheeger gap bound of the
    interior form on ``B`` is a valid substitute.
    """
    delta = lyapunov_dirichlet_bound(obj, A, phi)
    sandwich = gap_sandwich(obj, A, B, lambda0_complement=delta.value, lambda1_local=lambda1_local)
    low = sandwich["lower"]
    cert = BoundCertificate("lambda1", "lower", low.value, "lyapunov-gap", {**low.inputs, "delta": delta.value}, low.flags)
    return {"delta": delta, "gap": cert}
