"""Cheeger constants h, k and k' of symmetric forms.

Exact values come from subset enumeration (small state spaces), interval
enumeration (nearest-neighbour forms, where every minimiser of h and k' can be
taken to be an interval) or the leaf formula for star graphs.  Birth-death
closed forms and the co-area functionals are provided as independent checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .chains import BirthDeathSpec
from .errors import (
    DegenerateInput,
    EmptySubset,
    InvalidP,
    SubsetTooLarge,
    TooManyStates,
    UnsupportedStructure,
)
from .forms import (
    PathForm,
    SymmetricJumpForm,
    apply_params,
    tilt_measure,
)

__all__ = [
    "CheegerConstants",
    "LocalQuantities",
    "TailRatios",
    "MAX_ENUMERATION",
    "MAX_PATH_EXACT",
    "brute_force_constants",
    "path_constants",
    "star_constants",
    "cheeger_constants",
    "local_constants",
    "birth_death_kprime",
    "birth_death_k",
    "birth_death_kp",
    "functional_h",
    "functional_k",
    "functional_kprime",
    "mean_deviation_dual",
    "as_form_like",
]

MAX_ENUMERATION = 24
MAX_PATH_EXACT = 5000
_CHUNK = 1 << 15


@dataclass(frozen=True)
class CheegerConstants:
    """``h``, ``k``, ``k'`` of one (possibly modified) form.

    ``exact`` tells, per constant, whether the value is the infimum itself or
    a certified lower bound.  Witnesses are sorted index tuples, ``None`` when
    only a bound is known.
    """

    alpha: float
    h: float
    k: float
    k_prime: float
    argmin_h: tuple | None
    argmin_k: tuple | None
    argmin_kprime: tuple | None
    method: str
    exact: dict = field(default_factory=lambda: {"h": True, "k": True, "k_prime": True})
    notes: tuple = ()

    @property
    def h_vacuous(self) -> bool:
        """True when ``h = 0`` only because the whole space has no killing."""
        return self.h == 0.0 and "no killing" in " ".join(self.notes)


@dataclass(frozen=True)
class LocalQuantities:
    """Local constants of a subset pair ``A ⊆ B``."""

    A: tuple | None
    B: tuple | None
    k_B: float | None
    k_B_exact: bool
    h_B: float | None
    M_A: float | None
    M_B: float | None


@dataclass(frozen=True)
class TailRatios:
    """Tail-set ratios ``ratio[i-1]`` for ``i = 1..N`` and their infimum."""

    value: float
    ratios: np.ndarray
    argmin: int


def as_form_like(obj):
    """Accept a birth-death spec, a path form or a general form."""
    if isinstance(obj, BirthDeathSpec):
        return obj.path_form()
    if isinstance(obj, (PathForm, SymmetricJumpForm)):
        return obj
    raise TypeError(f"expected a form or a birth-death spec, got {type(obj).__name__}")


def _modified(obj, params):
    obj = as_form_like(obj)
    if params is None:
        return obj, 0.0
    return apply_params(obj, params), float(params.alpha)


def _bits(masks: np.ndarray, n: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def _witness(mask: int, n: int) -> tuple:
    return tuple(i for i in range(n) if mask >> i & 1)


def brute_force_constants(form: SymmetricJumpForm, params=None, *, cross_check: bool = True) -> CheegerConstants:
    """Exact ``h``, ``k``, ``k'`` by enumerating every subset.

    Ties go to the smallest bitmask (bit ``i`` is state ``i``).  ``k'`` is
    evaluated in both of its equivalent forms and the two must agree.
    """
    if isinstance(form, PathForm):
        form = form.to_form()
    form, alpha = _modified(form, params)
    n = form.n
    if n > MAX_ENUMERATION:
        raise TooManyStates(f"subset enumeration needs n <= {MAX_ENUMERATION}, got {n}")
    pi, K = form.pi, form.K
    Jd = form.dense_J()
    mass = Jd.sum(axis=1)
    full = (1 << n) - 1
    best = {"h": (np.inf, -1), "k": (np.inf, -1), "kp": (np.inf, -1), "kp2": (np.inf, -1)}

    def update(key, values, masks):
        if values.size == 0:
            return
        at = int(np.argmin(values))
        if values[at] < best[key][0]:
            best[key] = (float(values[at]), int(masks[at]))

    for start in range(1, full + 1, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, full + 1), dtype=np.int64)
        bits = _bits(masks, n)
        pA = bits @ pi
        pAc = (1.0 - bits) @ pi
        cut = np.maximum(bits @ mass - np.einsum("ij,ij->i", bits @ Jd, bits), 0.0)
        update("h", (cut + bits @ K) / pA, masks)
        proper = masks != full
        m, c, a, ac = masks[proper], cut[proper], pA[proper], pAc[proper]
        update("k", c / (a * ac), m)
        small = a <= 0.5
        update("kp", c[small] / a[small], m[small])
        update("kp2", c / np.minimum(a, ac), m)

    notes = []
    if n == 1:
        k_val, kp_val, wk, wkp = np.inf, np.inf, None, None
        notes.append("single state: k and k' are infima over an empty family")
    else:
        k_val, wk = best["k"][0], _witness(best["k"][1], n)
        kp_val, wkp = best["kp"][0], _witness(best["kp"][1], n)
        if cross_check and not np.isclose(kp_val, best["kp2"][0], rtol=1e-12, atol=1e-300):
            raise AssertionError(f"k' forms disagree: {kp_val!r} vs {best['kp2'][0]!r}")
    if not form.has_killing:
        notes.append("h = 0 with witness E: no killing")
    return CheegerConstants(
        alpha, best["h"][0], k_val, kp_val, _witness(best["h"][1], n), wk, wkp, "enumeration", notes=tuple(notes)
    )


def _interval_scan(log_pi, log_J, log_K, *, with_killing: bool):
    """Minimum over intervals ``[l, u]`` of boundary (+ killing) mass over
    ``pi`` mass, both unrestricted and restricted to ``pi <= 1/2``.

    Everything is kept in log space so geometric measures do not underflow.
    Returns ``((h, l, u), (kp, l, u))``.
    """
    n = log_pi.size
    left = np.concatenate(([-np.inf], log_J))  # edge into l from the left
    right = np.concatenate((log_J, [-np.inf]))  # edge out of u to the right
    half = np.log(0.5)
    best_h = (np.inf, -1, -1)
    best_kp = (np.inf, -1, -1)
    for lo in range(n):
        den = np.logaddexp.accumulate(log_pi[lo:])
        num = np.logaddexp(left[lo], right[lo:])
        if with_killing:
            num_h = np.logaddexp(num, np.logaddexp.accumulate(log_K[lo:]))
        else:
            num_h = num
        ratio_h = np.exp(num_h - den)
        at = int(np.argmin(ratio_h))
        if ratio_h[at] < best_h[0]:
            best_h = (float(ratio_h[at]), lo, lo + at)
        ok = den <= half + 1e-15
        if np.any(ok):
            ratio = np.where(ok, np.exp(num - den), np.inf)
            at = int(np.argmin(ratio))
            if ratio[at] < best_kp[0]:
                best_kp = (float(ratio[at]), lo, lo + at)
    return best_h, best_kp


def _tail_ratios(log_pi, log_J, *, two_sided: bool) -> TailRatios:
    """``J_{i-1,i} / pi([i, n))``, optionally divided by ``1 - pi_i``."""
    n = log_pi.size
    log_tail = np.logaddexp.accumulate(log_pi[::-1])[::-1][1:]
    logs = log_J - log_tail
    if two_sided:
        logs = logs - np.log1p(-np.exp(log_pi[1:]))
    ratios = np.exp(logs)
    at = int(np.argmin(ratios)) if ratios.size else -1
    return TailRatios(float(ratios[at]) if n > 1 else np.inf, ratios, at + 1)


def path_constants(path: PathForm, params=None) -> CheegerConstants:
    """Constants of a nearest-neighbour form.

    ``h`` and ``k'`` are exact: a set's ratio is at least the smallest ratio
    among its connected pieces, which are intervals with disjoint boundaries.
    ``k`` is replaced by the tail-set lower bound.
    """
    if isinstance(path, SymmetricJumpForm):
        path = PathForm.from_form(path)
    path, alpha = _modified(path, params)
    n = path.n
    if n > MAX_PATH_EXACT:
        raise TooManyStates(f"interval enumeration needs n <= {MAX_PATH_EXACT}, got {n}")
    (h, hl, hu), (kp, kl, ku) = _interval_scan(path.log_pi, path.log_J, path.log_K, with_killing=path.has_killing)
    notes = ["k is the tail-set lower bound"]
    if not path.has_killing:
        notes.append("h = 0 with witness E: no killing")
    k_low = _tail_ratios(path.log_pi, path.log_J, two_sided=True).value
    # k >= k' always; keep whichever certified lower bound is larger
    k = max(k_low, kp)
    return CheegerConstants(
        alpha,
        h,
        k,
        kp,
        tuple(range(hl, hu + 1)),
        None,
        tuple(range(kl, ku + 1)) if kl >= 0 else None,
        "intervals",
        {"h": True, "k": False, "k_prime": True},
        tuple(notes),
    )


def _star_hub(form: SymmetricJumpForm):
    coo = form.J.tocoo()
    if coo.nnz == 0 or form.n < 3:
        return None
    for hub in (int(coo.row[0]), int(coo.col[0])):
        if np.all((coo.row == hub) | (coo.col == hub)):
            return hub
    return None


def star_constants(form: SymmetricJumpForm, params=None) -> CheegerConstants:
    """Constants of a star (every jump touches one hub) without killing.

    When every leaf carries mass at most 1/2, ``k'`` is the smallest leaf
    ratio ``J_{hub,x} / pi_x``; ``k`` is bounded below by ``k'``.
    """
    form, alpha = _modified(form, params)
    hub = _star_hub(form)
    if hub is None:
        raise UnsupportedStructure("form is not a star")
    if form.has_killing:
        raise UnsupportedStructure("star constants are implemented without killing")
    leaves = np.array([x for x in range(form.n) if x != hub])
    if np.any(form.pi[leaves] > 0.5):
        raise UnsupportedStructure("a leaf carries more than half of the mass")
    w = np.asarray(form.J[hub].toarray()).ravel()[leaves]
    ratios = w / form.pi[leaves]
    at = int(np.argmin(ratios))
    kp = float(ratios[at])
    return CheegerConstants(
        alpha,
        0.0,
        kp,
        kp,
        tuple(range(form.n)),
        None,
        (int(leaves[at]),),
        "star",
        {"h": True, "k": False, "k_prime": True},
        ("k is bounded below by k'", "h = 0 with witness E: no killing"),
    )


def cheeger_constants(obj, params=None) -> CheegerConstants:
    """Best available constants: enumeration, intervals or the star formula."""
    obj = as_form_like(obj)
    if obj.n <= MAX_ENUMERATION:
        try:
            form = obj.to_form() if isinstance(obj, PathForm) else obj
            return brute_force_constants(form, params)
        except Exception:
            if not isinstance(obj, PathForm):
                raise
    if isinstance(obj, PathForm):
        return path_constants(obj, params)
    if obj.is_path():
        return path_constants(PathForm.from_form(obj), params)
    if _star_hub(obj) is not None:
        return star_constants(obj, params)
    raise TooManyStates(f"no exact method for a general form with n={obj.n}")


def _index_array(subset, n: int, name: str) -> np.ndarray:
    idx = np.unique(np.asarray(list(subset), dtype=int))
    if idx.size == 0:
        raise EmptySubset(f"{name} is empty")
    if idx[0] < 0 or idx[-1] >= n:
        raise EmptySubset(f"{name} has indices outside 0..{n - 1}")
    return idx


def _is_interval(idx: np.ndarray) -> bool:
    return bool(idx.size and idx[-1] - idx[0] + 1 == idx.size)


def _boundary_rate(obj, idx: np.ndarray) -> float:
    """``max_{i in S} J(i, S^c) / pi_i``."""
    if isinstance(obj, PathForm):
        if not _is_interval(idx):
            raise UnsupportedStructure("path forms support interval subsets only")
        lo, hi = int(idx[0]), int(idx[-1])
        out = -np.inf
        if lo > 0:
            out = max(out, obj.log_J[lo - 1] - obj.log_pi[lo])
        if hi < obj.n - 1:
            out = max(out, obj.log_J[hi] - obj.log_pi[hi])
        return float(np.exp(out))
    mask = np.zeros(obj.n, dtype=bool)
    mask[idx] = True
    out = np.asarray(obj.J[:, ~mask].sum(axis=1)).ravel()
    return float(np.max(out[mask] / obj.pi[mask]))


def _sub_form(form: SymmetricJumpForm, idx: np.ndarray) -> SymmetricJumpForm:
    """Interior form on ``idx`` with the conditioned measure."""
    pi = form.pi[idx]
    J = form.J[idx][:, idx]
    return SymmetricJumpForm(pi / pi.sum(), J)


def _sub_path(path: PathForm, lo: int, hi: int) -> PathForm:
    return PathForm(path.log_pi[lo : hi + 1], path.log_J[lo:hi])


def _h_subset(obj, idx: np.ndarray) -> float:
    """``inf_{A ⊆ S} J(A x A^c) / pi(A)`` with the full-space complement."""
    if isinstance(obj, PathForm):
        if not _is_interval(idx):
            raise UnsupportedStructure("path forms support interval subsets only")
        lo, hi = int(idx[0]), int(idx[-1])
        # boundary edges of the window act as killing on the window's ends
        log_K = np.full(hi - lo + 1, -np.inf)
        if lo > 0:
            log_K[0] = obj.log_J[lo - 1]
        if hi < obj.n - 1:
            log_K[-1] = np.logaddexp(log_K[-1], obj.log_J[hi])
        (h, _, _), _ = _interval_scan(obj.log_pi[lo : hi + 1], obj.log_J[lo:hi], log_K, with_killing=True)
        return h
    if idx.size > MAX_ENUMERATION:
        raise SubsetTooLarge(f"h_B enumeration needs |B| <= {MAX_ENUMERATION}")
    mask = np.zeros(obj.n, dtype=bool)
    mask[idx] = True
    outside = np.asarray(obj.J[:, ~mask].sum(axis=1)).ravel()[idx]
    # conditioning rescales numerator and denominator alike, so reuse the h enumeration
    pi = obj.pi[idx]
    mass = pi.sum()
    sub = SymmetricJumpForm(pi / mass, obj.J[idx][:, idx] / mass, outside / mass)
    return brute_force_constants(sub, cross_check=False).h


def local_constants(obj, A=None, B=None, params=None) -> LocalQuantities:
    """``k(B)`` on the interior form of ``B``, ``h_B`` and ``M_A``, ``M_B``.

    On path forms ``A`` and ``B`` must be intervals and ``k(B)`` is the
    tail-set lower bound; elsewhere ``k(B)`` is enumerated.
    """
    obj, _ = _modified(obj, params)
    n = obj.n
    a_idx = _index_array(A, n, "A") if A is not None else None
    b_idx = _index_array(B, n, "B") if B is not None else None
    k_B = h_B = M_B = M_A = None
    k_exact = False
    if b_idx is not None:
        M_B = _boundary_rate(obj, b_idx) if b_idx.size < n else 0.0
        h_B = _h_subset(obj, b_idx)
        if b_idx.size >= 2:
            if isinstance(obj, PathForm):
                sub = _sub_path(obj, int(b_idx[0]), int(b_idx[-1]))
                k_B = max(
                    _tail_ratios(sub.log_pi, sub.log_J, two_sided=True).value,
                    _interval_scan(sub.log_pi, sub.log_J, sub.log_K, with_killing=False)[1][0],
                )
            else:
                if b_idx.size > MAX_ENUMERATION:
                    raise SubsetTooLarge(f"k(B) enumeration needs |B| <= {MAX_ENUMERATION}")
                k_B = brute_force_constants(_sub_form(obj, b_idx)).k
                k_exact = True
    if a_idx is not None:
        M_A = _boundary_rate(obj, a_idx) if a_idx.size < n else 0.0
    return LocalQuantities(
        tuple(a_idx.tolist()) if a_idx is not None else None,
        tuple(b_idx.tolist()) if b_idx is not None else None,
        k_B,
        k_exact,
        h_B,
        M_A,
        M_B,
    )


def _bd_path(bd, alpha: float, weights=None) -> PathForm:
    path = as_form_like(bd)
    if not isinstance(path, PathForm):
        path = PathForm.from_form(path)
    if alpha == 0:
        return path
    w = (weights or path.default_weights(alpha)).with_alpha(alpha)
    return path.modified(w)


def birth_death_kprime(bd, alpha: float, weights=None) -> TailRatios:
    """``inf_i pi_i a_i / (r_i^alpha sum_{j>=i} pi_j)``, a lower bound on k'.

    ``r_i = max(q_{i-1}, q_i)`` with the truncated total rates.  The whole
    ratio sequence is returned for inspection of its asymptotics.
    """
    path = _bd_path(bd, alpha, weights)
    return _tail_ratios(path.log_pi, path.log_J, two_sided=False)


def birth_death_k(bd, alpha: float, weights=None) -> TailRatios:
    """Same ratios with the extra factor ``1 / (1 - pi_i)``; lower bound on k."""
    path = _bd_path(bd, alpha, weights)
    return _tail_ratios(path.log_pi, path.log_J, two_sided=True)


@dataclass(frozen=True)
class KpBounds:
    k_p: float
    k_p_prime: float
    alpha_p: float
    beta_p: float
    exact: CheegerConstants | None


def birth_death_kp(bd, p) -> KpBounds:
    """Tail-set lower bounds on ``k_p``, ``k_p'`` for the tilt ``p``.

    ``p`` is an array over the states or a callable of the index array.
    Exact values are added by enumeration when ``n <= 24``.
    """
    path = as_form_like(bd)
    if not isinstance(path, PathForm):
        path = PathForm.from_form(path)
    idx = np.arange(path.n)
    p = np.asarray(p(idx) if callable(p) else p, dtype=float)
    if p.shape != (path.n,) or np.any(~(p > 0)) or not np.all(np.isfinite(p)):
        raise InvalidP("p must be positive and finite on every state")
    tilted = tilt_measure(path, p)
    tp = tilted.form
    kp_prime = _tail_ratios(tp.log_pi, tp.log_J, two_sided=False).value
    kp = _tail_ratios(tp.log_pi, tp.log_J, two_sided=True).value
    exact = None
    if path.n <= MAX_ENUMERATION:
        exact = brute_force_constants(tp.to_form())
    return KpBounds(kp, kp_prime, tilted.alpha_p, tilted.beta_p, exact)


def _pair_terms(form: SymmetricJumpForm, f: np.ndarray) -> float:
    coo = form.J.tocoo()
    return float(np.sum(coo.data * np.abs(f[coo.row] - f[coo.col])))


def functional_h(form: SymmetricJumpForm, f, params=None) -> float:
    """``(1/2) sum J |df| + K(f)`` over ``pi(f)`` for ``f >= 0``."""
    form, _ = _modified(form, params)
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise DegenerateInput("f must be nonnegative")
    mean = float(form.pi @ f)
    if mean <= 0:
        raise DegenerateInput("pi(f) must be positive")
    return (0.5 * _pair_terms(form, f) + float(form.K @ f)) / mean


def functional_k(form: SymmetricJumpForm, f, params=None, normalizer: str = "pairs") -> float:
    """``sum J |df|`` over ``sum pi_x pi_y |f_x - f_y|`` (``normalizer="pairs"``)
    or over ``pi(|f - pi(f)|)`` (``normalizer="mean"``)."""
    form, _ = _modified(form, params)
    f = np.asarray(f, dtype=float)
    pi = form.pi
    if normalizer == "pairs":
        den = float(pi @ np.abs(f[:, None] - f[None, :]) @ pi)
    elif normalizer == "mean":
        den = float(pi @ np.abs(f - pi @ f))
    else:
        raise ValueError(f"unknown normalizer {normalizer!r}")
    if den <= 0:
        raise DegenerateInput("f is constant; the normaliser vanishes")
    return _pair_terms(form, f) / den


def _min_abs_deviation(f: np.ndarray, pi: np.ndarray) -> float:
    """``min_c pi(|f - c|)``, attained at a weighted median."""
    order = np.argsort(f, kind="stable")
    cdf = np.cumsum(pi[order])
    c = f[order][int(np.searchsorted(cdf, 0.5))]
    return float(pi @ np.abs(f - c))


def functional_kprime(form: SymmetricJumpForm, f, params=None) -> float:
    """``(1/2) sum J |df|`` over ``min_c pi(|f - c|)``."""
    form, _ = _modified(form, params)
    f = np.asarray(f, dtype=float)
    den = _min_abs_deviation(f, form.pi)
    if den <= 0:
        raise DegenerateInput("f is constant; the normaliser vanishes")
    return 0.5 * _pair_terms(form, f) / den


@dataclass(frozen=True)
class MeanDeviationDual:
    """``pi(|f - pi(f)|)`` and the value of its dual witness ``g0``."""

    deviation: float
    pairing: float
    g0: np.ndarray
    c0: float
    sup_distance: float


def mean_deviation_dual(f, pi) -> MeanDeviationDual:
    """Dual witness ``g0 = I_{A+} - I_{A-} - pi(A+) + pi(A-)``, ``A+ = {f >= pi(f)}``.

    ``pairing = pi(f g0)`` equals the mean absolute deviation and
    ``sup_distance = min_c ||g0 - c||_inf`` is 1 unless ``f`` is constant.
    """
    f = np.asarray(f, dtype=float)
    pi = np.asarray(pi, dtype=float)
    mean = float(pi @ f)
    plus = f >= mean
    p_plus = float(pi[plus].sum())
    p_minus = float(pi[~plus].sum())
    g0 = np.where(plus, 1.0, -1.0) - p_plus + p_minus
    c0 = 1.0 - 2.0 * p_plus
    values = np.unique(g0)
    sup_distance = 0.5 * float(values.max() - values.min())
    return MeanDeviationDual(float(pi @ np.abs(f - mean)), float(pi @ (f * g0)), g0, c0, sup_distance)
