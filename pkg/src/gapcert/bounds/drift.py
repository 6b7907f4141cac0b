"""Drift quantities on windows, the exponential-integrability probe and the
upper bound on lambda1 built from it."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from ..chains import BirthDeathSpec, LatticeChainSpec
from ..cheeger import as_form_like
from ..errors import (
    DegeneratePhi,
    IndeterminateProbe,
    InvalidParams,
    KillingPresent,
    PreconditionViolated,
    WindowOutOfRange,
)
from ..expr import Expr, parse_expr
from ..forms import PathForm
from .certificate import BoundCertificate, DriftReport, phi_values, spec_params
from .cheeger_bounds import resolve_weights
from .local import generator_apply

__all__ = [
    "normalized_drift",
    "lattice_drift",
    "lyapunov_ratio",
    "ProbeResult",
    "integrability_probe",
    "moment_upper_bound",
    "MinimaxResult",
    "minimax_crossing",
    "DECAY_TOL",
]

DECAY_TOL = 0.1
_BLOCKS = 8


def _window(window, limit=None):
    try:
        lo, hi = (int(v) for v in window)
    except (TypeError, ValueError):
        raise WindowOutOfRange(f"window must be a pair of integers, got {window!r}") from None
    if lo < 0 or hi < lo:
        raise WindowOutOfRange(f"window [{lo}, {hi}] is empty or negative")
    if limit is not None and hi > limit:
        raise WindowOutOfRange(f"window end {hi} is beyond the last state {limit}")
    return lo, hi


def _classify(sizes: np.ndarray, values: np.ndarray, decay_tol: float):
    """Sup, fitted decay exponent of the block suprema, and the label."""
    sup = float(values.max())
    if not sup < 0:
        return sup, float("nan"), "indeterminate"
    x = np.log1p(sizes.astype(float))
    if x[-1] - x[0] < np.log(2.0):
        return sup, 0.0, "negative-on-window"
    edges = np.linspace(x[0], x[-1], _BLOCKS + 1)
    mids, sups = [], []
    for k in range(_BLOCKS):
        sel = (x >= edges[k]) & (x <= edges[k + 1])
        if np.any(sel):
            mids.append(0.5 * (edges[k] + edges[k + 1]))
            sups.append(values[sel].max())
    if len(mids) < 2:
        return sup, 0.0, "negative-on-window"
    slope = float(np.polyfit(mids, np.log(-np.asarray(sups)), 1)[0])
    label = "negative-on-window" if slope >= -decay_tol else "indeterminate"
    return sup, slope, label


def _bd_rates(bd: BirthDeathSpec, i: np.ndarray):
    """Untruncated ``(a_i, b_i)``, so windows may run past the truncation."""
    return bd.death(i), bd.birth(i)


def normalized_drift(chain, window, *, decay_tol: float = DECAY_TOL) -> DriftReport:
    """``sum_j q_ij / sqrt(q_i v q_j) (j - i)`` on the states of ``window``.

    A ``BirthDeathSpec`` is evaluated from its untruncated rate expressions;
    a finite form uses its own rates and the window must fit inside it.
    """
    if isinstance(chain, BirthDeathSpec):
        lo, hi = _window(window)
        i = np.arange(lo, hi + 1)
        a, b = _bd_rates(chain, i)
        a_prev, b_prev = _bd_rates(chain, np.maximum(i - 1, 0))
        a_next, b_next = _bd_rates(chain, i + 1)
        q, q_prev, q_next = a + b, a_prev + b_prev, a_next + b_next
        with np.errstate(divide="ignore", invalid="ignore"):
            down = np.where(a > 0, a / np.sqrt(np.maximum(q, q_prev)), 0.0)
        values = b / np.sqrt(np.maximum(q, q_next)) - down
        states = i
    else:
        obj = as_form_like(chain)
        if isinstance(obj, PathForm):
            obj = obj.to_form()
        lo, hi = _window(window, obj.n - 1)
        states = np.arange(lo, hi + 1)
        q = obj.row_mass() / obj.pi
        coo = obj.J.tocoo()
        rate = coo.data / obj.pi[coo.row]
        terms = rate / np.sqrt(np.maximum(q[coo.row], q[coo.col])) * (coo.col - coo.row)
        values = np.bincount(coo.row, weights=terms, minlength=obj.n)[states]
    sup, slope, label = _classify(states, values, decay_tol)
    return DriftReport((lo, hi), states, values, sup, slope, label, "i")


def _lattice_rates(lattice: LatticeChainSpec, sites: np.ndarray) -> dict:
    env = {f"i{k + 1}": sites[:, k] for k in range(lattice.d)}
    norm = np.abs(sites).sum(axis=1)
    out = {}
    for disp, rule in lattice.rules.items():
        vals = rule.evaluate(norm, lattice.params, env)
        if np.any(vals < 0):
            raise InvalidParams(f"negative rate for displacement {disp}")
        out[disp] = vals
    return out


def _shell_sites(d: int, lo: int, hi: int) -> np.ndarray:
    if hi > 200:
        raise WindowOutOfRange("lattice windows are limited to |i| <= 200")
    axis = np.arange(-hi, hi + 1)
    sites = np.array(list(itertools.product(axis, repeat=d)), dtype=int)
    norm = np.abs(sites).sum(axis=1)
    keep = (norm >= lo) & (norm <= hi)
    return sites[keep][np.argsort(norm[keep], kind="stable")]


def lattice_drift(lattice: LatticeChainSpec, window, *, decay_tol: float = DECAY_TOL) -> DriftReport:
    """Drift of ``phi_i = sum_k |i_k| v R + 1`` normalised by ``sqrt(q_i v q_j)``,
    over the sites with ``lo <= |i|_1 <= hi`` and untruncated rules."""
    lo, hi = _window(window)
    sites = _shell_sites(lattice.d, lo, hi)
    R = lattice.R
    rates = _lattice_rates(lattice, sites)
    q = sum(rates.values())
    values = np.zeros(len(sites))
    psi = np.maximum(np.abs(sites), R).sum(axis=1)
    for disp, vals in rates.items():
        target = sites + np.asarray(disp)
        q_t = sum(_lattice_rates(lattice, target).values())
        step = np.maximum(np.abs(target), R).sum(axis=1) - psi
        scale = np.sqrt(np.maximum(q, q_t))
        values += np.where(vals > 0, vals / np.where(scale > 0, scale, 1.0), 0.0) * step
    sizes = np.abs(sites).sum(axis=1)
    sup, slope, label = _classify(sizes, values, decay_tol)
    return DriftReport((lo, hi), sizes, values, sup, slope, label, f"sum_k |i_k| v {R} + 1")


def lyapunov_ratio(chain, phi, window, *, decay_tol: float = DECAY_TOL) -> DriftReport:
    """``Omega phi / phi`` on the window.

    Birth-death specs use untruncated rates; lattice specs take ``phi`` as an
    expression in ``i`` (the ``l1`` norm) and ``i1..id``; finite forms use
    their own generator.
    """
    label_phi = str(phi) if isinstance(phi, (str, Expr)) else getattr(phi, "__name__", "phi")
    if isinstance(chain, BirthDeathSpec):
        lo, hi = _window(window)
        i = np.arange(lo, hi + 1)
        a, b = _bd_rates(chain, i)
        p = chain.params
        f = phi_values(phi, i, p)
        f_prev = phi_values(phi, np.maximum(i - 1, 0), p)
        f_next = phi_values(phi, i + 1, p)
        if np.any(~(f > 0)):
            raise DegeneratePhi("phi must be positive on the window")
        values = (np.where(a > 0, a * (f_prev - f), 0.0) + b * (f_next - f)) / f
        states = i
    elif isinstance(chain, LatticeChainSpec):
        lo, hi = _window(window)
        sites = _shell_sites(chain.d, lo, hi)
        expr = phi if isinstance(phi, Expr) else parse_expr(str(phi), ("i",) + tuple(f"i{k + 1}" for k in range(chain.d)))

        def ev(x):
            env = {f"i{k + 1}": x[:, k] for k in range(chain.d)}
            return expr.evaluate(np.abs(x).sum(axis=1), chain.params, env)

        f = ev(sites)
        if np.any(~(f > 0)):
            raise DegeneratePhi("phi must be positive on the window")
        drift = np.zeros(len(sites))
        for disp, vals in _lattice_rates(chain, sites).items():
            drift += vals * (ev(sites + np.asarray(disp)) - f)
        values = drift / f
        states = np.abs(sites).sum(axis=1)
    else:
        obj = as_form_like(chain)
        lo, hi = _window(window, obj.n - 1)
        f = phi_values(phi, np.arange(obj.n))
        if np.any(~(f[lo : hi + 1] > 0)):
            raise DegeneratePhi("phi must be positive on the window")
        values = (generator_apply(obj, f) / np.where(f > 0, f, 1.0))[lo : hi + 1]
        states = np.arange(lo, hi + 1)
    sup, slope, label = _classify(states, values, decay_tol)
    return DriftReport((lo, hi), states, values, sup, slope, label, label_phi)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the integrability probe for one ``eps``.

    ``raabe`` holds ``i (t_i / t_{i+1} - 1)`` at the sampled points of the
    decisive tail; the series converges when these stay above ``1 + theta``
    and diverges when they stay below ``1 - theta``.
    """

    classification: str
    eps: float
    sample_points: tuple
    raabe: tuple

    def to_dict(self) -> dict:
        return {"classification": self.classification, "eps": self.eps}


def integrability_probe(
    bd: BirthDeathSpec,
    phi,
    eps: float,
    *,
    theta: float = 0.1,
    lo: float = 1e3,
    hi: float = 1e30,
    samples: int = 271,
    dps: int = 60,
) -> ProbeResult:
    """Classify ``sum_i mu_i exp(eps phi_i)`` as converging or diverging.

    Raabe's test on the term ratio ``t_i / t_{i+1} = a_{i+1} / b_i *
    exp(-eps (phi_{i+1} - phi_i))``, evaluated with mpmath at points spaced
    geometrically in ``[lo, hi]``.  The decision uses the last third of the
    points; mixed evidence gives ``"indeterminate"``.  ``eps = 0`` converges
    outright since ``pi`` is a probability measure.
    """
    if eps < 0:
        raise InvalidParams("eps must be nonnegative")
    if eps == 0:
        return ProbeResult("converges", 0.0, (), ())
    expr = phi if isinstance(phi, Expr) else parse_expr(str(phi))
    params = bd.params
    points = np.unique(np.round(np.geomspace(lo, hi, samples)))
    tail = points[len(points) * 2 // 3 :]
    values = []
    with mpmath.workdps(dps):
        e = mpmath.mpf(eps)
        for x in tail:
            i = int(x)
            a_next = bd.a_expr.evaluate_mp(i + 1, params)
            b_i = bd.b_expr.evaluate_mp(i, params)
            if b_i <= 0:
                raise InvalidParams(f"birth rate vanishes at i={i}")
            step = expr.evaluate_mp(i + 1, params) - expr.evaluate_mp(i, params)
            ratio = a_next / b_i * mpmath.exp(-e * step)
            values.append(float(i * (ratio - 1)))
    values = np.asarray(values)
    if np.all(values > 1.0 + theta):
        label = "converges"
    elif np.all(values < 1.0 - theta):
        label = "diverges"
    else:
        label = "indeterminate"
    return ProbeResult(label, float(eps), tuple(int(v) for v in tail), tuple(values.tolist()))


def _edge_table(obj, phi: np.ndarray, params):
    """Per-edge ``|dphi|^2 r`` for the weighted variant."""
    if isinstance(obj, PathForm):
        r = np.exp(params.log_r) * params.rescale
        live = np.isfinite(obj.log_J)
        return (np.diff(phi) ** 2 * r)[live]
    coo = obj.J.tocoo()
    r = np.asarray(params.r_eff[coo.row, coo.col]).ravel()
    return (phi[coo.row] - phi[coo.col]) ** 2 * r


def _rate_table(obj, phi: np.ndarray) -> np.ndarray:
    """Per-state ``sum_j q_ij (phi_i - phi_j)^2``."""
    if isinstance(obj, PathForm):
        out = np.zeros(obj.n)
        d2 = np.diff(phi) ** 2
        out[:-1] += np.exp(obj.log_J - obj.log_pi[:-1]) * d2
        out[1:] += np.exp(obj.log_J - obj.log_pi[1:]) * d2
        return out
    coo = obj.J.tocoo()
    terms = coo.data / obj.pi[coo.row] * (phi[coo.row] - phi[coo.col]) ** 2
    return np.bincount(coo.row, weights=terms, minlength=obj.n)


def _far_edges(bd: BirthDeathSpec, phi, variant: str) -> float:
    """Largest edge term on geometric samples beyond the truncation level."""
    i = np.unique(np.round(np.geomspace(bd.N, max(1e9, 10.0 * bd.N), 400))).astype(np.int64)
    a, b = _bd_rates(bd, i)
    a1, b1 = _bd_rates(bd, i + 1)
    d2 = (phi_values(phi, i + 1, bd.params) - phi_values(phi, i, bd.params)) ** 2
    if variant == "weights":
        return float(np.max(d2 * np.maximum(a + b, a1 + b1)))
    d2_prev = (phi_values(phi, i, bd.params) - phi_values(phi, i - 1, bd.params)) ** 2
    return float(np.max(b * d2 + a * d2_prev))


def moment_upper_bound(
    obj,
    phi,
    eps_star=None,
    *,
    params=None,
    variant: str = "weights",
    eps_grid=(1e-3, 1e-2, 0.1, 1.0, 10.0),
) -> BoundCertificate:
    """Upper bound ``delta_2(phi) / 4 * eps*^2`` on ``lambda1``.

    ``eps*`` is the supremum of ``eps`` with ``pi(exp(eps phi)) < infinity``.
    ``variant="weights"`` uses ``delta_2 = max |dphi|^2 r`` over edges with
    normalised weights ``r``; ``variant="rates"`` uses
    ``max_i sum_j q_ij (phi_i - phi_j)^2`` and needs no weights.

    Without ``eps_star``: a birth-death spec with an expression ``phi`` is
    probed along ``eps_grid`` and the first diverging ``eps`` stands in for
    ``eps*``; a finite chain has ``eps* = infinity`` (vacuous certificate).
    For a birth-death spec ``delta_2`` also covers sampled edges beyond the
    truncation.
    """
    raw = obj
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("the moment bound needs K = 0")
    if variant not in ("weights", "rates"):
        raise ValueError(f"unknown variant {variant!r}")
    phi_arr = phi_values(phi, np.arange(obj.n), spec_params(raw))
    if np.any(phi_arr < 0):
        raise DegeneratePhi("phi must be nonnegative")
    flags = {}
    if variant == "weights":
        params, flags = resolve_weights(obj, params)
        delta2 = float(np.max(_edge_table(obj, phi_arr, params), initial=0.0))
    else:
        delta2 = float(np.max(_rate_table(obj, phi_arr), initial=0.0))
    is_family = isinstance(raw, BirthDeathSpec) and isinstance(phi, (str, Expr))
    if is_family:
        delta2 = max(delta2, _far_edges(raw, phi, variant))
    if not 0 < delta2 < np.inf:
        raise DegeneratePhi(f"delta_2 = {delta2!r} must be positive and finite")
    inputs = {"delta_2": delta2, "variant": variant}
    source = "given"
    if eps_star is None:
        if is_family:
            eps_star, source = math.inf, "probe"
            for eps in sorted(eps_grid):
                res = integrability_probe(raw, phi, eps)
                if res.classification == "indeterminate":
                    raise IndeterminateProbe(f"integrability at eps={eps!r} is indeterminate")
                if res.classification == "diverges":
                    eps_star = float(eps)
                    break
        else:
            eps_star, source = math.inf, "finite state space"
    eps_star = float(eps_star)
    inputs.update({"eps_star": eps_star, "eps_star_source": source})
    if math.isinf(eps_star):
        return BoundCertificate("lambda1", "upper", math.inf, "moment-upper", inputs, {**flags, "vacuous": True})
    return BoundCertificate("lambda1", "upper", delta2 / 4.0 * eps_star**2, "moment-upper", inputs, flags)


@dataclass(frozen=True)
class MinimaxResult:
    gamma0: float
    value: float


def minimax_crossing(f, g, tol: float = 1e-12, *, checks: int = 65) -> MinimaxResult:
    """``inf_gamma max(f, g)`` on ``[0, 1]`` for nondecreasing ``f`` and
    nonincreasing ``g`` with ``f(0) < g(0)`` and ``f(1) > g(1)``.

    The crossing ``gamma0`` is found by bisection to width ``tol``; the sign
    pattern and monotonicity are checked on ``checks`` grid points.
    """
    grid = np.linspace(0.0, 1.0, checks)
    fv = np.array([f(x) for x in grid], dtype=float)
    gv = np.array([g(x) for x in grid], dtype=float)
    if not (fv[0] < gv[0] and fv[-1] > gv[-1]):
        raise PreconditionViolated("need f(0) < g(0) and f(1) > g(1)")
    if np.any(np.diff(fv) < -1e-12 * np.abs(fv).max()) or np.any(np.diff(gv) > 1e-12 * np.abs(gv).max()):
        raise PreconditionViolated("f must be nondecreasing and g nonincreasing")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < g(mid):
            lo = mid
        else:
            hi = mid
    gamma0 = 0.5 * (lo + hi)
    return MinimaxResult(gamma0, float(max(f(gamma0), g(gamma0))))
