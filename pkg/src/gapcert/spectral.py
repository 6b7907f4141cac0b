"""Exact bottom eigenvalues of symmetric forms on finite state spaces.

All problems are solved for the symmetric matrix
``S = Pi^{-1/2} L Pi^{-1/2}``; an eigenvector ``v`` of ``S`` maps back to the
pi-normalised function ``f = Pi^{-1/2} v``.  Nearest-neighbour forms use
Sturm-sequence bisection on the tridiagonal ``S`` with inverse iteration for
the vector; everything else goes through a dense symmetric eigensolver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse import csgraph

from .chains import BirthDeathSpec, LatticeChainSpec
from .cheeger import as_form_like
from .errors import EigensolverNoConvergence, EmptySubset, InvalidParams, KillingPresent, TooManyStates
from .forms import PathForm, SymmetricJumpForm

__all__ = [
    "SpectralResult",
    "DisconnectedWarning",
    "lambda0_exact",
    "lambda1_exact",
    "dirichlet_lambda0",
    "neumann_lambda1",
    "truncation_sweep",
    "SweepRow",
    "jacobi_eigh",
    "sturm_count",
    "tridiagonal_eigenvalue",
    "chain_count",
    "rayleigh_quotient",
    "MAX_DENSE",
]

MAX_DENSE = 4000
JACOBI_MAX_SWEEPS = 100
BISECTION_WIDTH = 1e-12
_TINY = 1e-280


class DisconnectedWarning(UserWarning):
    """The restricted form splits into pieces that do not interact."""


@dataclass(frozen=True)
class SpectralResult:
    """One eigenvalue with its pi-normalised eigenfunction.

    ``eigvec`` may overflow to ``inf`` on states whose mass underflows double
    precision; ``sym_vec`` (the unit eigenvector of ``S``) is always finite.
    """

    value: float
    sym_vec: np.ndarray
    log_pi: np.ndarray
    residual: float
    method: str
    notes: tuple = field(default=())

    @property
    def eigvec(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.sym_vec * np.exp(-0.5 * self.log_pi)


def jacobi_eigh(a: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: float = 1e-15):
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Returns ascending eigenvalues and the matching orthonormal columns.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a[mask])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.linalg.norm(a[mask])
        if off > 1e-10 * scale:
            raise EigensolverNoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sturm_count(diag: np.ndarray, off: np.ndarray, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift (vectorised over shifts)."""
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    e2 = off**2
    tiny = np.finfo(float).tiny
    count = np.zeros(shifts.shape, dtype=int)
    q = diag[0] - shifts
    count += q < 0
    for k in range(1, diag.size):
        q = np.where(q == 0.0, -tiny, q)
        q = diag[k] - shifts - e2[k - 1] / q
        count += q < 0
    return count


def _bracket(diag, off):
    radius = np.zeros(diag.size)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    return lo - 1e-12 * max(1.0, abs(lo)), hi + 1e-12 * max(1.0, abs(hi))


def _bisect(count, lo: float, hi: float, index: int, width: float, sections: int = 32, floor: float = 1.0) -> float:
    """Shrink ``[lo, hi]`` around the ``index``-th eigenvalue using a
    vectorised counting function.

    The interval stops shrinking at ``width * max(floor, |lo|, |hi|)``; a
    small ``floor`` asks for relative accuracy, which only pays off when the
    count itself is relatively accurate.
    """
    for _ in range(400):
        if hi - lo <= width * max(floor, abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
        grid = np.linspace(lo, hi, sections + 2)[1:-1]
        counts = count(grid)
        above = np.flatnonzero(counts > index)
        below = np.flatnonzero(counts <= index)
        new_hi = grid[above[0]] if above.size else hi
        new_lo = grid[below[-1]] if below.size else lo
        if new_hi == hi and new_lo == lo:
            return 0.5 * (lo + hi)
        lo, hi = new_lo, new_hi
    raise EigensolverNoConvergence("bisection did not reach the requested width")


def tridiagonal_eigenvalue(diag, off, index: int, width: float = BISECTION_WIDTH, sections: int = 32) -> float:
    """``index``-th smallest eigenvalue (0-based) by Sturm multisection."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    if not 0 <= index < diag.size:
        raise InvalidParams(f"eigenvalue index {index} out of range for n={diag.size}")
    lo, hi = _bracket(diag, off)
    return _bisect(lambda x: sturm_count(diag, off, x), lo, hi, index, width, sections)


def chain_count(b, a, kappa, shifts) -> np.ndarray:
    """Eigenvalues below each shift for ``S = R^T R + diag(kappa)``.

    ``R^T R`` is the symmetrised generator of a nearest-neighbour chain with
    up rates ``b`` and down rates ``a`` (``a[0]`` and ``b[-1]`` unused).  The
    pivots of ``S - x`` follow the continued fraction
    ``s_{k+1} = a_{k+1} s_k / (b_k + s_k) + kappa_{k+1} - x``, which never
    forms ``a_k + b_k`` and so keeps relative accuracy on strongly graded
    chains where the plain Sturm sequence loses small eigenvalues.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    tiny = np.finfo(float).tiny
    m = b.size
    count = np.zeros(shifts.shape, dtype=int)
    s = kappa[0] - shifts
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(m):
            piv = b[k] + s if k < m - 1 else s
            piv = np.where(piv == 0.0, -tiny, piv)
            count += piv < 0
            if k < m - 1:
                s = a[k + 1] * (s / piv) + kappa[k + 1] - shifts
    return count


def _path_coefficients(path: PathForm, lo: int, hi: int, dirichlet: bool, linear=None):
    """Up rates, down rates and killing densities on ``[lo, hi]``.

    ``linear`` holds ``(pi, edge masses, K)`` when the caller passed a plain
    form; one division per rate then beats the log/exp round trip.
    """
    if linear is not None:
        pi, edges, K = (x[lo : hi + 1] for x in linear)
        J = edges[: hi - lo]
        b = np.concatenate((J / pi[:-1], [0.0]))
        a = np.concatenate(([0.0], J / pi[1:]))
        kappa = K / pi
        if dirichlet:
            if lo > 0:
                kappa[0] += linear[1][lo - 1] / pi[0]
            if hi < path.n - 1:
                kappa[-1] += linear[1][hi] / pi[-1]
        return b, a, kappa
    lp = path.log_pi[lo : hi + 1]
    lJ = path.log_J[lo:hi]
    b = np.concatenate((np.exp(lJ - lp[:-1]), [0.0]))
    a = np.concatenate(([0.0], np.exp(lJ - lp[1:])))
    kappa = np.exp(path.log_K[lo : hi + 1] - lp)
    if dirichlet:
        if lo > 0:
            kappa[0] += np.exp(path.log_J[lo - 1] - lp[0])
        if hi < path.n - 1:
            kappa[-1] += np.exp(path.log_J[hi] - lp[-1])
    return b, a, kappa


def _path_eig(path: PathForm, lo: int, hi: int, dirichlet: bool, index: int, deflate=None, linear=None):
    b, a, kappa = _path_coefficients(path, lo, hi, dirichlet, linear)
    diag = a + b + kappa
    off = -np.sqrt(b[:-1] * a[1:])
    if diag.size == 1:
        value = float(diag[0])
    elif diag.size == 2:
        value = _two_by_two(diag, off[0], b, a, kappa, index)
    else:
        low, high = _bracket(diag, off)
        # S is positive semidefinite and the continued-fraction count keeps
        # relative accuracy, so tiny eigenvalues are resolved relatively too
        value = _bisect(
            lambda x: chain_count(b, a, kappa, x), max(low, 0.0), high, index, BISECTION_WIDTH, floor=_TINY
        )
    v = _inverse_iteration(diag, off, value, deflate)
    # R^T R v from edge differences avoids cancellation in a_k + b_k
    w = np.sqrt(b[:-1]) * v[:-1] - np.sqrt(a[1:]) * v[1:]
    rq = float(w @ w + kappa @ (v * v))
    if diag.size > 2 and abs(rq - value) <= 2 * BISECTION_WIDTH * max(1.0, abs(value)):
        # second-order accurate, so it sharpens the bisection midpoint
        value = rq
    r = kappa * v - value * v
    r[:-1] += np.sqrt(b[:-1]) * w
    r[1:] -= np.sqrt(a[1:]) * w
    return value, v, _scaled_residual(r, diag, value)


def _two_by_two(diag, off, b, a, kappa, index: int) -> float:
    """Closed-form eigenvalues; the smaller one from the determinant."""
    half_trace = 0.5 * (diag[0] + diag[1])
    top = half_trace + np.hypot(0.5 * (diag[0] - diag[1]), off)
    if index == 1:
        return float(top)
    # det = b0 k1 + a1 k0 + k0 k1 avoids cancellation in d0 d1 - off^2
    det = b[0] * kappa[1] + a[1] * kappa[0] + kappa[0] * kappa[1]
    return float(det / top) if top > 0 else 0.0


def _inverse_iteration(diag, off, value, deflate=None, steps: int = 3):
    n = diag.size
    if n == 1:
        return np.ones(1)
    shift = value + 1e-13 * max(abs(value), _TINY * max(1.0, float(np.max(np.abs(diag)))))
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag - shift
    ab[2, :-1] = off
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    for _ in range(steps):
        if deflate is not None:
            v = v - deflate * (deflate @ v)
        v = v / np.linalg.norm(v)
        v = linalg.solve_banded((1, 1), ab, v, check_finite=False)
        if not np.all(np.isfinite(v)):
            raise EigensolverNoConvergence("inverse iteration produced non-finite values")
    if deflate is not None:
        v = v - deflate * (deflate @ v)
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def _scaled_residual(r, diag, value) -> float:
    """``||(S - value) v||`` with row ``i`` weighted by ``(1 + S_ii / c)^{-1/2}``, ``c = max(1, value)``.

    Rows with rates far above the eigenvalue carry rounding error of order
    ``eps * S_ii |v_i|`` however ``v`` is computed; the weight keeps that from
    swamping the measure while leaving well-scaled rows essentially unweighted.
    """
    c = max(1.0, abs(value))
    return float(np.linalg.norm(r / np.sqrt(1.0 + np.abs(diag) / c)))


def _sym_dense(form: SymmetricJumpForm) -> np.ndarray:
    root = np.sqrt(form.pi)
    L = form.laplacian().toarray()
    return L / root[:, None] / root[None, :]


def _dense_solve(S: np.ndarray, index: int, method: str, deflate=None):
    if method == "jacobi":
        w, V = jacobi_eigh(S)
    else:
        w, V = np.linalg.eigh(S)
    value = float(w[index])
    v = V[:, index].copy()
    if deflate is not None and index == 1 and abs(w[1] - w[0]) <= 1e-12 * max(1.0, abs(w[1])):
        # repeated bottom eigenvalue: make the returned vector orthogonal to sqrt(pi)
        block = V[:, :2]
        coeff = block.T @ deflate
        v = block @ np.array([-coeff[1], coeff[0]])
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    residual = _scaled_residual(S @ v - value * v, np.diag(S), value)
    return value, v, residual


def _path_of(obj):
    return _path_and_linear(obj)[0]


def _path_and_linear(obj):
    """Log-space path view of ``obj`` plus its linear-space arrays when it has them."""
    if isinstance(obj, PathForm):
        return obj, None
    if obj.n > 1 and obj.is_path():
        edges = np.zeros(obj.n)
        coo = obj.J.tocoo()
        up = coo.col == coo.row + 1
        edges[coo.row[up]] = coo.data[up]
        return PathForm.from_form(obj), (np.asarray(obj.pi, dtype=float), edges, np.asarray(obj.K, dtype=float))
    return None, None


def rayleigh_quotient(obj, f) -> float:
    """``D(f, f) / pi(f^2)`` from differences, without forming ``L f``."""
    obj = as_form_like(obj)
    f = np.asarray(f, dtype=float)
    if isinstance(obj, PathForm):
        jump = float(np.sum(np.exp(obj.log_J) * np.diff(f) ** 2))
        return (jump + float(np.sum(np.exp(obj.log_K) * f**2))) / float(np.sum(obj.pi * f**2))
    return obj.dirichlet(f) / float(obj.pi @ f**2)


def _sym_rayleigh(path: PathForm, v: np.ndarray) -> float:
    """Rayleigh quotient of ``S`` at unit ``v`` via edge differences."""
    left = np.exp(0.5 * (path.log_J - path.log_pi[:-1]))
    right = np.exp(0.5 * (path.log_J - path.log_pi[1:]))
    jump = float(np.sum((left * v[:-1] - right * v[1:]) ** 2))
    kill = float(np.sum(np.exp(path.log_K - path.log_pi) * v**2))
    return jump + kill


def _solve(obj, index: int, method: str) -> SpectralResult:
    path, linear = _path_and_linear(obj)
    deflate = None
    if index == 1:
        deflate = np.exp(0.5 * (path.log_pi if path is not None else np.log(obj.pi)))
    if path is not None and method in ("auto", "tridiagonal"):
        value, v, residual = _path_eig(path, 0, path.n - 1, False, index, deflate, linear)
        notes = ()
        rq = _sym_rayleigh(path, v)
        if abs(rq - value) > 1e-8 * max(1.0, value):
            notes = (f"Rayleigh quotient {rq!r} differs from the bisection value",)
        return SpectralResult(value, v, path.log_pi.copy(), residual, "tridiagonal-bisection", notes)
    form = path.to_form() if path is not None and isinstance(obj, PathForm) else obj
    if form.n > MAX_DENSE:
        raise TooManyStates(f"dense eigensolver limited to n <= {MAX_DENSE}")
    if method == "tridiagonal":
        raise InvalidParams("tridiagonal method needs a nearest-neighbour form")
    S = _sym_dense(form)
    value, v, residual = _dense_solve(S, index, "jacobi" if method == "jacobi" else "dense", deflate)
    return SpectralResult(value, v, np.log(form.pi), residual, "jacobi" if method == "jacobi" else "dense")


def lambda0_exact(obj, method: str = "auto") -> SpectralResult:
    """Bottom of the spectrum ``inf D(f, f) / pi(f^2)``; 0 without killing."""
    obj = as_form_like(obj)
    if not obj.has_killing:
        log_pi = obj.log_pi if isinstance(obj, PathForm) else np.log(obj.pi)
        v = np.exp(0.5 * log_pi)
        return SpectralResult(0.0, v / np.linalg.norm(v), log_pi.copy(), 0.0, "exact", ("no killing: constants attain 0",))
    return _solve(obj, 0, method)


def lambda1_exact(obj, method: str = "auto") -> SpectralResult:
    """Spectral gap ``inf {D(f, f) : pi(f) = 0, pi(f^2) = 1}``."""
    obj = as_form_like(obj)
    if obj.has_killing:
        raise KillingPresent("the spectral gap is defined for forms without killing")
    if obj.n < 2:
        raise InvalidParams("the spectral gap needs at least two states")
    return _solve(obj, 1, method)


def _subset_index(subset, n: int) -> np.ndarray:
    idx = np.unique(np.asarray(list(subset), dtype=int))
    if idx.size == 0:
        raise EmptySubset("subset is empty")
    if idx[0] < 0 or idx[-1] >= n:
        raise EmptySubset(f"subset has indices outside 0..{n - 1}")
    return idx


def _interval(idx: np.ndarray):
    if idx[-1] - idx[0] + 1 == idx.size:
        return int(idx[0]), int(idx[-1])
    return None


def dirichlet_lambda0(obj, B, method: str = "auto") -> SpectralResult:
    """Principal eigenvalue with zero boundary values off ``B``.

    Jumps leaving ``B`` act as killing; the normalisation uses the global
    ``pi`` restricted to ``B``.  The returned vector lives on ``B``.
    """
    obj = as_form_like(obj)
    idx = _subset_index(B, obj.n)
    path, linear = _path_and_linear(obj)
    if path is not None and _interval(idx) is not None and method in ("auto", "tridiagonal"):
        lo, hi = _interval(idx)
        value, v, residual = _path_eig(path, lo, hi, True, 0, linear=linear)
        return SpectralResult(value, v, path.log_pi[lo : hi + 1].copy(), residual, "tridiagonal-bisection")
    form = path.to_form() if isinstance(obj, PathForm) else obj
    if idx.size > MAX_DENSE:
        raise TooManyStates(f"dense eigensolver limited to n <= {MAX_DENSE}")
    S = _sym_dense(form)[np.ix_(idx, idx)]
    value, v, residual = _dense_solve(S, 0, "jacobi" if method == "jacobi" else "dense")
    return SpectralResult(value, v, np.log(form.pi[idx]), residual, "jacobi" if method == "jacobi" else "dense")


def neumann_lambda1(obj, B, method: str = "auto") -> SpectralResult:
    """Spectral gap of the interior form on ``B`` under ``pi`` conditioned on ``B``.

    A ``B`` that splits into non-interacting pieces gives 0 with a
    ``DisconnectedWarning``.
    """
    obj = as_form_like(obj)
    idx = _subset_index(B, obj.n)
    if idx.size < 2:
        raise EmptySubset("the Neumann gap needs at least two states")
    path = _path_of(obj)
    if path is not None and _interval(idx) is not None:
        lo, hi = _interval(idx)
        sub = PathForm(path.log_pi[lo : hi + 1], path.log_J[lo:hi])
        if not np.all(np.isfinite(sub.log_J)):
            cut = int(np.argmin(np.isfinite(sub.log_J)))
            return _disconnected(sub.log_pi, np.arange(sub.n) > cut)
        return _solve(sub, 1, method)
    form = path.to_form() if isinstance(obj, PathForm) else obj
    pi = form.pi[idx]
    J = form.J[idx][:, idx]
    n_parts, labels = csgraph.connected_components(J, directed=False)
    if n_parts > 1:
        return _disconnected(np.log(pi / pi.sum()), labels != labels[0])
    return _solve(SymmetricJumpForm(pi / pi.sum(), J), 1, method)


def _disconnected(log_pi, part) -> SpectralResult:
    """Gap 0 with the centred indicator of ``part`` as eigenfunction."""
    warnings.warn("subset is disconnected; its Neumann gap is 0", DisconnectedWarning, stacklevel=3)
    log_pi = np.asarray(log_pi, dtype=float)
    pi = np.exp(log_pi - log_pi.max())
    pi /= pi.sum()
    f = part.astype(float) - pi @ part
    v = f * np.sqrt(pi)
    return SpectralResult(0.0, v / np.linalg.norm(v), np.log(pi), 0.0, "exact", ("disconnected",))


@dataclass(frozen=True)
class SweepRow:
    N: int
    n: int
    lambda1: float
    lambda0_without_origin: float
    method: str


def truncation_sweep(family, levels) -> list:
    """Exact values along increasing truncation levels.

    ``lambda0_without_origin`` is the Dirichlet eigenvalue on all states but
    the first (the origin of a birth-death chain, the box corner otherwise).
    """
    levels = [int(v) for v in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InvalidParams("levels must be strictly increasing")
    rows = []
    for N in levels:
        if isinstance(family, BirthDeathSpec):
            obj = family.with_level(N).path_form()
        elif isinstance(family, LatticeChainSpec):
            spec = LatticeChainSpec(family.d, N, family.R, family.rules, family.params)
            if spec.n > MAX_DENSE:
                raise TooManyStates(f"lattice level {N} has {spec.n} states (limit {MAX_DENSE})")
            obj = spec.form()
        else:
            raise TypeError("truncation_sweep expects a birth-death or lattice spec")
        gap = lambda1_exact(obj)
        rest = dirichlet_lambda0(obj, range(1, obj.n))
        rows.append(SweepRow(N, obj.n, float(gap.value), float(rest.value), gap.method))
    return rows
