"""Symmetric jump forms, reversible rate chains and their modified forms.

A form on the finite state space ``{0, ..., n-1}`` is the triple
``(pi, J, K)``: a strictly positive probability vector, a symmetric jump
mass over ordered pairs and a killing mass per state.  Its quadratic form is

    D(f, f) = 1/2 * sum_{i,j} J_ij (f_i - f_j)^2 + sum_i K_i f_i^2.

``J`` stores mass per *ordered* pair, so ``J(A x A^c)`` is the one-sided sum
``sum_{i in A, j not in A} J_ij``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import (
    DetailedBalanceViolation,
    InvalidForm,
    InvalidP,
    InvalidParams,
    SymmetryViolation,
    ZeroRates,
)

__all__ = [
    "SymmetricJumpForm",
    "RateChain",
    "ModifiedFormParams",
    "NormalizationReport",
    "KernelForm",
    "form_from_rates",
    "rates_from_form",
    "modified_form",
    "default_r_s",
    "uniform_params",
    "check_normalization",
    "form_from_kernel",
    "stationary_from_rates",
    "PathForm",
    "PathWeights",
    "TiltedForm",
    "tilt_measure",
    "default_params",
    "apply_params",
    "condition_report",
    "uniform_params_for",
    "PROB_TOL",
    "BALANCE_RTOL",
]

PROB_TOL = 1e-12
BALANCE_RTOL = 1e-10


def _canonical(mat) -> sparse.csr_matrix:
    out = sparse.csr_matrix(mat, dtype=float, copy=True)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


def _worst_asymmetry(a: sparse.csr_matrix, b: sparse.csr_matrix):
    """Largest relative mismatch between ``a`` and ``b`` entrywise."""
    diff = (a - b).tocoo()
    if diff.nnz == 0:
        return None, 0.0
    scale = abs(a).maximum(abs(b)).tocsr()
    den = np.asarray(scale[diff.row, diff.col]).ravel()
    rel = np.abs(diff.data) / np.maximum(den, 1e-300)
    k = int(np.argmax(rel))
    return (int(diff.row[k]), int(diff.col[k])), float(rel[k])


@dataclass(frozen=True)
class SymmetricJumpForm:
    """Immutable ``(pi, J, K)`` triple.

    ``J`` is symmetrized on construction when the input is symmetric up to
    ``1e-10`` relative error; larger asymmetry raises ``SymmetryViolation``.
    """

    pi: np.ndarray
    J: sparse.csr_matrix
    K: np.ndarray = None

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float).ravel()
        n = pi.size
        if n < 1:
            raise InvalidForm("a form needs at least one state")
        if not np.all(np.isfinite(pi)) or np.any(pi <= 0):
            raise InvalidForm("pi must be strictly positive")
        if abs(pi.sum() - 1.0) > PROB_TOL:
            raise InvalidForm(f"pi sums to {pi.sum()!r}, not 1")
        J = _canonical(self.J)
        if J.shape != (n, n):
            raise InvalidForm(f"J has shape {J.shape}, expected {(n, n)}")
        if J.nnz and (np.any(J.data < 0) or not np.all(np.isfinite(J.data))):
            raise InvalidForm("J must be finite and nonnegative")
        if J.diagonal().any():
            raise InvalidForm("J must vanish on the diagonal")
        pair, rel = _worst_asymmetry(J, J.T.tocsr())
        if rel > BALANCE_RTOL:
            raise SymmetryViolation(f"J is not symmetric at {pair} (rel. error {rel:.3e})")
        if pair is not None:
            J = _canonical((J + J.T) * 0.5)
        K = np.zeros(n) if self.K is None else np.asarray(self.K, dtype=float).ravel()
        if K.shape != (n,):
            raise InvalidForm(f"K has length {K.size}, expected {n}")
        if np.any(K < 0) or not np.all(np.isfinite(K)):
            raise InvalidForm("K must be finite and nonnegative")
        object.__setattr__(self, "pi", _freeze(pi))
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "K", _freeze(K))

    @property
    def n(self) -> int:
        return self.pi.size

    @property
    def has_killing(self) -> bool:
        return bool(np.any(self.K > 0))

    def row_mass(self) -> np.ndarray:
        """``J(i, E)`` for every state."""
        return np.asarray(self.J.sum(axis=1)).ravel()

    def total_rates(self) -> np.ndarray:
        """``q_i = (J(i, E) + K_i) / pi_i``."""
        return (self.row_mass() + self.K) / self.pi

    def dirichlet(self, f) -> float:
        f = np.asarray(f, dtype=float)
        coo = self.J.tocoo()
        jump = 0.5 * float(np.sum(coo.data * (f[coo.row] - f[coo.col]) ** 2))
        return jump + float(np.sum(self.K * f**2))

    def laplacian(self) -> sparse.csr_matrix:
        """Matrix ``L`` with ``f^T L f = D(f, f)``."""
        diag = self.row_mass() + self.K
        return _canonical(sparse.diags(diag) - self.J)

    def dense_J(self) -> np.ndarray:
        return self.J.toarray()

    def is_path(self) -> bool:
        """True when every jump connects neighbours ``i, i+1``."""
        coo = self.J.tocoo()
        return bool(np.all(np.abs(coo.row - coo.col) == 1))

    def with_measure(self, pi) -> "SymmetricJumpForm":
        return SymmetricJumpForm(pi, self.J, self.K)

    def without_killing(self) -> "SymmetricJumpForm":
        return SymmetricJumpForm(self.pi, self.J, None)

    def cut(self, mask) -> float:
        """``J(A x A^c)`` for the boolean indicator ``mask`` of ``A``."""
        mask = np.asarray(mask, dtype=bool)
        coo = self.J.tocoo()
        sel = mask[coo.row] & ~mask[coo.col]
        return float(coo.data[sel].sum())


@dataclass(frozen=True)
class RateChain:
    """Reversible q-pair ``(q_i, q_ij)`` with its reversible measure.

    ``qtot[i] >= sum_j q[i, j]``; the excess ``d`` is the killing rate.
    """

    pi: np.ndarray
    q: sparse.csr_matrix
    qtot: np.ndarray = None
    d: np.ndarray = field(init=False)

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float).ravel()
        n = pi.size
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > PROB_TOL:
            raise InvalidForm("pi must be a strictly positive probability vector")
        q = _canonical(self.q)
        if q.shape != (n, n):
            raise InvalidForm(f"q has shape {q.shape}, expected {(n, n)}")
        q = _canonical(q - sparse.diags(q.diagonal()))
        if q.nnz and np.any(q.data < 0):
            raise InvalidForm("rates must be nonnegative")
        out = np.asarray(q.sum(axis=1)).ravel()
        qtot = out.copy() if self.qtot is None else np.asarray(self.qtot, dtype=float).ravel()
        d = qtot - out
        if np.any(d < -1e-12 * np.maximum(1.0, qtot)):
            raise InvalidForm("qtot must dominate the off-diagonal row sums")
        d = np.where(d < 0, 0.0, d)
        flux = _canonical(sparse.diags(pi) @ q)
        pair, rel = _worst_asymmetry(flux, flux.T.tocsr())
        if rel > BALANCE_RTOL:
            raise DetailedBalanceViolation(pair, rel)
        object.__setattr__(self, "pi", _freeze(pi))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qtot", _freeze(out + d))
        object.__setattr__(self, "d", _freeze(d))

    @property
    def n(self) -> int:
        return self.pi.size

    @classmethod
    def from_rates(cls, q, pi=None, d=None) -> "RateChain":
        """Build a chain, solving ``pi`` from detailed balance when omitted."""
        q = _canonical(q)
        if pi is None:
            pi = stationary_from_rates(q)
        out = np.asarray(q.sum(axis=1)).ravel() - q.diagonal()
        qtot = out if d is None else out + np.asarray(d, dtype=float)
        return cls(pi, q, qtot)


def stationary_from_rates(q) -> np.ndarray:
    """Reversible measure of an irreducible rate matrix.

    Walks a spanning tree from state 0 using ``pi_j = pi_i q_ij / q_ji`` and
    then checks every remaining pair.
    """
    q = _canonical(q)
    n = q.shape[0]
    qt = q.T.tocsr()
    logpi = np.full(n, np.nan)
    logpi[0] = 0.0
    queue = deque([0])
    while queue:
        i = queue.popleft()
        row = q.getrow(i)
        for j, rate in zip(row.indices, row.data):
            if j == i or rate <= 0 or not np.isnan(logpi[j]):
                continue
            back = qt[i, j]
            if back <= 0:
                raise DetailedBalanceViolation((int(i), int(j)), np.inf)
            logpi[j] = logpi[i] + np.log(rate) - np.log(back)
            queue.append(j)
    if np.any(np.isnan(logpi)):
        raise InvalidForm("rate matrix is not irreducible; pi is not determined")
    pi = np.exp(logpi - logpi.max())
    return pi / pi.sum()


def form_from_rates(chain: RateChain) -> SymmetricJumpForm:
    flux = _canonical(sparse.diags(chain.pi) @ chain.q)
    J = (flux + flux.T) * 0.5
    return SymmetricJumpForm(chain.pi, J, chain.pi * chain.d)


def rates_from_form(form: SymmetricJumpForm) -> RateChain:
    q = _canonical(sparse.diags(1.0 / form.pi) @ form.J)
    return RateChain(form.pi, q, form.total_rates())


@dataclass(frozen=True)
class ModifiedFormParams:
    """Weights ``r`` (pairs) and ``s`` (states) defining ``J^(a)``, ``K^(a)``.

    ``r`` carries the sparsity pattern of the form's ``J``.  The effective
    weights are ``rescale * r`` and ``rescale * s``.
    """

    r: sparse.csr_matrix
    s: np.ndarray
    alpha: float = 1.0
    rescale: float = 1.0

    def __post_init__(self):
        r = _canonical(self.r)
        pair, rel = _worst_asymmetry(r, r.T.tocsr())
        if rel > 0:
            raise InvalidParams(f"r must be symmetric (pair {pair})")
        if r.nnz and np.any(r.data <= 0):
            raise InvalidParams("r must be positive on its support")
        s = np.asarray(self.s, dtype=float).ravel()
        if np.any(s < 0):
            raise InvalidParams("s must be nonnegative")
        if self.alpha < 0:
            raise InvalidParams("alpha must be nonnegative")
        if not self.rescale >= 1.0:
            raise InvalidParams("rescale factor must be at least 1")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", _freeze(s))

    @property
    def r_eff(self) -> sparse.csr_matrix:
        return self.r * self.rescale

    @property
    def s_eff(self) -> np.ndarray:
        return self.s * self.rescale

    def with_alpha(self, alpha: float) -> "ModifiedFormParams":
        return ModifiedFormParams(self.r, self.s, alpha, self.rescale)

    def with_rescale(self, rescale: float) -> "ModifiedFormParams":
        return ModifiedFormParams(self.r, self.s, self.alpha, rescale)

    def validate_for(self, form: SymmetricJumpForm):
        if self.r.shape != form.J.shape or self.s.size != form.n:
            raise InvalidParams("parameter shapes do not match the form")
        rvals = _values_on_pattern(self.r, form.J)
        if np.any(rvals <= 0):
            raise InvalidParams("r must be positive wherever J > 0")
        if np.any((form.K > 0) & (self.s <= 0)):
            raise InvalidParams("s must be positive wherever K > 0")


def _values_on_pattern(weights: sparse.csr_matrix, J: sparse.csr_matrix) -> np.ndarray:
    """Entries of ``weights`` read at the stored positions of ``J``."""
    if (
        weights.shape == J.shape
        and weights.nnz == J.nnz
        and np.array_equal(weights.indptr, J.indptr)
        and np.array_equal(weights.indices, J.indices)
    ):
        return weights.data.copy()
    coo = J.tocoo()
    return np.asarray(weights.tocsr()[coo.row, coo.col]).ravel()


def _pair_weights(J: sparse.csr_matrix, values: np.ndarray) -> sparse.csr_matrix:
    r = J.copy()
    r.data = np.asarray(values, dtype=float)
    return r


def modified_form(form: SymmetricJumpForm, params: ModifiedFormParams) -> SymmetricJumpForm:
    """``J^(a) = J / r^a`` and ``K^(a) = K / s^a`` at ``a = params.alpha``."""
    alpha = params.alpha
    if alpha == 0:
        return form
    params.validate_for(form)
    rvals = _values_on_pattern(params.r_eff, form.J)
    J = form.J.copy()
    J.data = J.data / rvals**alpha
    s = params.s_eff
    K = np.zeros(form.n)
    pos = s > 0
    K[pos] = form.K[pos] / s[pos] ** alpha
    return SymmetricJumpForm(form.pi, J, K)


@dataclass(frozen=True)
class NormalizationReport:
    """Per-state density of ``J^(1)(., E) + K^(1)`` against ``pi``.

    The fully modified form is normalised when every density is at most 1;
    ``rescale`` is the factor that restores this (1 when it already holds).
    """

    density: np.ndarray
    max_density: float
    rescale: float

    @property
    def holds(self) -> bool:
        return self.max_density <= 1.0 + 1e-12


def check_normalization(form: SymmetricJumpForm, params: ModifiedFormParams) -> NormalizationReport:
    """Per-state density of ``J^(1)(., E) + K^(1)`` and the rescale needed.

    On a finite space the operator norm from the nonnegative integrable
    cone equals the largest density.
    """
    params.validate_for(form)
    rvals = _values_on_pattern(params.r_eff, form.J)
    coo = form.J.tocoo()
    jump = np.bincount(coo.row, weights=coo.data / rvals, minlength=form.n)
    s = params.s_eff
    kill = np.zeros(form.n)
    pos = s > 0
    kill[pos] = form.K[pos] / s[pos]
    density = (jump + kill) / form.pi
    peak = float(density.max()) if density.size else 0.0
    return NormalizationReport(_freeze(density), peak, max(1.0, peak))


def _ensure_condition(form, params: ModifiedFormParams) -> ModifiedFormParams:
    report = check_normalization(form, params)
    if not report.holds:
        params = params.with_rescale(params.rescale * report.rescale)
    return params


def default_r_s(chain, alpha: float = 1.0) -> ModifiedFormParams:
    """``r_ij = max(q_i, q_j)`` and ``s_i = q_i``, rescaled so the normalisation holds.

    ``chain`` may be a ``RateChain`` or a ``SymmetricJumpForm``.
    """
    form = form_from_rates(chain) if isinstance(chain, RateChain) else chain
    q = form.total_rates()
    coo = form.J.tocoo()
    if np.any(q[coo.row] <= 0):
        raise ZeroRates("a state with outgoing jumps has zero total rate")
    r = _pair_weights(form.J, np.maximum(q[coo.row], q[coo.col]))
    params = ModifiedFormParams(r, q.copy(), alpha, 1.0)
    return _ensure_condition(form, params)


def uniform_params(form: SymmetricJumpForm, M: float | None = None, alpha: float = 1.0) -> ModifiedFormParams:
    """Constant weights ``r = s = M``; ``M`` defaults to the largest density
    of ``J(., E) + K``."""
    if M is None:
        M = float(np.max((form.row_mass() + form.K) / form.pi))
    if M <= 0:
        raise InvalidParams("uniform weight must be positive")
    r = _pair_weights(form.J, np.full(form.J.nnz, float(M)))
    params = ModifiedFormParams(r, np.full(form.n, float(M)), alpha, 1.0)
    report = check_normalization(form, params)
    if not report.holds:
        raise InvalidParams(f"M={M!r} is below the jump density {report.max_density!r}")
    return params


@dataclass(frozen=True)
class KernelForm:
    """Form of ``M - P`` for a pi-symmetric kernel ``P``."""

    form: SymmetricJumpForm
    M: float

    def operator_eigenvalue(self, form_eigenvalue: float) -> float:
        """Map an eigenvalue of the form back to one of ``P``."""
        return self.M - form_eigenvalue


def form_from_kernel(p, pi) -> KernelForm:
    p = _canonical(p)
    pi = np.asarray(pi, dtype=float)
    if p.nnz and np.any(p.data < 0):
        raise InvalidForm("kernel must be nonnegative")
    flux = _canonical(sparse.diags(pi) @ p)
    pair, rel = _worst_asymmetry(flux, flux.T.tocsr())
    if rel > BALANCE_RTOL:
        raise SymmetryViolation(f"pi(dx) p(x, dy) is not symmetric at {pair} (rel. error {rel:.3e})")
    mass = np.asarray(p.sum(axis=1)).ravel()
    M = float(mass.max()) if mass.size else 0.0
    off = _canonical(flux - sparse.diags(flux.diagonal()))
    J = (off + off.T) * 0.5
    # p's diagonal only enters through p(x, E): <f, (M-P)f> = D(f, f) exactly
    K = pi * np.maximum(M - mass, 0.0)
    return KernelForm(SymmetricJumpForm(pi, J, K), M)


def _log(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def _logsumexp(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return -np.inf
    top = np.max(x)
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.sum(np.exp(x - top))))


def _logadd(*terms) -> np.ndarray:
    out = terms[0]
    for t in terms[1:]:
        out = np.logaddexp(out, t)
    return out


@dataclass(frozen=True)
class PathWeights:
    """Modification weights for a ``PathForm``, held as logarithms.

    ``log_r[e]`` weights the edge ``(e, e+1)`` and ``log_s[i]`` the killing at
    ``i``; the effective weights are multiplied by ``rescale``.
    """

    log_r: np.ndarray
    log_s: np.ndarray
    alpha: float = 1.0
    rescale: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidParams("alpha must be nonnegative")
        if not self.rescale >= 1.0:
            raise InvalidParams("rescale factor must be at least 1")
        object.__setattr__(self, "log_r", _freeze(self.log_r))
        object.__setattr__(self, "log_s", _freeze(self.log_s))

    def with_alpha(self, alpha: float) -> "PathWeights":
        return PathWeights(self.log_r, self.log_s, alpha, self.rescale)

    def with_rescale(self, rescale: float) -> "PathWeights":
        return PathWeights(self.log_r, self.log_s, self.alpha, rescale)


@dataclass(frozen=True)
class PathForm:
    """Nearest-neighbour form on ``{0, ..., n-1}`` stored in log space.

    Birth-death chains with geometric stationary laws underflow double
    precision long before the truncation levels of interest, so the measure,
    the edge masses ``J_{i,i+1}`` and the killing are kept as logarithms.
    ``log_pi`` is renormalised on construction.
    """

    log_pi: np.ndarray
    log_J: np.ndarray
    log_K: np.ndarray = None

    def __post_init__(self):
        log_pi = np.asarray(self.log_pi, dtype=float).ravel()
        n = log_pi.size
        if n < 1 or not np.all(np.isfinite(log_pi)):
            raise InvalidForm("log_pi must be finite")
        log_pi = log_pi - _logsumexp(log_pi)
        log_J = np.asarray(self.log_J, dtype=float).ravel()
        if log_J.size != n - 1 or np.any(np.isnan(log_J)) or np.any(log_J == np.inf):
            raise InvalidForm(f"log_J must hold {n - 1} finite or -inf entries")
        log_K = np.full(n, -np.inf) if self.log_K is None else np.asarray(self.log_K, dtype=float).ravel()
        if log_K.size != n or np.any(np.isnan(log_K)) or np.any(log_K == np.inf):
            raise InvalidForm(f"log_K must hold {n} finite or -inf entries")
        object.__setattr__(self, "log_pi", _freeze(log_pi))
        object.__setattr__(self, "log_J", _freeze(log_J))
        object.__setattr__(self, "log_K", _freeze(log_K))

    @property
    def n(self) -> int:
        return self.log_pi.size

    @property
    def pi(self) -> np.ndarray:
        return np.exp(self.log_pi)

    @property
    def has_killing(self) -> bool:
        return bool(np.any(np.isfinite(self.log_K)))

    def _side_logs(self):
        left = np.concatenate(([-np.inf], self.log_J))
        right = np.concatenate((self.log_J, [-np.inf]))
        return left, right

    def log_total_rates(self) -> np.ndarray:
        left, right = self._side_logs()
        return _logadd(left, right, self.log_K) - self.log_pi

    @classmethod
    def from_form(cls, form: SymmetricJumpForm) -> "PathForm":
        if not form.is_path():
            raise InvalidForm("form has jumps beyond nearest neighbours")
        n = form.n
        edges = np.zeros(max(n - 1, 0))
        coo = form.J.tocoo()
        up = coo.col == coo.row + 1
        edges[coo.row[up]] = coo.data[up]
        return cls(_log(form.pi), _log(edges), _log(form.K))

    def to_form(self) -> SymmetricJumpForm:
        pi = self.pi
        if np.any(pi <= 0):
            raise InvalidForm("pi underflows double precision; keep the log-space form")
        n = self.n
        w = np.exp(self.log_J)
        J = sparse.diags([w, w], [1, -1], shape=(n, n), format="csr") if n > 1 else sparse.csr_matrix((1, 1))
        return SymmetricJumpForm(pi / pi.sum(), J, np.exp(self.log_K))

    def sym_tridiagonal(self):
        """Diagonal and off-diagonal of ``Pi^{-1/2} L Pi^{-1/2}``."""
        left, right = self._side_logs()
        diag = np.exp(_logadd(left, right, self.log_K) - self.log_pi)
        off = -np.exp(self.log_J - 0.5 * (self.log_pi[:-1] + self.log_pi[1:]))
        return diag, off

    def default_weights(self, alpha: float = 1.0) -> PathWeights:
        """``r = max(q_i, q_{i+1})``, ``s = q``, rescaled so the normalisation holds."""
        lq = self.log_total_rates()
        w = PathWeights(np.maximum(lq[:-1], lq[1:]), lq, alpha, 1.0)
        report = self.normalization(w)
        return w if report.holds else w.with_rescale(report.rescale)

    def uniform_weights(self, M: float | None = None, alpha: float = 1.0) -> PathWeights:
        if M is None:
            M = float(np.exp(np.max(self.log_total_rates())))
        if M <= 0:
            raise InvalidParams("uniform weight must be positive")
        w = PathWeights(np.full(self.n - 1, np.log(M)), np.full(self.n, np.log(M)), alpha, 1.0)
        report = self.normalization(w)
        if not report.holds:
            raise InvalidParams(f"M={M!r} is below the jump density {report.max_density!r}")
        return w

    def normalization(self, weights: PathWeights) -> NormalizationReport:
        c = np.log(weights.rescale)
        left, right = self._side_logs()
        lr = weights.log_r + c
        lr_left = np.concatenate(([0.0], lr))
        lr_right = np.concatenate((lr, [0.0]))
        with np.errstate(invalid="ignore"):
            kill = np.where(np.isfinite(self.log_K), self.log_K - weights.log_s - c, -np.inf)
        dens = np.exp(_logadd(left - lr_left, right - lr_right, kill) - self.log_pi)
        peak = float(dens.max())
        return NormalizationReport(_freeze(dens), peak, max(1.0, peak))

    def modified(self, weights: PathWeights) -> "PathForm":
        a = weights.alpha
        if a == 0:
            return self
        c = np.log(weights.rescale)
        log_J = self.log_J - a * (weights.log_r + c)
        with np.errstate(invalid="ignore"):
            log_K = np.where(np.isfinite(self.log_K), self.log_K - a * (weights.log_s + c), -np.inf)
        return PathForm(self.log_pi, log_J, log_K)

    def scaled(self, factor: float) -> "PathForm":
        """Multiply ``J`` and ``K`` by ``factor``."""
        lf = np.log(factor)
        return PathForm(self.log_pi, self.log_J + lf, self.log_K + lf)


def default_params(obj, alpha: float = 1.0):
    """Default modification weights for either form representation."""
    if isinstance(obj, PathForm):
        return obj.default_weights(alpha)
    return default_r_s(obj, alpha)


def apply_params(obj, params):
    if isinstance(obj, PathForm):
        return obj.modified(params)
    return modified_form(obj, params)


def condition_report(obj, params) -> NormalizationReport:
    if isinstance(obj, PathForm):
        return obj.normalization(params)
    return check_normalization(obj, params)


def uniform_params_for(obj, M=None, alpha: float = 1.0):
    if isinstance(obj, PathForm):
        return obj.uniform_weights(M, alpha)
    return uniform_params(obj, M, alpha)


@dataclass(frozen=True)
class TiltedForm:
    """Form ``(pi_p, J / beta_p, K / beta_p)`` with ``pi_p = p pi / beta_p``.

    Spectral quantities of ``form`` bound those of the original from below
    after multiplication by ``alpha_p = min p``.
    """

    form: object
    alpha_p: float
    beta_p: float
    max_rate_ratio: float

    @property
    def valid(self) -> bool:
        return self.max_rate_ratio <= 1.0 + 1e-12


def tilt_measure(obj, p) -> TiltedForm:
    p = np.asarray(p, dtype=float).ravel()
    if p.size != obj.n or np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise InvalidP("p must be finite and strictly positive on every state")
    log_p = np.log(p)
    if isinstance(obj, PathForm):
        log_beta = _logsumexp(obj.log_pi + log_p)
        ratio = float(np.max(np.exp(obj.log_total_rates() - log_p)))
        tilted = PathForm(obj.log_pi + log_p, obj.log_J - log_beta, obj.log_K - log_beta)
        return TiltedForm(tilted, float(p.min()), float(np.exp(log_beta)), ratio)
    beta = float(np.sum(obj.pi * p))
    ratio = float(np.max(obj.total_rates() / p))
    # one multiplier for measure and jumps keeps ratios like J_ij / (p_i pi_i) exact
    scale = 1.0 / beta
    pi_p = obj.pi * p * scale
    if abs(pi_p.sum() - 1.0) > 1e-13:
        pi_p = pi_p / pi_p.sum()
    tilted = SymmetricJumpForm(pi_p, obj.J * scale, obj.K * scale)
    return TiltedForm(tilted, float(p.min()), beta, ratio)
