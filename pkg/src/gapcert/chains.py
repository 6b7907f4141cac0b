"""Chain families: birth-death and lattice specifications, named fixtures and
random reversible chains for property tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import InvalidParams, UnknownFixture
from .expr import Expr, parse_expr
from .forms import PathForm, PathWeights, RateChain, SymmetricJumpForm, form_from_rates

__all__ = [
    "BirthDeathSpec",
    "LatticeChainSpec",
    "build_fixture",
    "FIXTURES",
    "random_form",
    "random_birth_death",
    "star_form",
    "two_state_form",
    "path_graph_form",
]


def _as_expr(e, variables=("i",)) -> Expr:
    return e if isinstance(e, Expr) else parse_expr(str(e), variables)


@dataclass(frozen=True)
class BirthDeathSpec:
    """Birth-death chain on ``{0, ..., N}`` with reflecting truncation.

    ``a`` is the death rate ``i -> i-1`` and ``b`` the birth rate
    ``i -> i+1``.  ``a(0)`` is forced to 0 and the birth rate out of ``N`` is
    dropped.  ``b0`` overrides ``b(0)`` for families such as ``a_i = b_i =
    i^gamma`` whose formula vanishes at the origin.
    """

    a_expr: Expr
    b_expr: Expr
    N: int
    params: dict = field(default_factory=dict)
    b0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a_expr", _as_expr(self.a_expr))
        object.__setattr__(self, "b_expr", _as_expr(self.b_expr))
        object.__setattr__(self, "params", dict(self.params))
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParams(f"truncation level must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        a, b = self.rates()
        if np.any(a[1:] <= 0) or not np.all(np.isfinite(a)):
            bad = int(np.flatnonzero(~(a[1:] > 0) | ~np.isfinite(a[1:]))[0]) + 1
            raise InvalidParams(f"death rate must be positive and finite at i={bad}")
        if np.any(b[:-1] <= 0) or not np.all(np.isfinite(b)):
            bad = int(np.flatnonzero(~(b[:-1] > 0) | ~np.isfinite(b[:-1]))[0])
            raise InvalidParams(f"birth rate must be positive and finite at i={bad}")

    def with_level(self, N: int) -> "BirthDeathSpec":
        return BirthDeathSpec(self.a_expr, self.b_expr, N, self.params, self.b0)

    def with_params(self, **params) -> "BirthDeathSpec":
        return BirthDeathSpec(self.a_expr, self.b_expr, self.N, {**self.params, **params}, self.b0)

    def death(self, i) -> np.ndarray:
        """Untruncated death rates at integer points ``i``."""
        i = np.asarray(i)
        return np.where(i == 0, 0.0, self.a_expr.evaluate(i, self.params))

    def birth(self, i) -> np.ndarray:
        """Untruncated birth rates at integer points ``i``."""
        i = np.asarray(i)
        out = self.b_expr.evaluate(i, self.params)
        if self.b0 is not None:
            out = np.where(i == 0, float(self.b0), out)
        return out

    def rates(self):
        """``(a, b)`` on ``0..N`` after truncation."""
        i = np.arange(self.N + 1)
        a = self.death(i)
        b = self.birth(i)
        b[-1] = 0.0
        return a, b

    def log_mu(self) -> np.ndarray:
        """``log mu_i`` with ``mu_0 = 1`` and ``mu_i = mu_{i-1} b_{i-1} / a_i``."""
        a, b = self.rates()
        steps = np.log(b[:-1]) - np.log(a[1:])
        return np.concatenate(([0.0], np.cumsum(steps)))

    def path_form(self) -> PathForm:
        a, b = self.rates()
        log_mu = self.log_mu()
        # J_{i,i+1} = pi_i b_i; the form normalises pi, so shift by the same constant
        log_J = log_mu[:-1] + np.log(b[:-1])
        shift = np.max(log_mu)
        lse = shift + np.log(np.sum(np.exp(log_mu - shift)))
        return PathForm(log_mu, log_J - lse)

    def family_weights(self, alpha: float = 1.0) -> PathWeights:
        """``r = max(q_i, q_{i+1})`` from the untruncated total rates.

        At the top state the truncated rate ``a_N`` is replaced by
        ``a_N + b_N``, so the last weights agree with the infinite chain and
        the truncation adds no artificial drift at the boundary.  Larger
        weights only lower the densities, so the normalisation still holds.
        """
        i = np.arange(self.N + 1)
        lq = np.log(self.death(i) + self.birth(i))
        return PathWeights(np.maximum(lq[:-1], lq[1:]), lq, alpha, 1.0)

    def form(self) -> SymmetricJumpForm:
        return self.path_form().to_form()

    def chain(self) -> RateChain:
        a, b = self.rates()
        n = self.N + 1
        q = sparse.diags([b[:-1], a[1:]], [1, -1], shape=(n, n), format="csr")
        return RateChain(self.path_form().pi, q)

    @property
    def n(self) -> int:
        return self.N + 1


@dataclass(frozen=True)
class LatticeChainSpec:
    """Finite-range chain on the box ``{x in Z^d : |x_k| <= L}``.

    ``rules`` maps a displacement (tuple of ``d`` integers, ``0 < |e|_1 <= R``)
    to a rate expression in ``i1, ..., id`` (source coordinates) and ``i``
    (the source's ``l1`` norm).  Jumps leaving the box are dropped.
    """

    d: int
    L: int
    R: int
    rules: dict
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidParams("lattice dimension must be 1, 2 or 3")
        if self.L < 1 or self.R < 1:
            raise InvalidParams("box radius and range must be positive")
        variables = ("i",) + tuple(f"i{k + 1}" for k in range(self.d))
        rules = {}
        for disp, rate in self.rules.items():
            disp = tuple(int(v) for v in disp)
            if len(disp) != self.d:
                raise InvalidParams(f"displacement {disp} does not have {self.d} components")
            if not 0 < sum(abs(v) for v in disp) <= self.R:
                raise InvalidParams(f"displacement {disp} is outside the range R={self.R}")
            rules[disp] = _as_expr(rate, variables)
        object.__setattr__(self, "rules", rules)
        object.__setattr__(self, "params", dict(self.params))

    def sites(self) -> np.ndarray:
        axis = np.arange(-self.L, self.L + 1)
        return np.array(list(itertools.product(axis, repeat=self.d)), dtype=int)

    def rate_matrix(self) -> sparse.csr_matrix:
        sites = self.sites()
        side = 2 * self.L + 1
        n = len(sites)
        env = {f"i{k + 1}": sites[:, k] for k in range(self.d)}
        norm = np.abs(sites).sum(axis=1)
        rows, cols, vals = [], [], []
        for disp, rate in self.rules.items():
            target = sites + np.asarray(disp)
            inside = np.all(np.abs(target) <= self.L, axis=1)
            values = rate.evaluate(norm, self.params, env)
            if np.any(values[inside] < 0):
                raise InvalidParams(f"negative rate for displacement {disp}")
            idx = np.ravel_multi_index(tuple((target[inside] + self.L).T), (side,) * self.d)
            rows.append(np.flatnonzero(inside))
            cols.append(idx)
            vals.append(values[inside])
        q = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        return q

    def chain(self) -> RateChain:
        return RateChain.from_rates(self.rate_matrix())

    def form(self) -> SymmetricJumpForm:
        return form_from_rates(self.chain())

    @property
    def n(self) -> int:
        return (2 * self.L + 1) ** self.d


def two_state_form(p: float) -> SymmetricJumpForm:
    """``pi = (p, 1-p)`` with ``J_01 = J_10 = 1/2``."""
    if not 0 < p < 1:
        raise InvalidParams("p must lie in (0, 1)")
    J = sparse.csr_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
    return SymmetricJumpForm(np.array([p, 1.0 - p]), J)


def path_graph_form(n: int, rate: float = 1.0) -> SymmetricJumpForm:
    """Uniform measure and rate ``rate`` to each neighbour on ``{0..n-1}``."""
    if n < 2:
        raise InvalidParams("a path needs at least two states")
    w = np.full(n - 1, rate / n)
    J = sparse.diags([w, w], [1, -1], shape=(n, n), format="csr")
    return SymmetricJumpForm(np.full(n, 1.0 / n), J)


def star_form(beta=None, m: int | None = None, q0: float | None = None) -> SymmetricJumpForm:
    """Hub 0 with leaves ``1..m``: ``q_{0k} = beta_k`` and ``q_{k0} = 1/2``.

    Either pass the leaf weights ``beta`` or ``q0`` and ``m``, in which case
    ``beta_k`` is proportional to ``2^{-k}`` and sums to ``q0``.
    """
    if beta is None:
        if q0 is None or m is None:
            raise InvalidParams("Star needs either beta or both q0 and m")
        if m < 1:
            raise InvalidParams("Star needs at least one leaf")
        if q0 <= 0:
            raise InvalidParams("q0 must be positive")
        w = 2.0 ** -np.arange(1, m + 1)
        beta = q0 * w / w.sum()
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.size < 1 or np.any(beta <= 0):
        raise InvalidParams("leaf weights must be positive")
    if m is not None and beta.size != m:
        raise InvalidParams(f"expected {m} leaf weights, got {beta.size}")
    pi0 = 1.0 / (1.0 + 2.0 * beta.sum())
    pi = np.concatenate(([pi0], 2.0 * pi0 * beta))
    pi /= pi.sum()
    n = pi.size
    # leaf k jumps to the hub at rate 1/2, so J_{k0} = pi_k / 2 exactly in floating point
    flux = 0.5 * pi[1:]
    leaves = np.arange(1, n)
    J = sparse.csr_matrix(
        (np.concatenate((flux, flux)), (np.concatenate((np.zeros(n - 1, int), leaves)), np.concatenate((leaves, np.zeros(n - 1, int))))),
        shape=(n, n),
    )
    return SymmetricJumpForm(pi, J)


def _poly_bd(gamma: float, N: int) -> BirthDeathSpec:
    if gamma <= 0:
        raise InvalidParams("gamma must be positive")
    return BirthDeathSpec("i^$gamma", "i^$gamma", N, {"gamma": float(gamma)}, b0=1.0)


def _const_bd(a: float, b: float, N: int) -> BirthDeathSpec:
    if a <= 0 or b <= 0:
        raise InvalidParams("rates must be positive")
    return BirthDeathSpec("$a", "$b", N, {"a": float(a), "b": float(b)})


def _parity_bd(N: int) -> BirthDeathSpec:
    return BirthDeathSpec("if_even(i^4, i^2)", "if_even(i^4, i^2)", N, b0=1.0)


FIXTURES = {
    "TwoState": lambda p=0.5: two_state_form(p),
    "Path": lambda n=3: path_graph_form(n),
    "ConstBD": lambda a=4.0, b=1.0, N=2000: _const_bd(a, b, N),
    "PolyBD": lambda gamma=2.0, N=2000: _poly_bd(gamma, N),
    "Star": lambda beta=None, m=50, q0=None: star_form(beta, m, q0),
    "ParityBD": lambda N=2000: _parity_bd(N),
}


def build_fixture(name: str, **params):
    """Named example chains; unknown names raise ``UnknownFixture``."""
    try:
        factory = FIXTURES[name]
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidParams(f"bad parameters for {name}: {exc}") from None


def random_form(rng: np.random.Generator, n: int, *, extra_edges: float = 0.3, killing: bool = False) -> SymmetricJumpForm:
    """Connected random form: a random spanning tree plus extra edges.

    Weights and the measure are drawn away from zero so that Cheeger ratios
    stay well conditioned.
    """
    pi = rng.uniform(0.2, 1.0, n)
    pi /= pi.sum()
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(0, k)])))) for k in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edges:
                edges.add((i, j))
    rows, cols, vals = [], [], []
    for i, j in sorted(edges):
        w = rng.uniform(0.05, 1.0) * min(pi[i], pi[j])
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    J = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K = rng.uniform(0.0, 1.0, n) * pi if killing else None
    return SymmetricJumpForm(pi, J, K)


def random_birth_death(rng: np.random.Generator, N: int) -> SymmetricJumpForm:
    """Random birth-death form on ``{0..N}``."""
    a = np.concatenate(([0.0], rng.uniform(0.2, 3.0, N)))
    b = np.concatenate((rng.uniform(0.2, 3.0, N), [0.0]))
    log_mu = np.concatenate(([0.0], np.cumsum(np.log(b[:-1]) - np.log(a[1:]))))
    mu = np.exp(log_mu - log_mu.max())
    pi = mu / mu.sum()
    w = pi[:-1] * b[:-1]
    J = sparse.diags([w, w], [1, -1], shape=(N + 1, N + 1), format="csr")
    return SymmetricJumpForm(pi, J)
