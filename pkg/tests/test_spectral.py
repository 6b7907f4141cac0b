import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from conftest import forms
from gapcert.chains import build_fixture, path_graph_form, random_birth_death, random_form, star_form
from gapcert.errors import InvalidParams, KillingPresent
from gapcert.forms import PathForm, SymmetricJumpForm
from gapcert.spectral import (
    DisconnectedWarning,
    dirichlet_lambda0,
    jacobi_eigh,
    lambda0_exact,
    lambda1_exact,
    neumann_lambda1,
    rayleigh_quotient,
    sturm_count,
    tridiagonal_eigenvalue,
    truncation_sweep,
)


def _dense_oracle(form, index):
    """Independent route: symmetrised Laplacian straight into numpy eigvalsh."""
    L = form.laplacian().toarray()
    d = 1 / np.sqrt(form.pi)
    return np.linalg.eigvalsh(d[:, None] * L * d[None, :])[index]


class TestJacobi:
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_matches_eigh(self, n, seed):
        a = np.random.default_rng(seed).standard_normal((n, n))
        a = a + a.T
        w, v = jacobi_eigh(a)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * max(1, np.abs(a).max()))
        np.testing.assert_allclose(a @ v, v * w, atol=1e-10 * max(1, np.abs(a).max()))


class TestTridiagonal:
    @given(st.integers(2, 30), st.integers(0, 2**32 - 1))
    def test_sturm_count_matches_eigenvalues(self, n, seed):
        rng = np.random.default_rng(seed)
        diag, off = rng.standard_normal(n), rng.uniform(0.1, 1, n - 1)
        w = np.linalg.eigvalsh(np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))
        shifts = np.linspace(w[0] - 1, w[-1] + 1, 17)
        counts = sturm_count(diag, off, shifts)
        np.testing.assert_array_equal(counts, [(w < s).sum() for s in shifts])

    @pytest.mark.parametrize("index", [0, 1, 5])
    def test_bisection(self, index):
        n = 12
        diag, off = np.full(n, 2.0), np.full(n - 1, -1.0)
        expected = 2 - 2 * np.cos(np.pi * (index + 1) / (n + 1))
        assert tridiagonal_eigenvalue(diag, off, index) == pytest.approx(expected, abs=1e-13)


class TestLambda0:
    def test_no_killing_is_zero(self, rng):
        res = lambda0_exact(random_form(rng, 6))
        assert res.value == 0.0
        np.testing.assert_allclose(res.eigvec, res.eigvec[0])

    def test_single_state(self):
        form = SymmetricJumpForm(np.array([1.0]), sparse.csr_matrix((1, 1)), np.array([3.0]))
        assert lambda0_exact(form).value == pytest.approx(3.0, rel=1e-14)

    def test_path_with_killing(self):
        base = path_graph_form(3)
        form = SymmetricJumpForm(base.pi, base.J, base.pi.copy())
        expected = _dense_oracle(form, 0)
        for method in ("auto", "dense", "jacobi"):
            assert lambda0_exact(form, method).value == pytest.approx(expected, abs=1e-13)


class TestLambda1:
    @pytest.mark.parametrize("p", [0.1, 0.3, 0.5])
    def test_two_state(self, p):
        assert lambda1_exact(build_fixture("TwoState", p=p)).value == pytest.approx(1 / (2 * p * (1 - p)), rel=1e-14)

    def test_two_state_half_is_exact(self):
        assert lambda1_exact(build_fixture("TwoState", p=0.5)).value == 2.0

    def test_killing_is_rejected(self, rng):
        with pytest.raises(KillingPresent):
            lambda1_exact(random_form(rng, 4, killing=True))

    @given(forms(max_n=12))
    def test_auto_matches_dense_oracle(self, form):
        expected = _dense_oracle(form, 1)
        assert lambda1_exact(form).value == pytest.approx(expected, rel=1e-9, abs=1e-12)
        assert lambda1_exact(form, "jacobi").value == pytest.approx(expected, rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_tridiagonal_matches_dense(self, seed):
        form = random_birth_death(np.random.default_rng(seed), 30)
        path = PathForm.from_form(form)
        assert lambda1_exact(path).value == pytest.approx(lambda1_exact(form, "dense").value, rel=1e-10)

    def test_eigenvector_attains_value(self, rng):
        form = random_form(rng, 9)
        res = lambda1_exact(form, "dense")
        assert rayleigh_quotient(form, res.eigvec) == pytest.approx(res.value, rel=1e-10)

    @given(forms(max_n=10), st.integers(0, 2**32 - 1))
    def test_rayleigh_quotients_are_above_gap(self, form, seed):
        lam = lambda1_exact(form).value
        for f in np.random.default_rng(seed).standard_normal((10, form.n)):
            f = f - form.pi @ f
            assert rayleigh_quotient(form, f) >= lam * (1 - 1e-10)

    def test_star_leaf_eigenvalue(self):
        assert lambda1_exact(star_form(m=50, q0=0.4)).value == pytest.approx(0.5, abs=1e-10)

    def test_const_bd_decreases_toward_limit(self):
        values = [lambda1_exact(build_fixture("ConstBD", a=4.0, b=1.0, N=N)).value for N in (50, 200, 2000)]
        assert values[0] > values[1] > values[2] > 1.0 - 1e-12

    def test_tiny_eigenvalue_resolved_relatively(self):
        bd = build_fixture("PolyBD", gamma=1.2, N=3000)
        tri = lambda1_exact(bd).value
        # the gap is tiny yet still a certified positive number
        assert 0 < tri < 1e-2


class TestSubsets:
    def test_dirichlet_two_state(self):
        assert dirichlet_lambda0(build_fixture("TwoState", p=0.5), [0]).value == pytest.approx(1.0, rel=1e-14)

    def test_dirichlet_on_whole_space_without_killing(self, rng):
        form = random_form(rng, 5)
        assert dirichlet_lambda0(form, range(5)).value == pytest.approx(0.0, abs=1e-12)

    def test_dirichlet_path_matches_dense(self, rng):
        form = random_birth_death(rng, 15)
        B = range(3, 12)
        assert dirichlet_lambda0(PathForm.from_form(form), B).value == pytest.approx(
            dirichlet_lambda0(form, B, "dense").value, rel=1e-10
        )

    def test_dirichlet_vanishes_for_slow_polynomial_tail(self):
        values = [dirichlet_lambda0(build_fixture("PolyBD", gamma=1.5, N=N), range(1, N + 1)).value for N in (100, 1000)]
        assert values[1] < values[0] / 2

    def test_neumann_whole_space(self, rng):
        form = random_form(rng, 7)
        assert neumann_lambda1(form, range(7)).value == pytest.approx(lambda1_exact(form).value, rel=1e-12)

    def test_neumann_pair(self, rng):
        form = random_form(rng, 6, extra_edges=1.0)
        i, j = 0, int(form.J[0].indices[0])
        pi = form.pi
        pB = pi[i] + pi[j]
        # interior form keeps J, the measure is conditioned on B
        expected = form.J[i, j] / ((pi[i] / pB) * (pi[j] / pB))
        assert neumann_lambda1(form, [i, j]).value == pytest.approx(expected, rel=1e-12)

    def test_neumann_disconnected(self):
        form = path_graph_form(5)
        with pytest.warns(DisconnectedWarning):
            assert neumann_lambda1(form, [0, 1, 3, 4]).value == 0.0


class TestSweep:
    @pytest.mark.parametrize("gamma,decays", [(1.5, True), (2.5, False)])
    def test_polynomial_levels(self, gamma, decays):
        rows = truncation_sweep(build_fixture("PolyBD", gamma=gamma, N=10), [200, 2000])
        ratio = rows[1].lambda1 / rows[0].lambda1
        assert (ratio < 0.5) if decays else (ratio >= 0.9)

    def test_levels_must_increase(self):
        with pytest.raises(InvalidParams):
            truncation_sweep(build_fixture("PolyBD", gamma=2.0, N=10), [200, 100])


def test_no_warning_on_connected(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        neumann_lambda1(random_form(rng, 6), range(6))
