import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from conftest import forms
from gapcert.chains import build_fixture, random_birth_death, random_form, star_form
from gapcert.errors import (
    DetailedBalanceViolation,
    InvalidForm,
    InvalidParams,
    SymmetryViolation,
    UnknownFixture,
)
from gapcert.forms import (
    ModifiedFormParams,
    PathForm,
    RateChain,
    SymmetricJumpForm,
    check_normalization,
    default_r_s,
    form_from_kernel,
    form_from_rates,
    modified_form,
    rates_from_form,
    tilt_measure,
)
from gapcert.spectral import lambda1_exact


class TestConstruction:
    def test_rejects_bad_measure(self):
        J = sparse.csr_matrix((2, 2))
        with pytest.raises(InvalidForm):
            SymmetricJumpForm(np.array([0.5, 0.6]), J)
        with pytest.raises(InvalidForm):
            SymmetricJumpForm(np.array([1.0, 0.0]), J)

    def test_rejects_asymmetric_jumps(self):
        J = sparse.csr_matrix(np.array([[0.0, 0.5], [0.4, 0.0]]))
        with pytest.raises(SymmetryViolation):
            SymmetricJumpForm(np.array([0.5, 0.5]), J)

    def test_rejects_diagonal_jumps(self):
        J = sparse.csr_matrix(np.array([[0.1, 0.5], [0.5, 0.0]]))
        with pytest.raises(InvalidForm):
            SymmetricJumpForm(np.array([0.5, 0.5]), J)

    def test_stored_jumps_are_exactly_symmetric(self):
        J = sparse.csr_matrix(np.array([[0.0, 0.5], [0.5 * (1 + 1e-13), 0.0]]))
        form = SymmetricJumpForm(np.array([0.5, 0.5]), J)
        assert form.J[0, 1] == form.J[1, 0]

    def test_detailed_balance_is_enforced(self):
        q = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(DetailedBalanceViolation):
            RateChain(np.array([0.3, 0.7]), q)


class TestFormFromRates:
    def test_symmetric_two_state(self):
        q = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        form = form_from_rates(RateChain(np.array([0.5, 0.5]), q))
        assert form.J[0, 1] == 0.5 and form.J[1, 0] == 0.5
        assert np.all(form.K == 0)

    def test_asymmetric_rates(self):
        q = sparse.csr_matrix(np.array([[0.0, 2.0], [1.0, 0.0]]))
        form = form_from_rates(RateChain.from_rates(q))
        np.testing.assert_allclose(form.pi, [1 / 3, 2 / 3], rtol=1e-14)
        assert form.J[0, 1] == pytest.approx(2 / 3, rel=1e-14)

    def test_pure_killing(self):
        chain = RateChain(np.array([1.0]), sparse.csr_matrix((1, 1)), np.array([3.0]))
        form = form_from_rates(chain)
        assert form.K[0] == 3.0 and form.J.nnz == 0

    @given(forms(max_n=10, killing=True))
    def test_round_trip(self, form):
        chain = rates_from_form(form)
        back = form_from_rates(chain)
        np.testing.assert_allclose(back.J.toarray(), form.J.toarray(), rtol=1e-12, atol=0)
        np.testing.assert_allclose(back.K, form.K, rtol=1e-12, atol=0)


class TestFixtures:
    def test_unknown_name(self):
        with pytest.raises(UnknownFixture):
            build_fixture("Nope")

    @pytest.mark.parametrize("name,params", [("PolyBD", {"gamma": 0.0}), ("Star", {"q0": 1.0, "m": 0})])
    def test_invalid_parameters(self, name, params):
        with pytest.raises(InvalidParams):
            build_fixture(name, **params)

    def test_star_measure(self):
        beta = np.array([0.3, 0.2, 0.1])
        form = star_form(beta)
        pi0 = 1 / (1 + 2 * beta.sum())
        np.testing.assert_allclose(form.pi, np.concatenate(([pi0], 2 * pi0 * beta)), rtol=1e-14)

    def test_poly_weights_are_inverse_squares(self):
        bd = build_fixture("PolyBD", gamma=2.0, N=50)
        i = np.arange(1, 51)
        np.testing.assert_allclose(bd.log_mu()[1:], -2 * np.log(i), atol=1e-12)

    def test_parity_weights_are_inverse_rates(self):
        bd = build_fixture("ParityBD", N=40)
        a, _ = bd.rates()
        np.testing.assert_allclose(bd.log_mu()[1:], -np.log(a[1:]), atol=1e-11)


class TestModifiedForm:
    def test_alpha_zero_is_identity(self, rng):
        form = random_form(rng, 6)
        params = default_r_s(form, 0.0)
        assert modified_form(form, params) is form

    def test_two_state_weights_are_one(self):
        form = build_fixture("TwoState", p=0.5)
        params = default_r_s(form, 0.5)
        assert params.rescale == 1.0
        np.testing.assert_array_equal(params.r.toarray(), [[0, 1], [1, 0]])
        np.testing.assert_array_equal(modified_form(form, params).J.toarray(), form.J.toarray())

    def test_const_rates_divide_by_total_rate(self):
        path = build_fixture("ConstBD", a=4.0, b=1.0, N=30).path_form()
        form = path.to_form()
        params = default_r_s(form, 1.0)
        coo = form.J.tocoo()
        interior = (coo.row > 0) & (coo.col > 0)
        np.testing.assert_allclose(params.r.tocsr()[coo.row, coo.col].A1[interior], 5.0)
        assert params.rescale == 1.0

    @pytest.mark.parametrize("r,peak,rescale", [(2.0, 0.5, 1.0), (0.5, 2.0, 2.0), (1.0, 1.0, 1.0)])
    def test_normalization_report(self, r, peak, rescale):
        form = build_fixture("TwoState", p=0.5)
        params = ModifiedFormParams(sparse.csr_matrix(np.array([[0.0, r], [r, 0.0]])), np.zeros(2))
        report = check_normalization(form, params)
        assert report.max_density == pytest.approx(peak, rel=1e-15)
        assert report.rescale == pytest.approx(rescale, rel=1e-15)

    @given(forms(max_n=10, killing=True))
    def test_default_weights_are_normalized(self, form):
        params = default_r_s(form)
        assert check_normalization(form, params).max_density <= 1 + 1e-12

    def test_killing_with_s_equal_q_has_unit_density(self, rng):
        form = random_form(rng, 7, killing=True)
        form = SymmetricJumpForm(form.pi, form.J, form.pi * 0.5 + form.K)
        params = default_r_s(form)
        assert params.rescale == 1.0
        assert check_normalization(form, params).max_density == pytest.approx(1.0, rel=1e-14)

    @given(forms(max_n=8))
    def test_monotone_in_alpha_where_weights_exceed_one(self, form):
        params = default_r_s(form)
        half = modified_form(form, params.with_alpha(0.5)).J.toarray()
        one = modified_form(form, params.with_alpha(1.0)).J.toarray()
        r = params.r_eff.toarray()
        mask = r >= 1
        assert np.all(one[mask] <= half[mask] * (1 + 1e-15))
        assert np.all(half[mask] <= form.J.toarray()[mask] * (1 + 1e-15))


class TestDirichletForm:
    @given(forms(max_n=12, killing=True), st.integers(0, 2**32 - 1))
    def test_nonnegative(self, form, seed):
        f = np.random.default_rng(seed).standard_normal((50, form.n)) * 10
        assert all(form.dirichlet(x) >= 0 for x in f)

    def test_laplacian_matches_pair_sum(self, rng):
        form = random_form(rng, 9, killing=True)
        f = rng.standard_normal(9)
        assert f @ form.laplacian() @ f == pytest.approx(form.dirichlet(f), rel=1e-12)


class TestKernel:
    def test_identity_kernel(self):
        res = form_from_kernel(sparse.identity(3, format="csr"), np.full(3, 1 / 3))
        assert res.M == 1.0
        assert res.form.J.nnz == 0 and np.all(res.form.K == 0)
        assert res.operator_eigenvalue(0.0) == 1.0

    @pytest.mark.parametrize("beta", [0.1, 0.25, 0.4])
    def test_two_point_kernel(self, beta):
        p = sparse.csr_matrix(np.array([[1 - beta, beta], [beta, 1 - beta]]))
        res = form_from_kernel(p, np.array([0.5, 0.5]))
        lam = lambda1_exact(res.form.without_killing()).value
        assert lam == pytest.approx(2 * beta, rel=1e-14)
        assert res.operator_eigenvalue(lam) == pytest.approx(1 - 2 * beta, rel=1e-14)

    def test_zero_kernel(self):
        res = form_from_kernel(sparse.csr_matrix((2, 2)), np.array([0.5, 0.5]))
        assert res.M == 0.0 and np.all(res.form.K == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_quadratic_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 11))
        pi = rng.uniform(0.1, 1, n)
        pi /= pi.sum()
        w = rng.uniform(0, 1, (n, n))
        w = w + w.T
        p = w / pi[:, None] * 0.1  # pi_i p_ij symmetric
        res = form_from_kernel(sparse.csr_matrix(p), pi)
        P = np.diag(pi) @ p
        for f in rng.standard_normal((100, n)):
            lhs = res.M * (pi @ f**2) - f @ P @ f
            assert lhs == pytest.approx(res.form.dirichlet(f), rel=1e-10, abs=1e-12)


class TestPathForm:
    def test_log_space_survives_underflow(self):
        bd = build_fixture("ConstBD", a=4.0, b=1.0, N=2000)
        path = bd.path_form()
        assert np.all(np.isfinite(path.log_pi))
        assert path.log_pi[-1] < -2000
        with pytest.raises(InvalidForm):
            path.to_form()

    def test_round_trip(self, rng):
        form = random_birth_death(rng, 12)
        back = PathForm.from_form(form).to_form()
        np.testing.assert_allclose(back.J.toarray(), form.J.toarray(), rtol=1e-13)

    def test_default_weights_agree_with_general_route(self, rng):
        form = random_birth_death(rng, 10)
        path = PathForm.from_form(form)
        mod_path = path.modified(path.default_weights(1.0)).to_form()
        mod_form = modified_form(form, default_r_s(form, 1.0))
        np.testing.assert_allclose(mod_path.J.toarray(), mod_form.J.toarray(), rtol=1e-12)


class TestTilt:
    def test_constant_tilt_is_identity(self, rng):
        form = random_form(rng, 6)
        c = float(form.total_rates().max())
        tilt = tilt_measure(form, np.full(6, c))
        assert tilt.valid and tilt.alpha_p == c
        np.testing.assert_allclose(tilt.form.pi, form.pi, rtol=1e-14)
        np.testing.assert_allclose(tilt.form.J.toarray() * c, form.J.toarray(), rtol=1e-14)

    def test_validity_flag(self):
        form = build_fixture("TwoState", p=0.5)
        assert not tilt_measure(form, np.array([0.5, 0.5])).valid
