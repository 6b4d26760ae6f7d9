import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg

from wavedim.bounds import growing_root
from wavedim.dynamics import GalerkinModel, NonlinearitySpec, _advance, simulate
from wavedim.lyapunov import (
    ConvergenceWarning,
    VariationalBundle,
    _metric,
    compute_exponents,
    eps0,
    generator_matrix,
    ky_dimension,
    n_traces,
    q_curve,
    q_of_n,
    variational_rhs,
)
from wavedim.spectral import Domain

PI = math.pi


def model(M=8, spec=None, length=PI):
    return GalerkinModel(Domain.interval(length), M, spec or NonlinearitySpec(gamma=0.2))


def quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return fn(*a, **kw)


class TestVariationalRhs:
    def _bundle(self, m, eps, phi, psi):
        traj = simulate(m.zero_state(), m, 0.0, 0.1)
        return VariationalBundle(m, traj, phi, psi, eps)

    def test_linear_block(self):
        m = model(4)
        g, eps = 0.2, 0.05
        phi = np.zeros((4, 1, 1))
        psi = np.zeros((4, 1, 1))
        phi[2], psi[2] = 0.7, -0.3
        lam = 9.0
        dphi, dpsi = variational_rhs(self._bundle(m, eps, phi, psi), 0.0)
        L = np.array([[eps, -1.0], [lam - eps * (g - eps), g - eps]])
        expected = -L @ np.array([0.7, -0.3])
        assert dphi[2, 0, 0] == pytest.approx(expected[0])
        assert dpsi[2, 0, 0] == pytest.approx(expected[1])
        assert np.all(dphi[[0, 1, 3]] == 0)

    def test_zero_shift_is_plain_linearization(self):
        m = model(4, NonlinearitySpec.quadratic(0.2, 0.5))
        rng = np.random.default_rng(0)
        phi, psi = rng.standard_normal((2, 4, 1, 3))
        dphi, dpsi = variational_rhs(self._bundle(m, 0.0, phi, psi), 0.0)
        J = generator_matrix(m, np.zeros((4, 1)))
        X = np.vstack([phi.reshape(4, 3), psi.reshape(4, 3)])
        ref = J @ X
        assert np.allclose(dphi.reshape(4, 3), ref[:4])
        assert np.allclose(dpsi.reshape(4, 3), ref[4:])

    def test_missing_base_time(self):
        m = model(4)
        b = self._bundle(m, 0.05, np.zeros((4, 1, 1)), np.zeros((4, 1, 1)))
        with pytest.raises(ValueError):
            variational_rhs(b, 1.0)

    def test_constant_jacobian_roots(self):
        a0 = -3.5
        m = model(6, NonlinearitySpec.quadratic(0.2, a0))
        w = np.sort(linalg.eigvals(generator_matrix(m, np.zeros((6, 1)))).real)[::-1]
        oracle = []
        for lam in m.lam:
            oracle.extend(np.roots([1, 0.2, lam + a0]).astype(complex).real)
        assert np.allclose(w, np.sort(oracle)[::-1], atol=1e-10)

    def test_tangent_flow_matches_expm(self):
        a0 = -3.5
        m = model(6, NonlinearitySpec.quadratic(0.2, a0))
        J = generator_matrix(m, np.zeros((6, 1)))
        X0 = np.random.default_rng(1).standard_normal((12, 2))
        du, dv = X0[:6].reshape(6, 1, 2), X0[6:].reshape(6, 1, 2)
        u, v = np.zeros((6, 1)), np.zeros((6, 1))
        dt = 1 / 64
        for _ in range(50 * 64):
            u, v, du, dv = _advance(m, u, v, dt, du, dv)
        X = np.vstack([du.reshape(6, 2), dv.reshape(6, 2)])
        ref = linalg.expm(J * 50) @ X0
        assert np.abs(X - ref).max() <= 1e-6 * np.abs(ref).max()
        rates = np.log(np.linalg.norm(X, axis=0)) / 50
        assert np.all(rates < max(np.roots([1, 0.2, 1 + a0]).real) + 0.05)


class TestExponents:
    def test_linear_all_equal(self):
        r = compute_exponents(model(16), model(16).zero_state(), 4, 2000.0)
        assert np.allclose(r.exponents, -0.1, atol=1e-4)
        assert r.method == "frozen" and r.converged

    def test_trajectory_matches_frozen_for_linear(self):
        m = model(8)
        a = compute_exponents(m, m.zero_state(), 4, 400.0, method="frozen")
        b = compute_exponents(m, m.random_state(1.0, 0), 4, 400.0, method="trajectory", t_burn=0.0,
                              dt=1 / 32)
        assert np.allclose(a.exponents, b.exponents, atol=1e-4)

    def test_rotational_top_exponent(self):
        m = model(32, NonlinearitySpec.rotational_example(0.1))
        r = compute_exponents(m, m.zero_state(), 4, 400.0, method="frozen")
        mu = growing_root(0.1, 1.0, 0.0, 1.0).real
        assert r.exponents[0] == pytest.approx(mu, abs=1e-3)

    def test_sum_rule_small(self):
        m = model(16, NonlinearitySpec.rotational_example(0.1))
        r = quiet(compute_exponents, m, m.random_state(2.0, 1), m.dim, 10.0, t_burn=10.0)
        assert r.exponents.sum() == pytest.approx(-0.1 * 16 * 2, abs=1e-6 * 32)

    def test_sum_rule_gradient(self):
        m = model(12, NonlinearitySpec.quartic(0.3, kappa=2.0))
        r = quiet(compute_exponents, m, m.random_state(3.0, 2), m.dim, 10.0, t_burn=5.0)
        assert r.exponents.sum() == pytest.approx(-0.3 * 12, abs=1e-6 * 12)

    def test_e_orthonormal_tangents(self):
        m = model(12, NonlinearitySpec.rotational_example(0.2))
        r = quiet(compute_exponents, m, m.random_state(1.0, 3), 6, 5.0, t_burn=1.0)
        to_y, _ = _metric(m, r.epsilon)
        Y = to_y(r.tangents)
        assert np.allclose(Y.T @ Y, np.eye(6), atol=1e-10)

    def test_sorted_and_cumulative(self):
        m = model(12, NonlinearitySpec.rotational_example(0.2))
        r = quiet(compute_exponents, m, m.random_state(1.0, 3), 6, 5.0, t_burn=1.0)
        assert np.all(np.diff(r.exponents) <= 0)
        assert np.allclose(r.cumulative, np.cumsum(r.exponents))
        assert 0 <= r.ky_dimension <= m.dim

    def test_deterministic(self):
        m = model(12, NonlinearitySpec.rotational_example(0.2))
        a = quiet(compute_exponents, m, m.random_state(1.0, 3), 6, 5.0, t_burn=1.0, seed=4)
        b = quiet(compute_exponents, m, m.random_state(1.0, 3), 6, 5.0, t_burn=1.0, seed=4)
        assert np.array_equal(a.exponents, b.exponents)

    def test_nonconvergence_warns(self):
        m = model(16, NonlinearitySpec.rotational_example(0.1))
        with pytest.warns(ConvergenceWarning):
            r = compute_exponents(m, m.zero_state(), 4, 1.0, method="frozen", t_align=0.0)
        assert not r.converged

    def test_preconditions(self):
        m = model(8, NonlinearitySpec.quartic(0.2))
        with pytest.raises(ValueError):
            compute_exponents(m, m.zero_state(), m.dim + 1, 1.0)
        with pytest.raises(ValueError):
            compute_exponents(m, m.random_state(1.0, 0), 2, 1.0, method="frozen")
        with pytest.raises(ValueError):
            compute_exponents(m, m.zero_state(), 2, 1.0, epsilon=1.0)
        r = model(16, NonlinearitySpec.rotational_example(0.1))
        with pytest.raises(ValueError):
            compute_exponents(r, r.zero_state(), 2, 10.0, qr_interval=5.0, method="frozen")

    def test_eps0(self):
        assert eps0(0.2, 1.0) == pytest.approx(0.05)
        assert eps0(4.0, 1.0) == pytest.approx(1 / 8)


class TestKY:
    def test_examples(self):
        assert ky_dimension([1, -2]) == pytest.approx(1.5)
        assert ky_dimension([-1, -2]) == 0
        assert ky_dimension([0.5, 0.4, -1.0]) == pytest.approx(2.9)
        assert ky_dimension([0.5, 0.4]) == 2
        assert ky_dimension([]) == 0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.lists(st.floats(0.01, 5), max_size=5))
    def test_appending_more_negative(self, mus, extra):
        mus = sorted(mus, reverse=True)
        if sum(mus) >= 0:
            return
        base = ky_dimension(mus)
        tail = [mus[-1] - e for e in extra]
        assert ky_dimension(mus + sorted(tail, reverse=True)) == pytest.approx(base)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=12))
    def test_range(self, mus):
        mus = sorted(mus, reverse=True)
        assert 0 <= ky_dimension(mus) <= len(mus)


class TestQ:
    def test_linear_bound(self):
        m = model(16)
        eps = 0.05
        tr = n_traces(m, np.zeros((16, 1)), eps, m.dim)
        n = np.arange(1, m.dim + 1)
        assert np.all(tr <= -eps * n / 2 + 1e-12)
        q = q_curve(m, m.random_state(1.0, 0), m.dim, 2.0, t_burn=0.0, stride=8)
        assert np.allclose(q, tr)

    def test_zero(self):
        m = model(4)
        assert q_of_n(m, m.zero_state(), 0, 1.0) == 0.0

    def test_full_trace(self):
        m = model(8, NonlinearitySpec.quartic(0.2))
        u = m.random_state(3.0, 1).u
        assert n_traces(m, u, 0.05, m.dim)[-1] == pytest.approx(-0.2 * 8)

    def test_majorizes_exponents(self):
        m = model(12, NonlinearitySpec.quartic(0.2, kappa=1.0))
        xi = m.random_state(2.0, 0)
        T = 200 / 0.2
        r = quiet(compute_exponents, m, xi, 6, T, t_burn=20.0, qr_interval=0.5)
        q = r.q_samples
        delta = 0.05 * np.abs(r.cumulative) + 1e-3
        assert np.all(q >= r.cumulative - delta)

    def test_cubic_q_over_n_decreasing(self):
        m = model(16, NonlinearitySpec.quartic(0.1))
        q = q_curve(m, m.random_state(3.0, 0), m.dim, 20.0, t_burn=20.0, stride=16)
        ratio = q / np.arange(1, m.dim + 1)
        assert np.all(np.diff(ratio) <= 1e-12)
        assert q[-1] == pytest.approx(-0.1 * 16)

    def test_restarts_take_max(self):
        m = model(8, NonlinearitySpec.quartic(0.2))
        xi = m.random_state(1.0, 0)
        one = q_curve(m, xi, 4, 2.0, t_burn=0.0, stride=8)
        many = q_curve(m, xi, 4, 2.0, t_burn=0.0, stride=8, restarts=2, seed=5)
        assert np.all(many >= one)
