import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavedim.ineq import (
    RankDeficiencyError,
    ResolutionWarning,
    SuborthFamily,
    eigenfunction_family,
    embedding_ratio,
    gen_suborth,
    hat_family,
    random_suborth_vectors,
    rho_bound_d1,
    rho_bound_d2,
    rho_bound_d3,
    rho_field,
    rho_l1_quadrature,
    rho_scaling_d3,
    run_campaign,
    sharp_embedding_check,
    sum_inv_sqrt,
    verify_sub_lemma,
)
from wavedim.spectral import Domain, build_spectrum

PI = math.pi
SQ = Domain.rectangle(PI, PI)
CUBE = Domain.box(PI, PI, PI)


class TestGeneration:
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_orthonormal(self, d):
        dom = Domain((1.3,) * d)
        f = gen_suborth(dom, 2, 10, 12, seed=1)
        assert np.allclose(f.gram, np.eye(10), atol=1e-10)

    def test_contracted(self):
        f = gen_suborth(SQ, 1, 5, 10, seed=2, mode="contracted", factor=0.5)
        assert f.max_gram_eig() <= 0.25 + 1e-12

    def test_projected(self):
        f = gen_suborth(SQ, 1, 5, 10, seed=3, mode="projected")
        assert f.is_suborthonormal()

    def test_bit_identical(self):
        a = gen_suborth(SQ, 2, 6, 8, seed=11, mode="projected")
        b = gen_suborth(SQ, 2, 6, 8, seed=11, mode="projected")
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_too_many(self):
        with pytest.raises(ValueError):
            gen_suborth(SQ, 1, 11, 10)

    def test_rank_deficiency(self):
        class Zero:
            def standard_normal(self, shape):
                return np.zeros(shape)

        with pytest.raises(RankDeficiencyError):
            random_suborth_vectors(4, 2, Zero())

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 12), st.integers(0, 10**6),
           st.sampled_from(["orthonormal", "contracted", "projected"]))
    def test_always_suborth_and_components(self, d, N, n, seed, mode):
        f = gen_suborth(Domain((1.0,) * d), N, n, 12, seed=seed, mode=mode)
        assert f.is_suborthonormal()
        for r in range(N):
            assert f.component(r).is_suborthonormal()


class TestSubLemma:
    def test_equality(self):
        c = verify_sub_lemma([3, 2, 1], np.eye(3)[:2])
        assert c.lhs == 5 and c.rhs == 5 and c.passed

    def test_contraction(self):
        c = verify_sub_lemma([3, 2, 1], 0.5 * np.eye(3)[:2])
        assert c.lhs == pytest.approx(1.25) and c.passed

    def test_rejects_non_suborth(self):
        with pytest.raises(ValueError):
            verify_sub_lemma([3, 2, 1], 2 * np.eye(3)[:1])

    def test_campaign(self):
        rows = run_campaign("sub", range(2000))
        assert all(r.passed and r.margin >= -1e-10 for r in rows)


class TestRho:
    def test_hat_sharpness(self):
        c = rho_bound_d1(hat_family(1.0))
        assert c.rhs == 0.25
        assert c.lhs >= 0.98 * 0.25 and c.passed

    def test_single_sine(self):
        for length in (1.0, 2.5):
            f = eigenfunction_family(Domain.interval(length), 1)
            c = rho_bound_d1(f)
            assert c.lhs == pytest.approx(2 * length / PI**2, rel=1e-5)
            assert c.lhs < length / 4

    def test_rho_nonneg_and_l1(self):
        f = gen_suborth(SQ, 2, 8, 20, seed=5)
        rho, _ = rho_field(f, 64)
        assert np.all(rho >= 0)
        assert rho_l1_quadrature(f) == pytest.approx(f.l2_mass(), rel=1e-8)

    def test_d2_first_eigenfunction(self):
        c = rho_bound_d2(eigenfunction_family(SQ, 1))
        assert c.lhs == pytest.approx(0.5) and c.rhs == pytest.approx(PI / 2)

    def test_d2_eigen_chain(self):
        for n in (1, 5, 30, 100):
            f = eigenfunction_family(SQ, n)
            c = rho_bound_d2(f)
            assert c.lhs == pytest.approx(np.sum(1 / build_spectrum(SQ, n).lambdas))
            assert c.passed

    def test_d2_empty(self):
        f = SuborthFamily(build_spectrum(SQ, 4), np.zeros((0, 4, 1)))
        c = rho_bound_d2(f)
        assert c.lhs == 0 and c.rhs == 0 and c.passed

    def test_d3_single(self):
        c = rho_bound_d3(eigenfunction_family(CUBE, 1))
        assert c.rhs == pytest.approx(0.116 ** (2 / 3) * 3, rel=1e-12)
        assert c.rhs == pytest.approx(0.712, abs=2e-3)
        assert c.passed

    def test_d3_contracted(self):
        f = gen_suborth(CUBE, 1, 4, 10, seed=1)
        g = SuborthFamily(f.spectrum, 0.1 * f.coeffs)
        a, b = rho_bound_d3(f, grid=32), rho_bound_d3(g, grid=32)
        assert b.lhs == pytest.approx(0.01 * a.lhs, rel=1e-10)
        assert b.passed and b.margin > 0.9 * b.rhs

    def test_d3_resolution_warning(self):
        with pytest.warns(ResolutionWarning):
            rho_bound_d3(eigenfunction_family(CUBE, 1), grid=16)

    def test_d3_grid_refinement(self):
        f = gen_suborth(CUBE, 1, 6, 12, seed=3)
        a, b = rho_bound_d3(f, grid=32), rho_bound_d3(f, grid=48)
        assert a.lhs == pytest.approx(b.lhs, rel=1e-3)

    def test_d3_scaling_is_finite_n_regime(self):
        slope, norms = rho_scaling_d3(CUBE)
        assert np.all(np.diff(norms) > 0)
        # local slopes decrease toward 1/3 as n grows
        s_small, _ = rho_scaling_d3(CUBE, ns=(8, 16), grid=32)
        s_large, _ = rho_scaling_d3(CUBE, ns=(256, 512), grid=48)
        assert s_large < s_small
        assert 1 / 3 < slope < 0.45


class TestInvSqrt:
    def test_d1_n3(self):
        c = sum_inv_sqrt(build_spectrum(Domain.interval(PI), 3), 3)
        assert c.lhs == pytest.approx(1 + 1 / 2 + 1 / 3)
        assert c.rhs == pytest.approx(math.log(3 * math.e)) and c.passed

    def test_d1_equality(self):
        c = sum_inv_sqrt(build_spectrum(Domain.interval(PI), 1), 1)
        assert c.lhs == pytest.approx(1.0) and c.rhs == pytest.approx(1.0) and c.passed

    def test_d2(self):
        c = sum_inv_sqrt(build_spectrum(SQ, 1), 1)
        assert c.lhs == pytest.approx(1 / math.sqrt(2))
        assert c.rhs == pytest.approx(2 * math.sqrt(PI / 2))

    def test_insufficient(self):
        with pytest.raises(ValueError):
            sum_inv_sqrt(build_spectrum(SQ, 2), 3)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 200), st.floats(0.3, 5), st.floats(0.3, 5))
    def test_always_holds(self, d, N, n, a, b):
        dom = Domain((a,) if d == 1 else (a, b))
        spec = build_spectrum(dom, -(-n // N), N)
        assert sum_inv_sqrt(spec, n).passed


class TestEmbedding:
    def test_hat_exact(self):
        chk = sharp_embedding_check(1.0, 1024)
        assert chk.hat_ratio == pytest.approx(0.25, abs=1e-14)
        assert chk.hat_ratio >= 0.2499 and chk.passed
        assert chk.max_random_ratio <= 0.25

    def test_sine(self):
        x = np.linspace(0, 1, 4097)[1:-1]
        assert embedding_ratio(np.sin(PI * x), 1.0) == pytest.approx(2 / PI**2, rel=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=50), st.floats(0.1, 10), st.floats(0.1, 5))
    def test_bound_and_homogeneity(self, vals, c, length):
        v = np.array(vals)
        if np.max(np.abs(v)) < 1e-100:
            return
        r = embedding_ratio(v, length)
        assert r <= length / 4 * (1 + 1e-12)
        assert embedding_ratio(c * v, length) == pytest.approx(r, rel=1e-12)


class TestCampaigns:
    def test_d1(self):
        rows = run_campaign("d1", range(300), n_max=64)
        assert all(r.passed for r in rows)
        assert max(r.lhs / r.rhs for r in rows) <= 1.02

    def test_d2_vector(self):
        rows = run_campaign("d2", range(300), n_max=32, N=2)
        assert all(r.passed for r in rows)

    def test_mode_mix(self):
        rows = run_campaign("d2", range(1000), n_max=4)
        share = {m: sum(r.mode == m for r in rows) / len(rows) for m in ("orthonormal", "contracted", "projected")}
        assert share["orthonormal"] == pytest.approx(0.7, abs=0.05)
        assert share["contracted"] == pytest.approx(0.2, abs=0.05)
        assert share["projected"] == pytest.approx(0.1, abs=0.05)

    def test_unknown(self):
        with pytest.raises(ValueError):
            run_campaign("d4", [0])
