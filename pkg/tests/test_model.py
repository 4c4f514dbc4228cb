import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from invy.model import (
    ModelParams,
    build_manifold_coefficients,
    choose_cutoff,
    coherent_weights,
    effective_matrix,
    initial_manifold_weights,
)
from invy.quartic import solve_quartic_companion


def poisson_tail(n_bar, n):
    """P(X > n) by direct high-precision summation."""
    mpmath.mp.dps = 50
    head = mpmath.fsum(mpmath.exp(-n_bar) * mpmath.mpf(n_bar) ** m / mpmath.factorial(m) for m in range(n + 1))
    return float(1 - head)


def smallest_cutoff_by_summation(n_bar, tol):
    n = 0
    while poisson_tail(n_bar, n) >= tol:
        n += 1
    return n


class TestCoefficients:
    def test_couplings_k1_n0(self):
        c = build_manifold_coefficients(ModelParams(n_bar=1, k=1, chi=0.0), 0)
        assert c.v_1 == pytest.approx(0.5)
        assert c.v_3 == pytest.approx(0.5 * math.sqrt(2))
        assert c.v_4 == pytest.approx(0.5 * math.sqrt(3))
        assert (c.alpha_1, c.alpha_3, c.alpha_4, c.alpha_5) == (0, 0, 0, 0)

    def test_kerr_shifts(self):
        p = ModelParams(n_bar=1, k=1, chi=1.0, lambda_1=0, lambda_2=0, lambda_3=0, lambda_4=0)
        c = build_manifold_coefficients(p, 2)
        assert (c.alpha_1, c.alpha_3, c.alpha_4, c.alpha_5) == (2, 6, 12, 20)
        assert c.v_1 == c.v_3 == c.v_4 == 0

    def test_symbolic_k2_n3(self):
        # symbol-by-symbol evaluation, then the quartic rebuilt as the
        # characteristic polynomial det(zeta + K) of the co-rotating system
        chi, mu = sp.Rational(1, 10), sp.Rational(3, 10)
        d_cap = (sp.Rational(1, 2), sp.Rational(-2, 5), sp.Rational(7, 10))
        p = ModelParams(n_bar=1, k=2, chi=0.1, mu=0.3, delta_cap_1=0.5, delta_cap_3=-0.4, delta_cap_4=0.7)
        n, k = 3, 2
        al = [chi * m * (m - 1) for m in (n, n + k, n + 2 * k, n + 3 * k)]
        v1 = sp.sqrt(sp.factorial(n + k) / sp.factorial(n)) / 2
        v3 = sp.sqrt(sp.factorial(n + 2 * k) / sp.factorial(n + k)) / 2
        v4 = sp.sqrt(sp.factorial(n + 3 * k) / sp.factorial(n + 2 * k)) / 2
        d1, d3, d4 = (d - mu for d in d_cap)
        z = sp.Symbol("z")
        K = sp.Matrix([
            [al[0], v1, 0, 0],
            [2 * v1, al[1] + d1, v3, 0],
            [0, v3, al[2] + d1 + d3, v4],
            [0, 0, v4, al[3] + d1 + d3 + d4],
        ])
        poly = sp.Poly((K + z * sp.eye(4)).det(), z)
        expected = [float(x) for x in poly.all_coeffs()[1:]]

        c = build_manifold_coefficients(p, n)
        assert [c.alpha_1, c.alpha_3, c.alpha_4, c.alpha_5] == pytest.approx([float(x) for x in al], rel=1e-14)
        assert [c.v_1, c.v_3, c.v_4] == pytest.approx([float(v1), float(v3), float(v4)], rel=1e-14)
        assert c.delta_sum == pytest.approx(float(d1 + d3 + d4), abs=1e-14)
        assert list(c.a) == pytest.approx(expected, rel=1e-12)

    def test_frozen_k2_n3_values(self):
        p = ModelParams(n_bar=1, k=2, chi=0.1)
        c = build_manifold_coefficients(p, 3)
        # 0.5 * sqrt(4*5), 0.5 * sqrt(6*7), 0.5 * sqrt(8*9)
        assert c.v_1 == pytest.approx(math.sqrt(5))
        assert c.v_3 == pytest.approx(0.5 * math.sqrt(42))
        assert c.v_4 == pytest.approx(3 * math.sqrt(2))
        assert (c.alpha_1, c.alpha_3, c.alpha_4, c.alpha_5) == pytest.approx((0.6, 2.0, 4.2, 7.2))

    def test_no_coupling_roots(self):
        p = ModelParams(n_bar=1, k=1, chi=0.3, mu=0.2, delta_cap_1=1.0, delta_cap_3=-0.5,
                        lambda_1=0, lambda_2=0, lambda_3=0, lambda_4=0)
        c = build_manifold_coefficients(p, 4)
        roots = solve_quartic_companion(*c.a).zeta
        expected = sorted([-c.alpha_1, -c.gamma[0], -c.gamma[1], -c.gamma[2]])
        assert roots == pytest.approx(expected, abs=1e-10)

    def test_deterministic(self):
        p = ModelParams(n_bar=20, k=2, chi=0.01, mu=0.1, delta_cap_1=3)
        a = build_manifold_coefficients(p, 17)
        b = build_manifold_coefficients(p, 17)
        assert a == b

    def test_large_photon_numbers_finite(self):
        p = ModelParams(n_bar=1, k=2, cutoff=10**6)
        c = build_manifold_coefficients(p, 10**6 - 6)
        assert np.all(np.isfinite(c.a))
        assert c.v_4 == pytest.approx(0.5 * math.sqrt((10**6 - 1) * 10**6))

    def test_time_independent_doubles_couplings(self):
        base = ModelParams(n_bar=4, k=1, mu=0.7)
        ti = ModelParams(n_bar=4, k=1, mu=0.7, time_independent=True)
        a = build_manifold_coefficients(base, 5)
        b = build_manifold_coefficients(ti, 5)
        assert b.v_1 == pytest.approx(2 * a.v_1)
        assert b.delta_1 == 0.0 and a.delta_1 == pytest.approx(-0.7)

    def test_effective_matrix_symmetrizable(self):
        c = build_manifold_coefficients(ModelParams(n_bar=5, k=1, chi=0.1, mu=0.1), 5)
        ks = effective_matrix(c, symmetric=True)
        assert np.array_equal(ks, ks.T)
        kn = effective_matrix(c)
        s = np.diag([math.sqrt(2), 1, 1, 1])
        assert np.allclose(s @ kn @ np.linalg.inv(s), ks)

    @settings(max_examples=60, deadline=None)
    @given(
        k=st.integers(1, 3),
        n=st.integers(0, 200),
        chi=st.floats(0, 2),
        mu=st.floats(0, 3),
        d=st.tuples(*(st.floats(-30, 30),) * 3),
        lam=st.floats(0.01, 3),
    )
    def test_coefficient_invariants(self, k, n, chi, mu, d, lam):
        p = ModelParams(n_bar=1, k=k, chi=chi, mu=mu, delta_cap_1=d[0], delta_cap_3=d[1],
                        delta_cap_4=d[2], lambda_1=lam, lambda_2=lam, lambda_3=lam, lambda_4=lam,
                        cutoff=n + 3 * k + 2)
        c = build_manifold_coefficients(p, n)
        assert all(isinstance(x, float) and math.isfinite(x) for x in c.a)
        assert c.v_1 > 0 and c.v_3 > 0 and c.v_4 > 0
        g = c.gamma
        # recomputing the quartic coefficients from the stored Gammas is idempotent
        a2 = g[2] * g[5] + g[6] - c.v_4**2
        a3 = g[2] * g[6] + g[7] - c.v_4**2 * g[3]
        a4 = g[2] * g[7] - c.alpha_1 * g[0] * c.v_4**2 + 2 * c.v_1**2 * c.v_4**2
        assert (g[2] + g[5], a2, a3, a4) == c.a


class TestValidation:
    def test_lambda_folding_required(self):
        with pytest.raises(ValueError, match="lambda_1 must equal lambda_2"):
            ModelParams(lambda_1=1.0, lambda_2=0.5)

    @pytest.mark.parametrize("kw", [
        dict(k=0), dict(n_bar=-1), dict(mu=-0.1), dict(chi=-1), dict(n_bar=20, cutoff=23),
        dict(k=1.5), dict(mu=float("nan")),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_manifold_beyond_cutoff(self):
        p = ModelParams(n_bar=2, k=2, cutoff=12)
        build_manifold_coefficients(p, 6)
        with pytest.raises(ValueError):
            build_manifold_coefficients(p, 7)
        with pytest.raises(ValueError):
            build_manifold_coefficients(p, -1)


class TestCoherentWeights:
    def test_vacuum_probability(self):
        cw = coherent_weights(ModelParams(n_bar=5))
        assert cw.probabilities[0] == pytest.approx(math.exp(-5), rel=1e-14)
        assert cw.probabilities[0] == pytest.approx(6.7379e-3, rel=1e-4)

    def test_zero_field(self):
        cw = coherent_weights(ModelParams(n_bar=0, k=1))
        assert cw.q[0] == 1 and np.all(cw.q[1:] == 0)
        assert cw.norm_deficit == 1.0
        assert ModelParams(n_bar=0, k=2).cutoff == 7

    def test_deficit_n20(self):
        expected = sum(math.exp(-20) * 20**m / math.factorial(m) for m in range(3))
        cw = coherent_weights(ModelParams(n_bar=20, k=1))
        assert cw.norm_deficit == pytest.approx(expected, rel=1e-12)
        assert cw.norm_deficit == pytest.approx(4.6e-7, rel=0.02)

    @pytest.mark.parametrize("n_bar", [0.5, 5, 20, 37.3])
    def test_normalized_for_generous_cutoff(self, n_bar):
        cutoff = math.ceil(n_bar + 10 * math.sqrt(n_bar) + 10)
        total = coherent_weights(ModelParams(n_bar=n_bar, cutoff=cutoff)).probabilities.sum()
        assert 1 - 1e-12 <= total <= 1 + 1e-15

    def test_renormalized_manifold_weights(self):
        p = ModelParams(n_bar=5, k=1)
        w, deficit = initial_manifold_weights(p)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=1e-12)
        w_lit, _ = initial_manifold_weights(ModelParams(n_bar=5, k=1, renormalize=False))
        assert np.sum(np.abs(w_lit) ** 2) == pytest.approx(1 - deficit, abs=1e-12)

    def test_zero_field_cannot_be_renormalized(self):
        with pytest.raises(ValueError, match="nothing to evolve"):
            initial_manifold_weights(ModelParams(n_bar=0, k=1))


class TestChooseCutoff:
    def test_zero_field(self):
        assert choose_cutoff(0.0, 1e-12, k=1) == 3
        assert choose_cutoff(0.0, 1e-12, k=2) == 6

    @pytest.mark.parametrize("n_bar,tol,k", [(20, 1e-12, 1), (5, 1e-6, 1), (5, 1e-12, 2), (0.3, 1e-9, 1)])
    def test_matches_direct_tail_summation(self, n_bar, tol, k):
        assert choose_cutoff(n_bar, tol, k=k) == smallest_cutoff_by_summation(n_bar, tol) + 3 * k

    def test_frozen_values(self):
        # from the direct summation oracle above
        assert choose_cutoff(20, 1e-12, k=1) == 62
        assert choose_cutoff(5, 1e-6, k=1) == 22

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            choose_cutoff(5, 0.0)
        with pytest.raises(ValueError):
            choose_cutoff(5, 1.0)
