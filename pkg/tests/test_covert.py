import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

import oracles
from conftest import binary_rows
from covertcast.channels import Distribution, bsc_rows, make_bsc_broadcast
from covertcast.covert import (
    CovertParams,
    InfeasibleSchedule,
    Schedule,
    codebook_size,
    effective_rows,
    exact_covert_kl,
    sandwich_alpha_limit,
    lemma1_bounds,
    sandwich_min_n,
    mixture_kl,
    moment_bounds,
    per_symbol_kl,
    perturb,
    schedule_at,
)
from covertcast.infotheory import analyze_channel, chi_k


def _bsc_div(p):
    return (1 - 2 * p) * math.log((1 - p) / p)


class TestParams:
    @pytest.mark.parametrize("a,b", [(0.0, 0.1), (0.1, 1.0), (-0.1, 0.1), (0.5, 1.5)])
    def test_range(self, a, b):
        with pytest.raises(ValueError):
            CovertParams(a, b)

    def test_gamma_and_rows(self):
        p = CovertParams(0.1, 0.3)
        assert p.gamma == pytest.approx(3.0)
        np.testing.assert_allclose(p.flip_rows().sum(axis=1), 1.0)

    @given(binary_rows(), st.floats(1e-4, 0.99), st.floats(1e-4, 0.99))
    def test_effective_rows_is_matrix_product(self, rows, a, b):
        p = CovertParams(a, b)
        W = np.vstack(rows)
        ref = p.flip_rows() @ W
        e0, e1 = effective_rows((Distribution(rows[0]), Distribution(rows[1])), p)
        np.testing.assert_allclose(np.vstack([e0.probs, e1.probs]), ref, atol=1e-14)


class TestPerturb:
    def test_flip_rates(self):
        rng = np.random.default_rng(3)
        p = CovertParams(0.07, 0.2)
        xb = np.array([0, 1] * 50_000, dtype=np.uint8)
        x = perturb(xb, p, rng)
        for bit, flip in ((0, p.alpha), (1, p.beta)):
            sel = x[xb == bit]
            flips = int(np.sum(sel != bit))
            obs = [sel.size - flips, flips]
            exp = [sel.size * (1 - flip), sel.size * flip]
            assert chisquare(obs, exp).pvalue > 1e-3

    def test_shape_and_dtype(self):
        x = perturb(np.zeros((4, 9), dtype=np.uint8), CovertParams(0.5, 0.5), np.random.default_rng(0))
        assert x.shape == (4, 9) and x.dtype == np.uint8

    def test_empty(self):
        with pytest.raises(ValueError):
            perturb([], CovertParams(0.1, 0.1), np.random.default_rng(0))


def _mp_mixture_kl(target, base, t):
    mpmath.mp.dps = 50
    # renormalize at high precision so float rounding in the inputs does not leak a first-order term
    P = [mpmath.mpf(float(v)) for v in target]
    Q = [mpmath.mpf(float(v)) for v in base]
    sp, sq = sum(P), sum(Q)
    out = mpmath.mpf(0)
    for p, q in zip((v / sp for v in P), (v / sq for v in Q)):
        m = (1 - mpmath.mpf(t)) * q + mpmath.mpf(t) * p
        if m > 0:
            out += m * mpmath.log(m / q)
    return float(out)


class TestExactKL:
    @pytest.mark.parametrize("t", [1e-8, 1e-5, 1e-3, 0.05, 0.4])
    def test_mixture_kl_high_precision(self, t):
        q0, q1 = bsc_rows(0.11)
        ref = _mp_mixture_kl(q1.probs, q0.probs, t)
        assert mixture_kl(q1, q0, t) == pytest.approx(ref, rel=1e-12)

    @given(binary_rows(), st.floats(1e-7, 0.9))
    def test_mixture_kl_vs_mpmath(self, rows, t):
        ref = _mp_mixture_kl(rows[1], rows[0], t)
        assert mixture_kl(rows[1], rows[0], t) == pytest.approx(ref, rel=1e-10, abs=1e-300)

    @pytest.mark.parametrize("n", [1, 3, 6, 8])
    def test_against_enumerated_product(self, n):
        rng = np.random.default_rng(n)
        z_rows = (Distribution([0.7, 0.2, 0.1]), Distribution([0.2, 0.3, 0.5]))
        p = CovertParams(0.13, 0.05)
        xb = rng.integers(0, 2, n)
        e0, e1 = effective_rows(z_rows, p)
        P = oracles.product_law([(e1 if b else e0).probs for b in xb])
        Q = oracles.product_law([z_rows[b].probs for b in xb])
        ref = oracles.kl_dict(P, Q)
        assert exact_covert_kl(xb.mean(), n, p, z_rows) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("xb", [(0, 1, 1), (1, 0, 0, 1, 0)])
    def test_against_input_sum(self, xb):
        # sums over every transmitted sequence rather than assuming a product form
        z_rows = bsc_rows(0.2)
        p = CovertParams(0.1, 0.3)
        P = oracles.covert_output_law(xb, p.alpha, p.beta, z_rows)
        Q = oracles.product_law([z_rows[b].probs for b in xb])
        ref = oracles.kl_dict(P, Q)
        assert exact_covert_kl(np.mean(xb), len(xb), p, z_rows) == pytest.approx(ref, abs=1e-12)

    def test_weight_range(self):
        with pytest.raises(ValueError):
            exact_covert_kl(1.5, 10, CovertParams(0.1, 0.1), bsc_rows(0.1))

    @given(st.floats(0.02, 0.45), st.floats(0, 1), st.integers(1, 10**6))
    def test_quadratic_trend(self, pw, lam, n):
        # KL / (n a^2 chi2 / 2) -> 1 with an O(a) gap as the flip probability shrinks
        z = bsc_rows(pw)
        c2 = chi_k(z[1], z[0], 2)
        errs = []
        for a in (1e-2, 1e-3, 1e-4):
            ratio = exact_covert_kl(lam, n, CovertParams(a, a), z) / (n * a * a / 2 * c2)
            errs.append(abs(ratio - 1))
        assert 5 < errs[0] / errs[1] < 20
        assert 5 < errs[1] / errs[2] < 20

    def test_per_symbol_symmetric(self):
        d0, d1 = per_symbol_kl(CovertParams(0.01, 0.01), bsc_rows(0.2))
        assert d0 == pytest.approx(d1, rel=1e-14)


class TestSandwich:
    @given(st.floats(0.02, 0.45), st.floats(0, 1), st.integers(1, 10**6), st.data())
    def test_holds_below_limit(self, pw, lam, n, data):
        z = bsc_rows(pw)
        a = data.draw(st.floats(1e-6, sandwich_alpha_limit(z)))
        p = CovertParams(a, a)
        lo, up = lemma1_bounds(lam, n, p, z)
        ex = exact_covert_kl(lam, n, p, z)
        assert lo <= ex <= up

    def test_fails_above_limit(self):
        z = bsc_rows(0.01)
        lim = sandwich_alpha_limit(z)
        assert 1e-3 < lim < 2e-3
        p = CovertParams(0.05, 0.05)
        lo, up = lemma1_bounds(0.0, 1, p, z)
        assert not lo <= exact_covert_kl(0.0, 1, p, z) <= up

    @given(binary_rows(), st.floats(0, 1), st.floats(1e-5, 1e-2))
    def test_moment_bounds(self, rows, lam, a):
        z = (Distribution(rows[0]), Distribution(rows[1]))
        p = CovertParams(a, a)
        lo, up = moment_bounds(lam, 100, p, z)
        ex = exact_covert_kl(lam, 100, p, z)
        assert lo <= ex * (1 + 1e-9) and ex <= up * (1 + 1e-9)

    def test_min_n(self):
        z = bsc_rows(0.01)
        s = Schedule(a_alpha=0.5)
        n = sandwich_min_n(s, z)
        assert s.alpha_at(n) <= sandwich_alpha_limit(z) < s.alpha_at(n - 1)


class TestSchedule:
    def test_validation(self):
        for kw in ({"a_alpha": 0}, {"mu": 0}, {"nu": 1}, {"delta": 1.2}, {"t_rate": 2}, {"exponent": 0}, {"gamma": -1}):
            with pytest.raises(ValueError):
                Schedule(**kw)

    def test_bsc_rates(self):
        # floor = 1.1 * n * alpha * D(Q1||Q0), ceiling = 0.9 * n * alpha * D(P1||P0) for a symmetric pair
        an = analyze_channel(make_bsc_broadcast(0.05, 0.11))
        s = Schedule(a_alpha=1.0, gamma=1.0, mu=0.1, nu=0.1)
        r = schedule_at(10_000, s, an)
        assert r.params.alpha == pytest.approx(0.01)
        assert r.floor == pytest.approx(1.1 * 100 * _bsc_div(0.11), rel=1e-11)
        assert r.ceiling == pytest.approx(0.9 * 100 * _bsc_div(0.05), rel=1e-11)
        assert r.log_m1 == pytest.approx(0.5 * (r.floor + r.ceiling))
        assert r.log_m2 == pytest.approx(0.9 * 10_000 * an.capacity_willie)

    @given(st.integers(10, 10**7), st.integers(10, 10**7))
    def test_ratio_n_free(self, n1, n2):
        an = analyze_channel(make_bsc_broadcast(0.05, 0.11))
        r1, r2 = schedule_at(n1, Schedule(), an), schedule_at(n2, Schedule(), an)
        assert r1.ceiling / r1.floor == pytest.approx(r2.ceiling / r2.floor, rel=1e-12)

    def test_infeasible(self):
        an = analyze_channel(make_bsc_broadcast(0.2, 0.05))
        with pytest.raises(InfeasibleSchedule):
            schedule_at(1000, Schedule(), an)

    def test_codebook_size(self):
        assert codebook_size(0.0) == 2
        assert codebook_size(math.log(10.5)) == 10
        assert codebook_size(1e6, cap=64) == 64
        assert codebook_size(math.log(30), cap=64) == 30
