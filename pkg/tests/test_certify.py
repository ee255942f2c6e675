import math
from fractions import Fraction

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsplan.certify import (
    CertifyError,
    GuaranteeCertificate,
    GuaranteeMode,
    Margin,
    RiskEstimate,
    binom_tail,
    certify,
    closed_form_k,
    convex_residual,
    epsilon_for,
    improved_nonconvex_eps,
    is_violation,
    min_k_for,
    posterior_convex_eps,
    posterior_nonconvex_eps,
    prior_convex_eps,
    prior_min_k,
)

mp.mp.dps = 60


# --- high-precision oracles ---

def mp_tail(K, d, eps):
    e = mp.mpf(eps)
    return mp.fsum(mp.binomial(K, i) * e**i * (1 - e) ** (K - i) for i in range(d))


def mp_nonconvex(k, beta, K, split=None):
    split = K if split is None else split
    return 1 - (mp.mpf(beta) / (split * mp.binomial(K, k))) ** (mp.mpf(1) / (K - k))


def mp_convex_f(eps, k, beta, K):
    e = mp.mpf(eps)
    s = mp.fsum(mp.binomial(i, k) * (1 - e) ** (i - k) for i in range(k, K + 1))
    return mp.mpf(beta) / (K + 1) * s - mp.binomial(K, k) * (1 - e) ** (K - k)


def fraction_tail(K, d, eps: Fraction):
    return sum(Fraction(math.comb(K, i)) * eps**i * (1 - eps) ** (K - i) for i in range(d))


# --- binomial tail ---

def test_tail_single_term():
    assert binom_tail(50, 1, 0.03) == pytest.approx(0.97**50, rel=1e-13)


def test_tail_exact_rational_example():
    assert binom_tail(10, 10, 0.5) == pytest.approx(0.9990234375, abs=1e-13)
    assert fraction_tail(10, 10, Fraction(1, 2)) == Fraction(1023, 1024)


def test_tail_matches_rational_oracle_small_k():
    for eps in (Fraction(1, 2), Fraction(1, 10), Fraction(3, 7), Fraction(1, 100)):
        for K in range(1, 31):
            for d in range(1, K + 1):
                got = binom_tail(K, d, float(eps))
                assert abs(got - float(fraction_tail(K, d, eps))) <= 1e-12


def test_tail_920_threshold():
    assert mp_tail(920, 2, 0.01) <= 1e-3 < mp_tail(919, 2, 0.01)
    assert binom_tail(920, 2, 0.01) <= 1e-3 < binom_tail(919, 2, 0.01)


def test_tail_domain_errors():
    with pytest.raises(CertifyError):
        binom_tail(5, 6, 0.1)
    with pytest.raises(CertifyError):
        binom_tail(5, 0, 0.1)
    with pytest.raises(CertifyError):
        binom_tail(5, 2, 1.0)


# --- a-priori sizes ---

def test_prior_min_k_920():
    assert prior_min_k(0.01, 1e-3, 2) == 920


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.2, 0.5])
def test_prior_min_k_single_term_closed_form(eps):
    assert prior_min_k(eps, 1e-3, 1) == math.ceil(math.log(1e-3) / math.log1p(-eps))


def test_prior_exact_inversion_below_table():
    K = prior_min_k(0.05, 1e-3, 13)
    assert mp_tail(K, 13, 0.05) <= 1e-3 < mp_tail(K - 1, 13, 0.05)
    assert K == 533
    assert K < closed_form_k(0.05, 1e-3, 13) == 796


@pytest.mark.parametrize(
    "eps,expected", [(0.05, 796), (0.10, 398), (0.20, 199), (0.30, 133), (0.40, 100), (0.50, 80)]
)
def test_closed_form_table(eps, expected):
    assert closed_form_k(eps, 1e-3, 13) == expected


def test_closed_form_small():
    assert closed_form_k(0.5, 1e-3, 1) == 32


def test_prior_convex_eps_consistent_with_tail():
    e = prior_convex_eps(2, 1e-3, 920)
    assert e <= 0.01
    assert binom_tail(920, 2, e) == pytest.approx(1e-3, rel=1e-9)


# --- a-posteriori, convex ---

def test_convex_k_equals_K():
    assert posterior_convex_eps(7, 1e-3, 7) == 1.0


def test_convex_920_interval_and_oracle():
    e = posterior_convex_eps(1, 1e-3, 920)
    assert 0.0125 < e < 0.0131
    assert mp_convex_f(0.0125, 1, 1e-3, 920) < 0 < mp_convex_f(0.0131, 1, 1e-3, 920)
    # independent bracketing with mpmath
    lo, hi = mp.mpf("0.0125"), mp.mpf("0.0131")
    for _ in range(80):
        mid = (lo + hi) / 2
        if mp_convex_f(mid, 1, 1e-3, 920) > 0:
            hi = mid
        else:
            lo = mid
    assert e == pytest.approx(float(lo), abs=1e-12)


@pytest.mark.parametrize("k,K", [(0, 50), (1, 920), (3, 400), (10, 2000), (25, 300)])
def test_convex_root_quality(k, K):
    e = posterior_convex_eps(k, 1e-3, K)
    assert abs(convex_residual(e, k, 1e-3, K)) <= 1e-9


def test_convex_residual_signs():
    assert convex_residual(1e-9, 2, 1e-3, 500) < 0
    assert convex_residual(1 - 1e-9, 2, 1e-3, 500) > 0


# --- a-posteriori, non-convex ---

def test_nonconvex_k_equals_K():
    assert posterior_nonconvex_eps(9, 1e-3, 9) == 1.0


def test_nonconvex_k0():
    # includes the 1/K split of beta
    assert posterior_nonconvex_eps(0, 1e-3, 100) == pytest.approx(1 - 1e-5 ** (1 / 100), rel=1e-13)
    assert posterior_nonconvex_eps(0, 1e-3, 100) == pytest.approx(float(mp_nonconvex(0, 1e-3, 100)), rel=1e-13)


def test_nonconvex_3012():
    assert posterior_nonconvex_eps(2, 1e-3, 3012) <= 0.01 < posterior_nonconvex_eps(2, 1e-3, 3011)
    assert mp_nonconvex(2, 1e-3, 3012) <= 0.01 < mp_nonconvex(2, 1e-3, 3011)


def test_nonconvex_matches_mpmath():
    for k, K in [(1, 2222), (2, 3012), (5, 800), (0, 10)]:
        assert posterior_nonconvex_eps(k, 1e-3, K) == pytest.approx(float(mp_nonconvex(k, 1e-3, K)), rel=1e-12)


def test_improved_1410():
    assert improved_nonconvex_eps(1, 1e-3, 1410, 1) <= 0.01 < improved_nonconvex_eps(1, 1e-3, 1409, 1)
    assert mp_nonconvex(1, 1e-3, 1410, split=1) <= 0.01 < mp_nonconvex(1, 1e-3, 1409, split=1)


def test_improved_equals_plain_when_cap_is_K():
    assert improved_nonconvex_eps(3, 1e-3, 700, 700) == posterior_nonconvex_eps(3, 1e-3, 700)


def test_improved_rejects_k_above_cap():
    with pytest.raises(CertifyError):
        improved_nonconvex_eps(3, 1e-3, 700, 2)


@given(st.integers(0, 5), st.integers(100, 5000), st.integers(1, 100))
def test_improved_never_worse(k, K, cap):
    cap = max(cap, k)
    assert improved_nonconvex_eps(k, 1e-3, K, cap) <= posterior_nonconvex_eps(k, 1e-3, K)


# --- inversion ---

def test_min_k_nonconvex_k1():
    K = min_k_for("posterior_nonconvex", 1, 0.01, 1e-3)
    assert 2210 <= K <= 2260
    assert mp_nonconvex(1, 1e-3, K) <= 0.01 < mp_nonconvex(1, 1e-3, K - 1)
    assert K == 2222


def test_min_k_paper_values():
    assert min_k_for("posterior_nonconvex", 2, 0.01, 1e-3) == 3012
    assert min_k_for("improved_nonconvex", 1, 0.01, 1e-3, s_bar=1) == 1410
    assert min_k_for("prior_convex", 2, 0.01, 1e-3) == 920


def test_min_k_unreachable():
    with pytest.raises(CertifyError):
        min_k_for("posterior_nonconvex", 1, 1e-9, 1e-3)


MODES = [m.value for m in GuaranteeMode]


def _eps(mode, k, beta, K):
    if mode == "prior_convex":
        return epsilon_for(mode, k + 1, beta, K)
    return epsilon_for(mode, k, beta, K, s_bar=max(k, 1) if mode == "improved_nonconvex" else None)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(MODES), st.integers(0, 4), st.sampled_from([1e-2, 1e-3, 1e-6]))
def test_eps_nonincreasing_in_K(mode, k, beta):
    Ks = sorted({int((k + 2) * 10 ** (i / 6)) for i in range(19)} | {k + 2, 10**4})
    Ks = [K for K in Ks if k + 2 <= K <= 10**4]
    vals = [_eps(mode, k, beta, K) for K in Ks]
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(MODES), st.integers(30, 3000), st.sampled_from([1e-2, 1e-3]))
def test_eps_nondecreasing_in_k(mode, K, beta):
    ks = range(0, min(8, K - 2))
    if mode == "improved_nonconvex":
        vals = [epsilon_for(mode, k, beta, K, s_bar=8) for k in ks]
    else:
        vals = [_eps(mode, k, beta, K) for k in ks]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(MODES),
    st.integers(0, 5),
    st.floats(0.01, 0.3),
    st.sampled_from([1e-1, 1e-2, 1e-3, 1e-6]),
)
def test_inversion_consistency(mode, k, eps_bar, beta):
    s_bar = max(k, 1) if mode == "improved_nonconvex" else None
    kd = k + 1 if mode == "prior_convex" else k
    K = min_k_for(mode, kd, eps_bar, beta, s_bar)
    assert epsilon_for(mode, kd, beta, K, s_bar) <= eps_bar
    lowest = kd if mode == "prior_convex" else max(kd + 1, s_bar or 1)
    if K > lowest:
        assert epsilon_for(mode, kd, beta, K - 1, s_bar) > eps_bar


# --- certificates and risk ---

def test_certificate_consistency():
    for mode, kd, s in [("prior_convex", 2, None), ("posterior_convex", 1, None),
                        ("posterior_nonconvex", 2, None), ("improved_nonconvex", 1, 1)]:
        c = certify(mode, kd, 1e-3, 3012, s)
        assert c.is_consistent()
        d = c.to_dict()
        assert d["mode"] == mode and abs(d["epsilon_recomputed"] - c.epsilon) <= 1e-12


def test_certificate_validation():
    with pytest.raises(CertifyError):
        GuaranteeCertificate("posterior_convex", 0.0, 1e-3, 10, 1)
    with pytest.raises(CertifyError):
        GuaranteeCertificate("posterior_convex", 0.1, 1.0, 10, 1)
    with pytest.raises(ValueError):
        GuaranteeCertificate("bogus", 0.1, 0.1, 10, 1)
    bad = GuaranteeCertificate("posterior_nonconvex", 0.5, 1e-3, 3012, 2)
    assert not bad.is_consistent()


def test_violation_rule():
    m = Margin()
    assert not is_violation(1e9, math.inf, "cost", m)
    assert not is_violation(100.00005, 100.0, "cost", m)
    assert is_violation(100.01, 100.0, "cost", m)
    assert not is_violation(0.0009, 0.0, "curtailment", m)
    assert is_violation(0.002, 0.0, "curtailment", m)


def test_risk_estimate_bounds():
    with pytest.raises(CertifyError):
        RiskEstimate(3, 2, 1.5, 0.0)
