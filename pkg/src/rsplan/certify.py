"""Sample-size and risk-level formulas for scenario-based robust plans.

Everything combinatorial is done with log-gamma so K in the thousands (or
millions) never overflows. Four guarantee modes are supported:

``prior_convex``
    K fixed in advance from the first-stage dimension ``d``.
``posterior_convex``
    risk from the size ``k`` of an invariant scenario set, root of a polynomial.
``posterior_nonconvex``
    closed form in ``k``; valid without convexity.
``improved_nonconvex``
    as above, with the confidence split over ``s_bar`` cardinalities instead of K.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

MAX_K = 10**8
_BISECT_ITERS = 200


class CertifyError(ValueError):
    pass


class GuaranteeMode(str, Enum):
    PRIOR_CONVEX = "prior_convex"
    POSTERIOR_CONVEX = "posterior_convex"
    POSTERIOR_NONCONVEX = "posterior_nonconvex"
    IMPROVED_NONCONVEX = "improved_nonconvex"


def _check_unit(name: str, v: float, closed_hi: bool = False) -> None:
    ok = 0.0 < v <= 1.0 if closed_hi else 0.0 < v < 1.0
    if not ok:
        raise CertifyError(f"{name}={v} outside (0,1{']' if closed_hi else ')'}")


def log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(vals) -> float:
    vals = list(vals)
    m = max(vals)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def log_binom_tail(K: int, d: int, eps: float) -> float:
    """log of sum_{i<d} C(K,i) eps^i (1-eps)^(K-i)."""
    if not (1 <= d <= K):
        raise CertifyError(f"need 1 <= d <= K, got d={d}, K={K}")
    _check_unit("eps", eps)
    le, l1 = math.log(eps), math.log1p(-eps)
    return _logsumexp(log_comb(K, i) + i * le + (K - i) * l1 for i in range(d))


def binom_tail(K: int, d: int, eps: float) -> float:
    return min(1.0, math.exp(log_binom_tail(K, d, eps)))


def _tail_le(K: int, d: int, eps: float, beta: float) -> bool:
    if K < d:
        return False  # every term present: tail is 1
    return log_binom_tail(K, d, eps) <= math.log(beta)


def _smallest(pred, start: int) -> int:
    """Smallest integer n >= start with pred(n), pred assumed monotone."""
    if pred(start):
        return start
    lo, hi = start, max(start + 1, 2 * start)
    while not pred(hi):
        lo = hi
        if hi >= MAX_K:
            raise CertifyError(f"no sample size up to {MAX_K} meets the target")
        hi = min(2 * hi, MAX_K)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def prior_min_k(eps_bar: float, beta: float, d: int) -> int:
    """Smallest K whose binomial tail at ``eps_bar`` is at most ``beta``."""
    _check_unit("eps_bar", eps_bar)
    _check_unit("beta", beta)
    if d < 1:
        raise CertifyError("d must be at least 1")
    return _smallest(lambda K: _tail_le(K, d, eps_bar, beta), d)


def closed_form_k(eps_bar: float, beta: float, d: int) -> int:
    """The classical sufficient size (2/eps)(ln(1/beta) + d), rounded to nearest."""
    _check_unit("eps_bar", eps_bar, closed_hi=True)
    _check_unit("beta", beta)
    if d < 1:
        raise CertifyError("d must be at least 1")
    return int(round((2.0 / eps_bar) * (math.log(1.0 / beta) + d)))


def _bisect(f, lo: float = 0.0, hi: float = 1.0) -> float:
    """Root of increasing ``f`` on (lo, hi); runs to floating-point resolution."""
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def prior_convex_eps(d: int, beta: float, K: int) -> float:
    """Risk level at which the binomial tail of size K equals ``beta``."""
    _check_unit("beta", beta)
    if not (1 <= d <= K):
        raise CertifyError(f"need 1 <= d <= K, got d={d}, K={K}")
    lb = math.log(beta)
    # tail decreases in eps
    return _bisect(lambda e: lb - log_binom_tail(K, d, e))


_CHUNK = 1 << 20


def _log_poly_sum(k: int, K: int, l1: float) -> float:
    """log sum_{i=k}^{K} C(i,k) (1-eps)^(i-k), with l1 = log(1-eps)."""
    acc_m, acc_s = -math.inf, 0.0
    lgk = gammaln(k + 1)
    for start in range(k, K + 1, _CHUNK):
        i = np.arange(start, min(K + 1, start + _CHUNK), dtype=float)
        logs = gammaln(i + 1) - lgk - gammaln(i - k + 1) + (i - k) * l1
        m = float(logs.max())
        s = float(np.sum(np.exp(np.sort(logs - m))))
        if m > acc_m:
            acc_s = acc_s * math.exp(acc_m - m) + s
            acc_m = m
        else:
            acc_s += s * math.exp(m - acc_m)
    return acc_m + math.log(acc_s)


def convex_residual(eps: float, k: int, beta: float, K: int) -> float:
    """Relative residual (A - B) / max(A, B) of the posterior-convex equation.

    A = beta/(K+1) * sum_{i=k}^{K} C(i,k)(1-eps)^(i-k),  B = C(K,k)(1-eps)^(K-k).
    Negative below the root, positive above.
    """
    l1 = math.log1p(-eps)
    la = math.log(beta) - math.log(K + 1) + _log_poly_sum(k, K, l1)
    lb = log_comb(K, k) + (K - k) * l1
    if la >= lb:
        return -math.expm1(lb - la)
    return math.expm1(la - lb)


def posterior_convex_eps(k: int, beta: float, K: int) -> float:
    _check_unit("beta", beta)
    if not (0 <= k <= K):
        raise CertifyError(f"need 0 <= k <= K, got k={k}, K={K}")
    if k == K:
        return 1.0
    return _bisect(lambda e: convex_residual(e, k, beta, K))


def posterior_nonconvex_eps(k: int, beta: float, K: int) -> float:
    _check_unit("beta", beta)
    if not (0 <= k <= K) or K < 1:
        raise CertifyError(f"need 0 <= k <= K and K >= 1, got k={k}, K={K}")
    if k == K:
        return 1.0
    return -math.expm1((math.log(beta) - math.log(K) - log_comb(K, k)) / (K - k))


def improved_nonconvex_eps(k: int, beta: float, K: int, s_bar: int) -> float:
    _check_unit("beta", beta)
    if not (0 <= k <= K):
        raise CertifyError(f"need 0 <= k <= K, got k={k}, K={K}")
    if k > s_bar:
        raise CertifyError(f"invariant set size {k} exceeds the cap s_bar={s_bar}")
    if not (1 <= s_bar <= K):
        raise CertifyError(f"need 1 <= s_bar <= K, got s_bar={s_bar}, K={K}")
    if k == K:
        return 1.0
    return -math.expm1((math.log(beta) - math.log(s_bar) - log_comb(K, k)) / (K - k))


def epsilon_for(mode, k_or_d: int, beta: float, K: int, s_bar: int | None = None) -> float:
    mode = GuaranteeMode(mode)
    if mode is GuaranteeMode.PRIOR_CONVEX:
        return prior_convex_eps(k_or_d, beta, K)
    if mode is GuaranteeMode.POSTERIOR_CONVEX:
        return posterior_convex_eps(k_or_d, beta, K)
    if mode is GuaranteeMode.POSTERIOR_NONCONVEX:
        return posterior_nonconvex_eps(k_or_d, beta, K)
    if s_bar is None:
        raise CertifyError("improved_nonconvex needs s_bar")
    return improved_nonconvex_eps(k_or_d, beta, K, s_bar)


def min_k_for(mode, k_or_d: int, eps_bar: float, beta: float, s_bar: int | None = None) -> int:
    """Smallest K whose risk level in ``mode`` is at most ``eps_bar``."""
    mode = GuaranteeMode(mode)
    _check_unit("eps_bar", eps_bar)
    _check_unit("beta", beta)
    if mode is GuaranteeMode.PRIOR_CONVEX:
        K = prior_min_k(eps_bar, beta, k_or_d)
        start = k_or_d
    else:
        if k_or_d < 0:
            raise CertifyError("k must be nonnegative")
        start = max(k_or_d + 1, s_bar or 1)
        # improved mode needs s_bar <= K; below that the claim is undefined
        K = _smallest(lambda n: epsilon_for(mode, k_or_d, beta, n, s_bar) <= eps_bar, start)
    if K > start:
        e_prev = epsilon_for(mode, k_or_d, beta, K - 1, s_bar)
        e_here = epsilon_for(mode, k_or_d, beta, K, s_bar)
        if not (e_here <= eps_bar < e_prev and e_here <= e_prev):
            raise CertifyError("risk level is not monotone in K near the threshold")
    return K


@dataclass(frozen=True)
class GuaranteeCertificate:
    mode: GuaranteeMode
    epsilon: float
    beta: float
    K: int
    k_or_d: int
    s_bar: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", GuaranteeMode(self.mode))
        _check_unit("epsilon", self.epsilon, closed_hi=True)
        _check_unit("beta", self.beta)
        if self.K < 1:
            raise CertifyError("K must be at least 1")

    def recompute(self) -> float:
        return epsilon_for(self.mode, self.k_or_d, self.beta, self.K, self.s_bar)

    def is_consistent(self, tol: float = 1e-12) -> bool:
        return abs(self.recompute() - self.epsilon) <= tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["epsilon_recomputed"] = self.recompute()
        return d


def certify(mode, k_or_d: int, beta: float, K: int, s_bar: int | None = None) -> GuaranteeCertificate:
    eps = epsilon_for(mode, k_or_d, beta, K, s_bar)
    return GuaranteeCertificate(GuaranteeMode(mode), eps, beta, K, k_or_d, s_bar)


# --- out-of-sample checks ---


@dataclass(frozen=True)
class Margin:
    rel: float = 1e-6
    abs: float = 1e-3


@dataclass(frozen=True)
class RiskEstimate:
    violations: int
    trials: int
    epsilon_hat: float
    gamma_threshold: float

    def __post_init__(self):
        if not (0 <= self.violations <= self.trials):
            raise CertifyError("violations must lie in [0, trials]")


def is_violation(value: float, gamma_star: float, kind: str, margin: Margin = Margin()) -> bool:
    if math.isinf(gamma_star) and gamma_star > 0:
        return False
    if kind == "cost":
        return value > gamma_star * (1.0 + margin.rel) + margin.abs
    return value > gamma_star + margin.abs


def estimate_violation(case, plan, gamma_star: float, test, kind, margin: Margin = Margin(),
                       opts=None, evaluator=None) -> RiskEstimate:
    """Share of test scenarios whose operation value exceeds ``gamma_star``.

    ``kind`` is a ``FormulationKind`` (or its label such as ``c-cost``); its
    objective decides whether cost or curtailment is compared.
    """
    from .rsp import FormulationKind, SecondStageEvaluator

    if isinstance(kind, str):
        kind = FormulationKind.parse(kind)
    if len(test) == 0:
        raise CertifyError("test set is empty")
    if math.isnan(gamma_star) or gamma_star == -math.inf:
        raise CertifyError("gamma_star must be a number")
    if gamma_star == math.inf:
        return RiskEstimate(0, len(test), 0.0, gamma_star)
    ev = evaluator or SecondStageEvaluator(case, kind, opts)
    count = 0
    for sc in test:
        out = ev.evaluate(plan, sc, schedule=False)
        if is_violation(out.value, gamma_star, kind.objective, margin):
            count += 1
    return RiskEstimate(count, len(test), count / len(test), gamma_star)


def lolp(case, plan, test, margin: Margin = Margin(), convex: bool = True, opts=None) -> RiskEstimate:
    """Loss-of-load probability estimate: any curtailment counts."""
    from .rsp import FormulationKind

    return estimate_violation(case, plan, 0.0, test, FormulationKind("curtailment", convex), margin, opts)
