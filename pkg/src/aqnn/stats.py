"""One-sample hypothesis tests over neighborhood aggregates.

Supports the nearest-neighbor hypothesis form ``agg(neighborhood) op c``
with op in {>=, <=, !=}: a one-sample t-test for mean-valued aggregates and
a one-proportion z-test for proportion-valued ones, plus the decision
agreement metric used to score approximate aggregates against exact ones.

The t distribution's CDF is evaluated through the regularized incomplete
beta function (Lentz continued fraction, ~1e-14 relative accuracy) rather
than through a statistics library, so test-suite comparisons against an
external reference stay meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

OPS = ("ge", "le", "ne")

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITERS = 400


@dataclass(frozen=True)
class Hypothesis:
    """Null hypothesis ``agg op c`` tested at significance level alpha."""

    agg: str  # "AVG" | "PCT"
    op: str  # "ge" | "le" | "ne"
    c: float
    alpha: float = 0.05

    def __post_init__(self):
        if self.agg not in ("AVG", "PCT"):
            raise ValueError(f"hypotheses cover AVG and PCT, got {self.agg!r}")
        if self.op not in OPS:
            raise ValueError(f"op must be one of {OPS}, got {self.op!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.agg == "PCT" and not 0.0 <= self.c <= 1.0:
            raise ValueError("PCT hypotheses need c in [0, 1]")


@dataclass(frozen=True)
class TestDecision:
    reject_null: bool
    statistic: float
    p_value: float


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITERS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    """CDF of Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def norm_cdf(z: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _p_value(statistic: float, op: str, cdf) -> float:
    left = cdf(statistic)
    right = 1.0 - left
    if op == "ge":  # alternative: below c
        return left
    if op == "le":  # alternative: above c
        return right
    return min(1.0, 2.0 * min(left, right))


def t_test_one_sample(values: Sequence[float], h: Hypothesis) -> TestDecision:
    """One-sample t-test of the bag's mean against the hypothesized constant.

    Uses the n-1 sample standard deviation; needs at least two values and
    positive spread.
    """
    vals = np.asarray(list(values), dtype=np.float64)
    n = vals.size
    if n < 2:
        raise ValueError("t-test needs at least 2 values")
    sd = float(vals.std(ddof=1))
    if sd == 0.0:
        raise ValueError("t-test undefined for zero sample standard deviation")
    statistic = (float(vals.mean()) - h.c) / (sd / math.sqrt(n))
    p = _p_value(statistic, h.op, lambda s: t_cdf(s, n - 1))
    return TestDecision(reject_null=p < h.alpha, statistic=statistic, p_value=p)


def z_test_proportion(p_hat: float, n: int, h: Hypothesis) -> TestDecision:
    """One-proportion z-test under the normal approximation.

    Valid only when n*c >= 5 and n*(1-c) >= 5; both are enforced.
    """
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError("p_hat must lie in [0, 1]")
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0.0 < h.c < 1.0:
        raise ValueError("proportion test needs 0 < c < 1")
    if n * h.c < 5.0:
        raise ValueError(f"normal approximation invalid: n*c = {n * h.c:.3g} < 5")
    if n * (1.0 - h.c) < 5.0:
        raise ValueError(f"normal approximation invalid: n*(1-c) = {n * (1 - h.c):.3g} < 5")
    statistic = (p_hat - h.c) / math.sqrt(h.c * (1.0 - h.c) / n)
    p = _p_value(statistic, h.op, norm_cdf)
    return TestDecision(reject_null=p < h.alpha, statistic=statistic, p_value=p)


def ht_accuracy(decisions_est: Sequence[bool], decisions_true: Sequence[bool]) -> float:
    """Fraction of positions where two decision lists agree."""
    if len(decisions_est) != len(decisions_true):
        raise ValueError("decision lists must have equal length")
    if not decisions_est:
        raise ValueError("decision lists must be nonempty")
    agree = sum(1 for e, t in zip(decisions_est, decisions_true) if bool(e) == bool(t))
    return agree / len(decisions_est)
