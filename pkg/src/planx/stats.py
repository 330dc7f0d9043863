"""Summary statistics, Welch's t-test and fixed-width histograms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 500


def mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)


def sample_variance(xs: Sequence[float]) -> float:
    m = mean(xs)
    return math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def sample_std(xs: Sequence[float]) -> Optional[float]:
    return math.sqrt(sample_variance(xs)) if len(xs) >= 2 else None


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTest:
    t: float
    df: float
    p: float
    # both samples constant: t and df are not defined, p is reported as 1 or 0
    degenerate: bool = False

    def as_dict(self) -> dict:
        finite = lambda v: v if math.isfinite(v) else None
        return {"t": finite(self.t), "df": finite(self.df), "p": self.p, "degenerate": self.degenerate}


def welch_t_test(xs: Sequence[float], ys: Sequence[float]) -> TTest:
    """Two-sided Welch (unequal variance) t-test of mean(xs) vs mean(ys)."""
    n1, n2 = len(xs), len(ys)
    if n1 < 2 or n2 < 2:
        raise ValueError("each sample needs at least two observations")
    m1, m2 = mean(xs), mean(ys)
    s1, s2 = sample_variance(xs) / n1, sample_variance(ys) / n2
    se2 = s1 + s2
    if se2 == 0.0:
        if m1 == m2:
            return TTest(0.0, float("nan"), 1.0, degenerate=True)
        return TTest(math.copysign(math.inf, m1 - m2), float(n1 + n2 - 2), 0.0, degenerate=True)
    t = (m1 - m2) / math.sqrt(se2)
    df = se2 ** 2 / (s1 ** 2 / (n1 - 1) + s2 ** 2 / (n2 - 1))
    return TTest(t, df, t_two_tailed_p(t, df))


def histogram(samples: dict[str, Sequence[float]], bins: int = 20) -> dict:
    """Fixed-width bins shared by every variant, spanning all values."""
    values = [v for xs in samples.values() for v in xs]
    if not values:
        return {"edges": [], "counts": {k: [] for k in samples}}
    lo, hi = min(values), max(values)
    if hi == lo:
        edges = [lo, lo + 1.0]
        return {"bin_width": 1.0, "edges": edges, "counts": {k: [len(xs)] for k, xs in samples.items()}}
    span = hi - lo
    width = span / bins
    edges = [lo + span * i / bins for i in range(bins)] + [hi]
    counts = {}
    for k, xs in samples.items():
        c = [0] * bins
        for v in xs:
            # normalize first: span / bins can underflow for tiny ranges
            c[min(int((v - lo) / span * bins), bins - 1)] += 1
        counts[k] = c
    return {"bin_width": width, "edges": edges, "counts": counts}
