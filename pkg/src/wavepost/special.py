"""Regularized lower incomplete gamma function and the small-ball gamma bound."""

import math

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _series(b, a, log_prefix):
    # sum_{n>=0} b^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= b / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"series for P({a}, {b}) did not converge")
    return total * math.exp(log_prefix)


def _continued_fraction(b, a, log_prefix):
    # modified Lentz evaluation of the upper tail Q(a, b)
    bb = b + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / bb
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        bb += 2.0
        d = an * d + bb
        if abs(d) < _TINY:
            d = _TINY
        c = bb + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"continued fraction for Q({a}, {b}) did not converge")
    return math.exp(log_prefix) * h


def lower_incomplete_gamma_regularized(b: float, a: float) -> float:
    """``F(b; a) = Gamma(a)^-1 int_0^b x^(a-1) e^-x dx``.

    Power series below ``b = a + 1``, Lentz continued fraction for the upper
    tail above it.
    """
    if b < 0 or a <= 0:
        raise ValueError(f"need b >= 0 and a > 0, got b={b}, a={a}")
    if b == 0:
        return 0.0
    if math.isinf(b):
        return 1.0
    log_prefix = -b + a * math.log(b) - math.lgamma(a)
    if b < a + 1.0:
        return min(1.0, _series(b, a, log_prefix))
    return max(0.0, 1.0 - _continued_fraction(b, a, log_prefix))


def log_lower_incomplete_gamma_regularized(b: float, a: float) -> float:
    """``log F(b; a)``, accurate deep in the lower tail where ``F`` underflows."""
    if b < 0 or a <= 0:
        raise ValueError(f"need b >= 0 and a > 0, got b={b}, a={a}")
    if b == 0:
        return -math.inf
    log_prefix = -b + a * math.log(b) - math.lgamma(a)
    if b < a + 1.0:
        return math.log(_series(b, a, 0.0)) + log_prefix
    return math.log1p(-_continued_fraction(b, a, log_prefix))


def log_gamma_lower_bound(b: float, a: float) -> float:
    """``log(e^a e^-b b^a a^-a a^-1/2)``."""
    return a - b + a * math.log(b) - a * math.log(a) - 0.5 * math.log(a)


def log_gamma_tail_bound_ratio(b: float, a: float) -> float:
    """Logarithm of :func:`gamma_tail_bound_ratio`; finite wherever ``b > 0``."""
    if not b > 0 or not a >= 0.5:
        raise ValueError(f"need b > 0 and a >= 1/2, got b={b}, a={a}")
    return log_lower_incomplete_gamma_regularized(b, a) - log_gamma_lower_bound(b, a)


def gamma_tail_bound_ratio(b: float, a: float) -> float:
    """``F(b; a)`` divided by ``e^a e^-b b^a a^-a a^-1/2``, formed in log space.

    Far above the mode the bound underflows while ``F`` is 1; the ratio is
    then reported as ``inf`` rather than raising.
    """
    log_ratio = log_gamma_tail_bound_ratio(b, a)
    return math.exp(log_ratio) if log_ratio < 709.0 else math.inf
