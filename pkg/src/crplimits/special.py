"""Factorial powers and the regularized incomplete beta function.

Both factorial powers come in a linear and a log flavour.  The linear
versions multiply directly for short products and fall back to log-gamma
differences for long ones.
"""

import math

__all__ = [
    "rising_factorial",
    "falling_factorial",
    "log_rising_factorial",
    "log_falling_factorial",
    "reg_inc_beta",
    "log_gamma_ratio",
]

# products up to this length are formed term by term
DIRECT_MAX = 20

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXITER = 1000


def _check_order(n):
    if int(n) != n or n < 0:
        raise ValueError(f"order must be a non-negative integer, got {n!r}")
    return int(n)


def log_rising_factorial(x, n):
    """log of x (x+1) ... (x+n-1) for x > 0."""
    n = _check_order(n)
    if x <= 0:
        raise ValueError(f"rising factorial needs x > 0, got {x!r}")
    if n <= DIRECT_MAX:
        return math.fsum(math.log(x + i) for i in range(n))
    return math.lgamma(x + n) - math.lgamma(x)


def rising_factorial(x, n):
    """x (x+1) ... (x+n-1); the empty product (n = 0) is 1."""
    n = _check_order(n)
    if x <= 0:
        raise ValueError(f"rising factorial needs x > 0, got {x!r}")
    if n <= DIRECT_MAX:
        out = 1.0
        for i in range(n):
            out *= x + i
        return out
    return math.exp(log_rising_factorial(x, n))


def log_falling_factorial(x, n):
    """log of x (x-1) ... (x-n+1); requires x - n + 1 > 0."""
    n = _check_order(n)
    if n and x - n + 1 <= 0:
        raise ValueError(
            f"falling factorial of order {n} at x={x!r} has a non-positive factor"
        )
    if n <= DIRECT_MAX:
        return math.fsum(math.log(x - i) for i in range(n))
    return math.lgamma(x + 1) - math.lgamma(x - n + 1)


def falling_factorial(x, n):
    """x (x-1) ... (x-n+1) with every factor positive."""
    n = _check_order(n)
    if n and x - n + 1 <= 0:
        raise ValueError(
            f"falling factorial of order {n} at x={x!r} has a non-positive factor"
        )
    if n <= DIRECT_MAX:
        out = 1.0
        for i in range(n):
            out *= x - i
        return out
    return math.exp(log_falling_factorial(x, n))


# Stirling-series coefficients B_{2k} / (2k (2k-1))
_STIRLING = (1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360)


def log_gamma_ratio(x, h):
    """log Gamma(x+h) - log Gamma(x) for x > 0, h >= 0, without cancellation.

    Differences of lgamma lose about log10(x log x) digits; for large x the
    Stirling series is differenced term by term instead.
    """
    if x <= 0 or h < 0:
        raise ValueError("need x > 0 and h >= 0")
    if h == 0:
        return 0.0
    if x < 30:
        return math.lgamma(x + h) - math.lgamma(x)
    y = x + h
    out = (x - 0.5) * math.log1p(h / x) + h * math.log(y) - h
    for k, c in enumerate(_STIRLING, start=1):
        p = 2 * k - 1
        out += c * (y ** -p - x ** -p)
    return out


def _betacf(x, a, b):
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
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
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta function I_x(a, b).

    The continued fraction converges fast for x < (a+1)/(a+b+2); above that
    point the symmetry I_x(a, b) = 1 - I_{1-x}(b, a) is used instead.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x!r}")
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a!r}, b={b!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        value = front * _betacf(x, a, b) / a
    else:
        value = 1.0 - front * _betacf(1.0 - x, b, a) / b
    return min(1.0, max(0.0, value))
