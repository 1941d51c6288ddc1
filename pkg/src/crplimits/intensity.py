"""The limiting intensity measures on the cones and the constants built from them.

The intensity on the N-cone {0 < x_1 <= ... <= x_N <= y} is

    theta * N! / y**(N+1)  dx_1 ... dx_N dy.

Windows are boxes of half-open intervals intersected with the cone.  Their
mass is computed exactly: the y-integral is done analytically, the ordered
x-integrals are carried out on piecewise polynomials with rational
coefficients, and only the final logarithms are evaluated in extended
precision.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

import mpmath
import numpy as np
from scipy import integrate

from .special import reg_inc_beta

__all__ = [
    "ConeWindow",
    "in_cone",
    "mass",
    "mass_numeric",
    "lift_window",
    "consistency_check",
    "lambda_ij",
    "lambda_tail",
    "lambda_tail_by_rows",
    "PropCountsConstants",
    "prop_counts_constants",
    "negbin_cdf_identity_check",
    "block_window",
    "tail_window",
    "count_window",
]

_DPS = 50


def in_cone(points):
    """Row-wise membership in the cone: positive and non-decreasing coordinates."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.all(pts > 0, axis=1) & np.all(np.diff(pts, axis=1) >= 0, axis=1)


@dataclass(frozen=True)
class ConeWindow:
    """Box of half-open intervals (l, u] intersected with the N-cone.

    ``x_bounds`` holds one (l, u) pair per x-coordinate; ``y_bounds`` the pair
    for the last coordinate.  Upper ends may be ``math.inf``.
    """

    x_bounds: tuple
    y_bounds: tuple
    label: str = field(default="", compare=False)

    def __post_init__(self):
        xb = tuple((float(l), float(u)) for l, u in self.x_bounds)
        yb = (float(self.y_bounds[0]), float(self.y_bounds[1]))
        object.__setattr__(self, "x_bounds", xb)
        object.__setattr__(self, "y_bounds", yb)
        if not xb:
            raise ValueError("a window needs at least one x-coordinate")
        for l, u in xb + (yb,):
            if not (l < u) or l < 0 or math.isnan(l) or math.isnan(u):
                raise ValueError(f"bad interval ({l}, {u}]")
        if yb[0] <= 0:
            raise ValueError("the y-interval must be bounded away from zero (l_y > 0)")

    @property
    def N(self):
        return len(self.x_bounds)

    def bounds(self):
        return self.x_bounds + (self.y_bounds,)

    def scaled(self, c):
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return ConeWindow(
            tuple((l * c, u * c) for l, u in self.x_bounds),
            (self.y_bounds[0] * c, self.y_bounds[1] * c),
            self.label,
        )

    def contains(self, points):
        """Vectorized membership of points (rows of length N+1) in box ∩ cone."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return np.zeros(0, dtype=bool)
        lo = np.array([b[0] for b in self.bounds()])
        hi = np.array([b[1] for b in self.bounds()])
        inside = np.all((pts > lo) & (pts <= hi), axis=1)
        return inside & in_cone(pts)

    def count(self, points):
        return int(np.count_nonzero(self.contains(points)))

    def to_dict(self):
        return {"x": [list(b) for b in self.x_bounds], "y": list(self.y_bounds)}

    @classmethod
    def from_dict(cls, d):
        def fix(v):
            return math.inf if v in (None, "inf", "Infinity") else float(v)

        return cls(
            tuple((fix(l), fix(u)) for l, u in d["x"]),
            (fix(d["y"][0]), fix(d["y"][1])),
            d.get("label", ""),
        )


# -- exact piecewise-polynomial integration ---------------------------------

def _poly_eval(coefs, x):
    out = Fraction(0)
    for c in reversed(coefs):
        out = out * x + c
    return out


def _poly_antideriv(coefs):
    return [Fraction(0)] + [c / (k + 1) for k, c in enumerate(coefs)]


def _ordered_density(x_bounds, breaks):
    """Piecewise polynomial h(x) = volume of {x_1 <= ... <= x_{N-1} <= x} in the box.

    Returns one coefficient list per piece [breaks[p], breaks[p+1]]; the last
    piece extends to +inf.
    """
    npieces = len(breaks)

    def indicator(l, u):
        out = []
        for p in range(npieces):
            a = breaks[p]
            b = breaks[p + 1] if p + 1 < npieces else None
            inside = a >= l and (u is None or (b is not None and b <= u))
            out.append([Fraction(1)] if inside else [])
        return out

    h = indicator(*x_bounds[0])
    for l, u in x_bounds[1:]:
        # running integral F(x) = int_0^x h
        F = []
        acc = Fraction(0)
        for p in range(npieces):
            P = _poly_antideriv(h[p]) if h[p] else [Fraction(0)]
            shift = acc - _poly_eval(P, breaks[p])
            F.append([P[0] + shift] + P[1:])
            if p + 1 < npieces:
                acc = _poly_eval(F[p], breaks[p + 1])
        ind = indicator(l, u)
        h = [F[p] if ind[p] else [] for p in range(npieces)]
    return h


def _to_fraction(v):
    return None if math.isinf(v) else Fraction(v)


def _exact_mass(window, theta):
    N = window.N
    ly, uy = window.y_bounds
    # x_N <= y <= u_y caps every x-interval
    xb = []
    for l, u in window.x_bounds:
        u = min(u, uy)
        if u <= l:
            return 0.0
        xb.append((l, u))
    pts = {0.0, ly}
    for l, u in xb:
        pts.add(l)
        if not math.isinf(u):
            pts.add(u)
    if not math.isinf(uy):
        pts.add(uy)
    breaks = [Fraction(v) for v in sorted(pts)]
    fx = [(Fraction(l), _to_fraction(u)) for l, u in xb]
    h = _ordered_density(fx, breaks)

    Ly = Fraction(ly)
    Uy = _to_fraction(uy)
    inv_uy_pow = Fraction(0) if Uy is None else Uy ** (-N)
    rational = Fraction(0)
    logs = []  # (coefficient, a, b) for coefficient * log(b/a)
    npieces = len(breaks)
    for p in range(npieces):
        coefs = h[p]
        if not coefs or all(c == 0 for c in coefs):
            continue
        a = breaks[p]
        b = breaks[p + 1] if p + 1 < npieces else None
        if b is None and Uy is not None:
            continue  # beyond u_y nothing survives
        if b is not None and Uy is not None and a >= Uy:
            continue
        if b is not None and b <= Ly:
            # G(x) = l_y^{-N} - u_y^{-N} is constant here
            const = Ly ** (-N) - inv_uy_pow
            P = _poly_antideriv(coefs)
            rational += const * (_poly_eval(P, b) - _poly_eval(P, a))
            continue
        # here a >= l_y: G(x) = x^{-N} - u_y^{-N}
        for k, c in enumerate(coefs):
            if c == 0:
                continue
            e = k - N + 1
            if b is None:
                if e >= 0:
                    raise ValueError("window has infinite mass")
                rational += c * (-(a ** e)) / e
            elif e == 0:
                logs.append((c, a, b))
            else:
                rational += c * (b ** e - a ** e) / e
        if inv_uy_pow:
            P = _poly_antideriv(coefs)
            rational -= inv_uy_pow * (_poly_eval(P, b) - _poly_eval(P, a))

    with mpmath.workdps(_DPS):
        total = mpmath.mpf(rational.numerator) / rational.denominator
        for c, a, b in logs:
            cm = mpmath.mpf(c.numerator) / c.denominator
            ratio = (mpmath.mpf(b.numerator) / b.denominator) / (
                mpmath.mpf(a.numerator) / a.denominator
            )
            total += cm * mpmath.log(ratio)
        total *= mpmath.mpf(theta) * mpmath.factorial(N - 1)
        return max(0.0, float(total))


def mass(window, theta):
    """Intensity mass of a cone window; exact up to the final rounding."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return _exact_mass(window, theta)


def mass_numeric(window, theta, epsabs=1e-11):
    """Quadrature route for the same mass (analytic in y, nested quad in x).

    Independent of :func:`mass`; practical for N <= 3.
    """
    N = window.N
    ly, uy = window.y_bounds
    xb = window.x_bounds

    def tail(x):
        lo = max(x, ly)
        if lo >= uy:
            return 0.0
        upper = 0.0 if math.isinf(uy) else uy ** (-N)
        return theta * math.factorial(N - 1) * (lo ** (-N) - upper)

    def inner(level, prev):
        l, u = xb[level]
        lo = max(l, prev)
        hi = min(u, uy)
        if hi <= lo:
            return 0.0
        if level == N - 1:
            f = tail
        else:
            def f(x):
                return inner(level + 1, x)
        kw = dict(epsabs=epsabs, epsrel=1e-12, limit=200)
        # split at the kink of the y-tail; quad cannot take points on infinite ranges
        cuts = [lo] + [v for v in (ly,) if lo < v < hi] + [hi]
        return math.fsum(integrate.quad(f, a, b, **kw)[0] for a, b in zip(cuts, cuts[1:]))

    return inner(0, 0.0)


def lift_window(window, M):
    """The window B_{N->M}: old y becomes x_{N+1}, later coordinates free but ordered."""
    N = window.N
    if M < N:
        raise ValueError("can only lift to a higher dimension")
    if M == N:
        return window
    ly, uy = window.y_bounds
    xb = list(window.x_bounds) + [(ly, uy)] + [(ly, math.inf)] * (M - N - 1)
    return ConeWindow(tuple(xb), (ly, math.inf), window.label)


def consistency_check(window, M, theta):
    """Masses of B_N and of its lift to the M-cone, plus their difference."""
    if M < window.N:
        raise ValueError("M must be at least N")
    base = mass(window, theta)
    lifted = mass(lift_window(window, M), theta)
    return base, lifted, lifted - base


# -- block-count constants ---------------------------------------------------

def lambda_ij(theta, alpha, i, j):
    """Mean of the number of blocks of size i at time 1 that have size j at time alpha."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if not 0 <= i <= j or j < 1:
        raise ValueError(f"need 0 <= i <= j and j >= 1, got i={i}, j={j}")
    q = 1.0 / alpha
    return theta / j * math.comb(j, i) * q ** i * (1.0 - q) ** (j - i)


def lambda_tail(theta, alpha, i, N):
    """Mean number of size-i blocks at time 1 that exceed size N by time alpha."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if not 1 <= i <= N:
        raise ValueError(f"need 1 <= i <= N, got i={i}, N={N}")
    return theta / i * reg_inc_beta(1.0 - 1.0 / alpha, N - i + 1, i)


def lambda_tail_by_rows(theta, alpha, i, N):
    """Same constant via theta/i minus the finite row sum."""
    row = math.fsum(lambda_ij(theta, alpha, i, j) for j in range(i, N + 1))
    return theta / i - row


@dataclass(frozen=True)
class PropCountsConstants:
    theta: float
    alpha: float
    N: int
    lam: np.ndarray   # lam[i, j] for 0 <= i <= j <= N, j >= 1 (zero elsewhere)
    tail: np.ndarray  # tail[i] for 1 <= i <= N (tail[0] unused)

    def mean_at_n(self):
        """Limit means of (C_1..C_N) at time n."""
        return np.array([self.lam[i, i:].sum() + self.tail[i] for i in range(1, self.N + 1)])

    def mean_at_alpha_n(self):
        """Limit means of (C_1..C_N) at time alpha*n."""
        return np.array([self.lam[: j + 1, j].sum() for j in range(1, self.N + 1)])

    def covariance(self, i, j):
        """Cov(C_i at n, C_j at alpha*n): the shared Poisson term lam[i, j]."""
        return float(self.lam[i, j]) if i <= j else 0.0


def prop_counts_constants(theta, alpha, N):
    lam = np.zeros((N + 1, N + 1))
    for j in range(1, N + 1):
        for i in range(0, j + 1):
            lam[i, j] = lambda_ij(theta, alpha, i, j)
    tail = np.zeros(N + 1)
    for i in range(1, N + 1):
        tail[i] = lambda_tail(theta, alpha, i, N)
    return PropCountsConstants(theta, alpha, N, lam, tail)


def negbin_cdf_identity_check(i, alpha, N, tol=1e-12):
    """Negative binomial CDF at N-i against I_{1/alpha}(i, N-i+1)."""
    q = 1.0 / alpha
    lhs = math.fsum(
        math.comb(j + i - 1, j) * q ** i * (1.0 - q) ** j for j in range(N - i + 1)
    )
    rhs = reg_inc_beta(q, i, N - i + 1)
    return abs(lhs - rhs) <= tol


# -- windows used by the block-count arguments --------------------------------

def block_window(N, i, j, alpha):
    """Blocks with i elements by time 1 and j by time alpha, not yet of size N+1 at alpha."""
    xb = [(0.0, 1.0)] * i + [(1.0, alpha)] * (j - i) + [(alpha, math.inf)] * (N - j)
    lo_y = alpha if j <= N else 1.0
    return ConeWindow(tuple(xb), (lo_y, math.inf), f"B_{i}{j}")


def tail_window(N, i, alpha):
    """Blocks with i elements by time 1 that reach size N+1 within (1, alpha]."""
    xb = [(0.0, 1.0)] * i + [(1.0, alpha)] * (N - i)
    return ConeWindow(tuple(xb), (1.0, alpha), f"B_{i},>N")


def count_window(N, k, beta):
    """Blocks of size exactly k at time beta (k <= N)."""
    xb = [(0.0, beta)] * k + [(beta, math.inf)] * (N - k)
    return ConeWindow(tuple(xb), (beta, math.inf), f"G_{k},{beta}")
