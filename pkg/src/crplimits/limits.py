"""Exact samplers for the limiting Poisson measures and the processes built on them.

The N-cone measure has density theta N!/y^(N+1).  Integrating out ordered x's
inside (0, y] leaves theta/y, so y can be drawn from a log-uniform law and the
x's as sorted uniforms on (0, y]; a box constraint is then imposed by
rejection.  Above the top of the x-box the x's no longer depend on y and the
y-marginal is a Pareto law.
"""

from dataclasses import dataclass
import functools
import math

import numpy as np

from .intensity import ConeWindow, mass

__all__ = [
    "PoissonMeasureSample",
    "MIN_ACCEPTANCE",
    "sample_xi",
    "x1_cover_window",
    "path_X1",
    "lambda_prime",
    "x1_pgf",
    "tij_windows",
    "tij_counts",
    "reassemble_x1",
    "path_L",
    "L_survival",
    "st_density",
    "T_cdf",
    "T_median",
    "sample_ST_closed_form",
    "st_from_atoms",
    "st_truncation_error",
    "Q_cumulative",
    "sample_Q_path",
    "q_path_values",
    "sample_counts_limit",
]

MIN_ACCEPTANCE = 1e-4


@functools.lru_cache(maxsize=4096)
def _mass(window, theta):
    # windows are frozen, so repeated draws on one window reuse the exact mass
    return mass(window, theta)


@dataclass
class PoissonMeasureSample:
    window: ConeWindow
    atoms: np.ndarray

    @property
    def count(self):
        return len(self.atoms)


def _capped_x_bounds(window):
    uy = window.y_bounds[1]
    return [(l, min(u, uy)) for l, u in window.x_bounds]


def _sorted_uniforms(rng, size, N, top):
    x = rng.random((size, N)) * np.asarray(top, dtype=float).reshape(-1, 1)
    x.sort(axis=1)
    return x


def _box_mask(x, xb):
    lo = np.array([b[0] for b in xb])
    hi = np.array([b[1] for b in xb])
    return np.all((x > lo) & (x <= hi), axis=1)


def _draw_lower(rng, count, xb, ly, uy, theta, part_mass):
    # y log-uniform on (ly, uy], x sorted uniforms on (0, y]
    env = theta * math.log(uy / ly)
    if part_mass / env < MIN_ACCEPTANCE:
        raise ValueError(
            f"rejection acceptance {part_mass / env:.2e} is below {MIN_ACCEPTANCE}; split the window"
        )
    N = len(xb)
    out = []
    need = count
    while need > 0:
        batch = max(16, int(1.2 * need * env / part_mass) + 8)
        y = ly * (uy / ly) ** rng.random(batch)
        x = _sorted_uniforms(rng, batch, N, y)
        ok = _box_mask(x, xb) & (y > ly) & (y <= uy)
        got = np.column_stack([x[ok], y[ok]])[:need]
        out.append(got)
        need -= len(got)
    return np.concatenate(out) if out else np.zeros((0, N + 1))


def _draw_upper(rng, count, xb, top, ylo, uy, theta, part_mass):
    # x independent of y: ordered uniform on the box; y Pareto on (ylo, uy]
    N = len(xb)
    y_factor = theta * math.factorial(N - 1) * (ylo ** -N - (0.0 if math.isinf(uy) else uy ** -N))
    ordered_vol = part_mass / y_factor
    acceptance = ordered_vol / (top ** N / math.factorial(N))
    if acceptance < MIN_ACCEPTANCE:
        raise ValueError(
            f"rejection acceptance {acceptance:.2e} is below {MIN_ACCEPTANCE}; split the window"
        )
    xs = []
    need = count
    while need > 0:
        batch = max(16, int(1.2 * need / acceptance) + 8)
        x = _sorted_uniforms(rng, batch, N, np.full(batch, top))
        got = x[_box_mask(x, xb)][:need]
        xs.append(got)
        need -= len(got)
    x = np.concatenate(xs) if xs else np.zeros((0, N))
    u = rng.random(count)
    tail = 0.0 if math.isinf(uy) else uy ** -N
    y = (ylo ** -N - u * (ylo ** -N - tail)) ** (-1.0 / N)
    return np.column_stack([x, y])


def sample_xi(window, theta, rng):
    """One realisation of the limiting Poisson measure restricted to ``window``."""
    N = window.N
    xb = _capped_x_bounds(window)
    ly, uy = window.y_bounds
    if any(u <= l for l, u in xb):
        return PoissonMeasureSample(window, np.zeros((0, N + 1)))
    top = max(u for _, u in xb)
    if math.isinf(top):
        raise ValueError("x-box must be bounded (split the window at a finite x level)")
    total = _mass(window, theta)
    count = int(rng.poisson(total))
    if count == 0:
        return PoissonMeasureSample(window, np.zeros((0, N + 1)))
    lower_top = min(uy, top)
    m_low = _mass(ConeWindow(window.x_bounds, (ly, lower_top)), theta) if lower_top > ly else 0.0
    m_up = max(total - m_low, 0.0)
    n_low = int(rng.binomial(count, m_low / total)) if m_up > 0 else count
    parts = []
    if n_low:
        parts.append(_draw_lower(rng, n_low, xb, ly, lower_top, theta, m_low))
    if count - n_low:
        parts.append(_draw_upper(rng, count - n_low, xb, top, max(ly, top), uy, theta, m_up))
    atoms = np.concatenate(parts)
    return PoissonMeasureSample(window, atoms[np.lexsort(atoms.T[::-1])])


# -- singleton counting process X_1 ------------------------------------------

def x1_cover_window(t_min, t_max):
    """{x <= t_max, y > max(x, t_min)}: every atom that can matter on [t_min, t_max]."""
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    return ConeWindow(((0.0, t_max),), (t_min, math.inf), "X1 cover")


def path_X1(atoms, t_grid):
    """X_1(t) = number of atoms with x <= t < y."""
    atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    return ((atoms[None, :, 0] <= t[:, None]) & (atoms[None, :, 1] > t[:, None])).sum(axis=1)


def lambda_prime(theta, grid):
    """Matrix of the Poisson means of the T_ij boxes (upper triangle, 0-based)."""
    t = np.concatenate([[0.0], np.asarray(grid, dtype=float)])
    r = len(grid)
    if np.any(np.diff(t) <= 0):
        raise ValueError("grid must be strictly increasing and positive")
    inv = np.concatenate([1.0 / t[1:], [0.0]])
    lam = np.zeros((r, r))
    for i in range(1, r + 1):
        for j in range(i, r + 1):
            lam[i - 1, j - 1] = theta * (t[i] - t[i - 1]) * (inv[j - 1] - inv[j])
    return lam


def x1_pgf(theta, grid, z):
    """Joint pgf E prod z_m^{X_1(t_m)} of the singleton process at the grid."""
    lam = lambda_prime(theta, grid)
    z = np.asarray(z, dtype=float)
    r = len(grid)
    expo = 0.0
    for i in range(r):
        for j in range(i, r):
            expo += lam[i, j] * (np.prod(z[i:j + 1]) - 1.0)
    return math.exp(expo)


def tij_windows(grid):
    """Boxes (t_{i-1}, t_i] x (t_j, t_{j+1}], 1 <= i <= j <= r, with t_{r+1} = inf."""
    t = [0.0] + [float(v) for v in grid] + [math.inf]
    r = len(grid)
    return {
        (i, j): ConeWindow(((t[i - 1], t[i]),), (t[j], t[j + 1]), f"T_{i}{j}")
        for i in range(1, r + 1) for j in range(i, r + 1)
    }


def tij_counts(atoms, grid):
    r = len(grid)
    out = np.zeros((r, r), dtype=np.int64)
    for (i, j), w in tij_windows(grid).items():
        out[i - 1, j - 1] = w.count(atoms) if len(atoms) else 0
    return out


def reassemble_x1(counts):
    """X_1(t_m) as the sum of T_ij counts over i <= m <= j."""
    r = counts.shape[0]
    return np.array([counts[:m + 1, m:].sum() for m in range(r)], dtype=np.int64)


# -- leftmost singleton L ------------------------------------------------------

def path_L(atoms, t_grid):
    """x of the leftmost atom in (0, t] x (t, inf); t itself when there is none."""
    atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
    out = []
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        sel = atoms[(atoms[:, 0] <= t) & (atoms[:, 1] > t), 0]
        out.append(sel.min() if sel.size else t)
    return np.array(out)


def L_survival(theta, t_grid, x):
    """P{L(t_m) > x_m for all m} for increasing t's and non-decreasing x's."""
    t = np.asarray(t_grid, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x >= t):
        return 0.0
    inv = np.concatenate([1.0 / t, [0.0]])
    return math.exp(-theta * float(np.sum(x * (inv[:-1] - inv[1:]))))


# -- short-lived singletons ---------------------------------------------------

def st_density(s, t, delta, theta):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    val = theta / (s + t) ** 2 * (1.0 + t / delta) ** (-theta)
    return np.where((s >= delta) & (t >= 0), val, 0.0)


def T_cdf(t, delta, theta):
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    return 1.0 - (1.0 + t / delta) ** (-theta)


def T_median(delta, theta):
    return delta * (2.0 ** (1.0 / theta) - 1.0)


def sample_ST_closed_form(delta, theta, rng, size=None):
    """(S, T) by inversion: Pareto-type T, then S given T from (delta+t)/(s+t)^2."""
    if delta <= 0 or theta <= 0:
        raise ValueError("delta and theta must be positive")
    u1 = rng.random(size)
    u2 = rng.random(size)
    T = delta * ((1.0 - u1) ** (-1.0 / theta) - 1.0)
    S = (delta + T) / (1.0 - u2) - T
    return S, T


def st_from_atoms(atoms, delta):
    """Argmin of y - x over atoms with x >= delta (earlier x on ties); None if empty."""
    atoms = np.asarray(atoms, dtype=float).reshape(-1, 2)
    sel = atoms[atoms[:, 0] >= delta]
    if not len(sel):
        return None
    life = sel[:, 1] - sel[:, 0]
    best = np.lexsort((sel[:, 0], life))[0]
    return float(sel[best, 0]), float(life[best])


def st_truncation_error(delta, theta, x_max):
    """sup_t |P{T <= t} - P{T_trunc <= t}| when only births in [delta, x_max] are seen.

    The truncated minimum satisfies P{T_trunc > t} = ((1+t/delta)/(1+t/x_max))^(-theta),
    so the gap is (1+t/delta)^(-theta) ((1+t/x_max)^theta - 1); its supremum is
    taken over a fine log grid together with the t -> inf limit (delta/x_max)^theta.
    """
    t = np.geomspace(delta * 1e-6, x_max * 1e6, 20001)
    gap = (1.0 + t / delta) ** (-theta) * ((1.0 + t / x_max) ** theta - 1.0)
    return float(max(gap.max(), (delta / x_max) ** theta))


# -- short-lived counting process ---------------------------------------------

def Q_cumulative(t, delta, theta):
    """Mean function theta log(1 + t/delta) of the limiting counting process."""
    return theta * np.log1p(np.asarray(t, dtype=float) / delta)


def sample_Q_path(delta, theta, t_max, rng):
    """Event times on [0, t_max]: unit-rate arrivals pushed through the inverse mean function."""
    if delta <= 0 or theta <= 0 or t_max < 0:
        raise ValueError("parameters must be positive")
    budget = float(Q_cumulative(t_max, delta, theta))
    arrivals = []
    acc = rng.exponential()
    while acc <= budget:
        arrivals.append(acc)
        acc += rng.exponential()
    e = np.array(arrivals)
    return delta * np.expm1(e / theta)


def q_path_values(event_times, t_grid):
    """Right-continuous counting path N(t) = #{events <= t} on the grid."""
    return np.searchsorted(np.sort(event_times), np.atleast_1d(t_grid), side="right")


# -- block counts at two times ---------------------------------------------------

def sample_counts_limit(consts, size, rng):
    """Draw (C_1..C_N at time 1; C_1..C_N at time alpha) from independent Poisson pieces."""
    N = consts.N
    now = np.zeros((size, N), dtype=np.int64)
    later = np.zeros((size, N), dtype=np.int64)
    for j in range(1, N + 1):
        for i in range(0, j + 1):
            x = rng.poisson(consts.lam[i, j], size)
            later[:, j - 1] += x
            if i >= 1:
                now[:, i - 1] += x
    for i in range(1, N + 1):
        now[:, i - 1] += rng.poisson(consts.tail[i], size)
    return now, later
