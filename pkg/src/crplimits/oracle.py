"""Sampling-free probabilities for the Chinese restaurant process.

Two independent routes compute the probability that a family of disjoint
block-growth tuples is realised: a closed form in terms of overlap counts
and an explicit product over the insertion draws of every step.  Small-n
partition laws are obtained by exhaustive recursion over the draws.
"""

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .special import log_falling_factorial, log_rising_factorial

__all__ = [
    "TupleFamily",
    "ExactProbability",
    "overlap_counts",
    "step_sets",
    "joint_probability",
    "stepwise_probability",
    "exhaustive_partition_distribution",
    "ewens_partition_pmf",
    "ewens_permutation_pmf",
    "random_family",
    "permutation_cycles",
    "set_partitions",
    "cycle_type_distribution",
    "lattice_sum",
    "lattice_sum_bruteforce",
    "TUPLE_CAP",
]


@dataclass(frozen=True)
class TupleFamily:
    """r disjoint tuples (k_1, ..., k_N, m) of increasing positive integers."""

    tuples: tuple
    theta: float

    def __post_init__(self):
        tuples = tuple(tuple(int(v) for v in t) for t in self.tuples)
        object.__setattr__(self, "tuples", tuples)
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta!r}")
        if not tuples:
            raise ValueError("a family needs at least one tuple")
        width = len(tuples[0])
        if width < 2:
            raise ValueError("each tuple needs at least one k and an m")
        seen = set()
        for t in tuples:
            if len(t) != width:
                raise ValueError("all tuples must have the same length N+1")
            if t[0] < 1 or any(a >= b for a, b in zip(t, t[1:])):
                raise ValueError(f"tuple {t} is not strictly increasing and positive")
            if seen.intersection(t):
                raise ValueError(f"tuple {t} overlaps another tuple of the family")
            seen.update(t)

    @property
    def N(self):
        return len(self.tuples[0]) - 1

    @property
    def r(self):
        return len(self.tuples)


@dataclass(frozen=True)
class ExactProbability:
    value: float
    log_value: float

    @classmethod
    def from_log(cls, log_value):
        return cls(value=math.exp(log_value), log_value=log_value)


def overlap_counts(family):
    """l^(s): elements of other tuples below m^(s) whose own block finishes later."""
    out = []
    for t in family.tuples:
        m = t[-1]
        count = 0
        for other in family.tuples:
            if other[-1] > m:
                count += sum(1 for k in other[:-1] if k < m)
        out.append(count)
    return out


def step_sets(family):
    """Sorted marked steps a_j with the sets K_j (targets) and L_j (forbidden).

    K_j lists the admissible values of the draw at step a_j; L_j the elements
    that must be avoided strictly between a_j and a_{j+1}.
    """
    N = family.N
    owner = {}
    for s, t in enumerate(family.tuples):
        for p, v in enumerate(t):
            owner[v] = (s, p)
    steps = sorted(owner)
    K, L = [], []
    for a in steps:
        s, p = owner[a]
        t = family.tuples[s]
        if p == 0:
            K.append(frozenset([t[0]]))
        elif p < N:
            K.append(frozenset(t[:p]))
        else:
            K.append(frozenset(t[:N]))
        L.append(
            frozenset(
                k for u in family.tuples for k in u[:-1] if k <= a and u[-1] > a
            )
        )
    return steps, K, L


def joint_probability(family):
    """Closed-form probability that every tuple of the family is realised."""
    N = family.N
    theta = family.theta
    log_p = family.r * (math.log(theta) + math.lgamma(N + 1))
    terms = [log_p]
    for t, l in zip(family.tuples, overlap_counts(family)):
        x = theta + t[-1] - l - 1
        if x - N <= 0:
            raise ValueError(f"non-positive falling factorial argument for tuple {t}")
        terms.append(-log_falling_factorial(x, N + 1))
    return ExactProbability.from_log(math.fsum(terms))


def stepwise_probability(family):
    """Product over steps of the insertion-draw probabilities.

    At a birth step the draw must open a new block (probability
    theta/(theta+a-1)); at any other marked step it must land in K_j; on the
    unmarked steps in between it must avoid L_j.
    """
    theta = family.theta
    steps, K, L = step_sets(family)
    births = {t[0] for t in family.tuples}
    terms = []
    for j, a in enumerate(steps):
        denom = theta + a - 1
        if a in births:
            terms.append(math.log(theta / denom))
        else:
            terms.append(math.log(len(K[j]) / denom))
        if j + 1 < len(steps) and L[j]:
            gap = np.arange(a + 1, steps[j + 1], dtype=float)
            if gap.size:
                factors = -len(L[j]) / (theta + gap - 1)
                if np.any(factors <= -1):
                    raise ValueError("a forbidden set covers every admissible draw")
                terms.append(math.fsum(np.log1p(factors)))
    return ExactProbability.from_log(math.fsum(terms))


def _canonical(blocks):
    return tuple(sorted(tuple(sorted(b)) for b in blocks))


def exhaustive_partition_distribution(n, theta):
    """Exact law of the partition of [n] obtained by running the insertion draws.

    Partitions are keyed by their canonical form: blocks listed in ascending
    order and sorted by least element.
    """
    if n < 1 or n > 10:
        raise ValueError(f"exhaustive enumeration supports 1 <= n <= 10, got {n}")
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta!r}")
    dist = {((1,),): 1.0}
    for step in range(2, n + 1):
        denom = theta + step - 1
        nxt = {}
        for part, p in dist.items():
            key = part + ((step,),)
            nxt[key] = nxt.get(key, 0.0) + p * theta / denom
            for i, block in enumerate(part):
                key = part[:i] + (block + (step,),) + part[i + 1:]
                nxt[key] = nxt.get(key, 0.0) + p * len(block) / denom
        dist = nxt
    return dist


def ewens_partition_pmf(partition, theta):
    """theta^{#blocks} prod (|B|-1)! / theta^(rising n)."""
    n = sum(len(b) for b in partition)
    log_p = len(partition) * math.log(theta) - log_rising_factorial(theta, n)
    log_p += sum(math.lgamma(len(b)) for b in partition)
    return math.exp(log_p)


def ewens_permutation_pmf(perm, theta):
    """Ewens probability theta^{cycles} / theta^(rising n) of a permutation.

    ``perm`` maps i -> perm[i] on 0..n-1.
    """
    n = len(perm)
    seen = [False] * n
    cycles = 0
    for i in range(n):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return math.exp(cycles * math.log(theta) - log_rising_factorial(theta, n))


def permutation_cycles(perm):
    """Cycles of a permutation of 0..n-1, each rotated to start at its minimum."""
    n = len(perm)
    seen = [False] * n
    out = []
    for i in range(n):
        if seen[i]:
            continue
        cyc = []
        j = i
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = perm[j]
        out.append(tuple(cyc))
    return out


def random_family(rng, r_max=3, N_max=4, m_max=500, thetas=(0.3, 1.0, 2.7)):
    """Draw a random valid family (used for the dual-oracle agreement run)."""
    r = int(rng.integers(1, r_max + 1))
    N = int(rng.integers(1, N_max + 1))
    theta = float(thetas[int(rng.integers(len(thetas)))])
    values = rng.choice(np.arange(1, m_max + 1), size=r * (N + 1), replace=False)
    tuples = [tuple(sorted(int(v) for v in chunk)) for chunk in values.reshape(r, N + 1)]
    return TupleFamily(tuple(tuples), theta)


def set_partitions(n):
    """All set partitions of {1..n} in canonical form."""
    def rec(i, blocks):
        if i > n:
            yield _canonical(blocks)
            return
        for b in range(len(blocks)):
            blocks[b].append(i)
            yield from rec(i + 1, blocks)
            blocks[b].pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def cycle_type_distribution(n, theta):
    """Law of the cycle-type counts of an Ewens permutation, by brute force over S_n."""
    out = {}
    for perm in itertools.permutations(range(n)):
        ctype = tuple(sorted(len(c) for c in permutation_cycles(perm)))
        out[ctype] = out.get(ctype, 0.0) + ewens_permutation_pmf(perm, theta)
    return out


# -- lattice sums of joint probabilities ----------------------------------------

TUPLE_CAP = 10 ** 8


def _lattice_mask(values, n, bounds):
    l, u = bounds
    v = values / n
    return (v > l) & (v <= u)


def _block_prob(theta, m, l, N):
    # theta N! / (theta + m - l - 1)^(falling N+1), vectorized over m
    x = theta + np.asarray(m, dtype=float) - l - 1
    out = np.full(x.shape, theta * math.factorial(N))
    for i in range(N + 1):
        out = out / (x - i)
    return out


def _lattice_sum_r1(window, theta, n):
    N = window.N
    top = int(math.floor(window.y_bounds[1] * n))
    v = np.arange(1, top + 1, dtype=float)
    ways = _lattice_mask(v, n, window.x_bounds[0]).astype(float)
    for b in window.x_bounds[1:]:
        below = np.concatenate([[0.0], np.cumsum(ways)[:-1]])
        ways = _lattice_mask(v, n, b) * below
    tuples_below = np.concatenate([[0.0], np.cumsum(ways)[:-1]])
    ym = _lattice_mask(v, n, window.y_bounds)
    m = v[ym]
    return math.fsum(tuples_below[ym] * _block_prob(theta, m, 0, N))


def _lattice_sum_r2_n1(window, theta, n):
    # Ordered pairs (k1, m1), (k2, m2); by symmetry sum m1 < m2 and double.
    # With m1 < m2 only tuple 1 can see an overlap: l1 = 1{k2 < m1}, l2 = 0.
    top = int(math.floor(window.y_bounds[1] * n))
    v = np.arange(1, top + 1, dtype=float)
    kx = _lattice_mask(v, n, window.x_bounds[0]).astype(float)
    cnt = np.concatenate([[0.0], np.cumsum(kx)])  # cnt[j] = #{k <= j}
    ym = _lattice_mask(v, n, window.y_bounds)
    ms = v[ym].astype(np.int64)
    n_low = cnt[ms - 1]                   # admissible k < m1
    f0 = _block_prob(theta, ms, 0, 1)
    # an overlap needs two k's below m1, hence m1 >= 3 and a positive argument
    f1 = np.zeros_like(f0)
    two = n_low >= 2
    f1[two] = _block_prob(theta, ms[two], 1, 1)
    # suffix sums over m2 > m1 of f0(m2) and f0(m2) * cnt[m2 - 1]
    s0 = np.concatenate([np.cumsum(f0[::-1])[::-1][1:], [0.0]])
    s1 = np.concatenate([np.cumsum((f0 * cnt[ms - 1])[::-1])[::-1][1:], [0.0]])
    # k2 < m1: both k's below m1 and distinct; overlap l1 = 1
    below = n_low * (n_low - 1) * f1 * s0
    # m1 < k2 < m2: cnt[m2-1] - cnt[m1] choices; no overlap
    mid = n_low * f0 * (s1 - cnt[ms] * s0)
    return 2.0 * math.fsum(below + mid)


def _tuples_in_window(window, n):
    N = window.N
    top = int(math.floor(window.y_bounds[1] * n))
    out = []
    for combo in itertools.combinations(range(1, top + 1), N + 1):
        pt = np.array(combo, dtype=float) / n
        if window.contains(pt[None, :])[0]:
            out.append(combo)
    return out


def lattice_sum_bruteforce(window, theta, n, r):
    """Direct enumeration over ordered r-tuples of disjoint lattice tuples in the window."""
    tuples = _tuples_in_window(window, n)
    if len(tuples) ** r > TUPLE_CAP:
        raise ValueError(f"{len(tuples)}^{r} tuple combinations exceed the cap {TUPLE_CAP}")
    total = []
    for combo in itertools.product(tuples, repeat=r):
        flat = [v for t in combo for v in t]
        if len(set(flat)) != len(flat):
            continue
        total.append(joint_probability(TupleFamily(combo, theta)).value)
    return math.fsum(total)


def lattice_sum(window, theta, n, r=1):
    """Sum of joint probabilities over r disjoint lattice tuples scaled into ``window``.

    r = 1 (any N) and r = 2 with N = 1 use grouped closed forms; anything else
    falls back to enumeration under the tuple cap.
    """
    if math.isinf(window.y_bounds[1]):
        raise ValueError("lattice sums need a window bounded in y")
    if r == 1:
        return _lattice_sum_r1(window, theta, n)
    if r == 2 and window.N == 1:
        return _lattice_sum_r2_n1(window, theta, n)
    return lattice_sum_bruteforce(window, theta, n, r)
