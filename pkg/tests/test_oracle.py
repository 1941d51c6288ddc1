import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from crplimits.intensity import ConeWindow
from crplimits.oracle import (
    TupleFamily,
    cycle_type_distribution,
    ewens_partition_pmf,
    ewens_permutation_pmf,
    exhaustive_partition_distribution,
    joint_probability,
    lattice_sum,
    lattice_sum_bruteforce,
    overlap_counts,
    random_family,
    set_partitions,
    step_sets,
    stepwise_probability,
)

EXAMPLE = ((3, 7, 11, 19), (6, 12, 21, 24))
EXAMPLE_VALUE = 36 / (57120 * 255024)


@st.composite
def families(draw, r_max=3, N_max=4, m_max=300):
    r = draw(st.integers(1, r_max))
    N = draw(st.integers(1, N_max))
    values = draw(st.lists(st.integers(1, m_max), min_size=r * (N + 1), max_size=r * (N + 1), unique=True))
    theta = draw(st.sampled_from([0.3, 1.0, 2.7, 10.0]))
    tuples = tuple(tuple(sorted(values[s * (N + 1):(s + 1) * (N + 1)])) for s in range(r))
    return TupleFamily(tuples, theta)


# -- overlaps and step sets ---------------------------------------------------

def test_overlap_single_tuple():
    assert overlap_counts(TupleFamily(((2, 5, 9),), 1.0)) == [0]


def test_overlap_worked_example():
    assert overlap_counts(TupleFamily(EXAMPLE, 1.0)) == [2, 0]


def test_overlap_separated_tuples():
    fam = TupleFamily(((1, 2, 3), (10, 11, 12)), 1.0)
    assert overlap_counts(fam)[0] == 0


@given(families())
def test_overlap_bounds(fam):
    assert all(0 <= v <= fam.r * fam.N for v in overlap_counts(fam))


def test_step_sets_worked_example():
    steps, K, L = step_sets(TupleFamily(EXAMPLE, 1.0))
    assert [sorted(k) for k in K] == [[3], [6], [3], [3, 7], [6], [3, 7, 11], [6, 12], [6, 12, 21]]
    assert [sorted(x) for x in L] == [
        [3], [3, 6], [3, 6, 7], [3, 6, 7, 11], [3, 6, 7, 11, 12], [6, 12], [6, 12, 21], [],
    ]
    assert list(steps) == [3, 6, 7, 11, 12, 19, 21, 24]


def test_family_validation():
    with pytest.raises(ValueError):
        TupleFamily(((1, 3), (3, 5)), 1.0)
    with pytest.raises(ValueError):
        TupleFamily(((4, 2),), 1.0)
    with pytest.raises(ValueError):
        TupleFamily(((1, 2),), 0.0)
    with pytest.raises(ValueError):
        TupleFamily(((1, 2), (3, 4, 5)), 1.0)


# -- joint probability ---------------------------------------------------------

def test_joint_single_pair():
    p = joint_probability(TupleFamily(((1, 2),), 1.0))
    assert p.value == pytest.approx(0.5, rel=1e-15)
    theta = 2.7
    p = joint_probability(TupleFamily(((1, 2),), theta))
    assert p.value == pytest.approx(1 / (theta + 1), rel=1e-14)


def test_worked_example_both_routes():
    fam = TupleFamily(EXAMPLE, 1.0)
    a = joint_probability(fam).value
    b = stepwise_probability(fam).value
    assert a == pytest.approx(EXAMPLE_VALUE, rel=1e-13)
    assert b == pytest.approx(EXAMPLE_VALUE, rel=1e-13)
    assert a == pytest.approx(2.4713e-9, rel=1e-4)


def test_large_theta_asymptotics():
    theta = 1e6
    fam = TupleFamily(((2, 5, 9), (3, 4, 11)), theta)
    approx = (theta * 2 / theta ** 3) ** 2
    assert joint_probability(fam).value / approx == pytest.approx(1.0, rel=1e-4)


def test_log_space_no_underflow():
    N = 8
    tuples = tuple(tuple(range(50000 + 10 * s, 50000 + 10 * s + N)) + (100000 + s,) for s in range(9))
    fam = TupleFamily(tuples, 1.0)
    p = joint_probability(fam)
    assert math.isfinite(p.log_value)
    assert p.log_value < -700
    q = stepwise_probability(fam)
    assert abs(p.log_value - q.log_value) <= 1e-10 * abs(p.log_value)


@given(families())
@settings(max_examples=300)
def test_duality(fam):
    a = joint_probability(fam)
    b = stepwise_probability(fam)
    assert abs(math.expm1(a.log_value - b.log_value)) <= 1e-10
    assert 0.0 <= a.value <= 1.0
    if a.value > 1e-300:
        assert math.exp(a.log_value) == pytest.approx(a.value, rel=1e-12)


def test_duality_thousand_families():
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(1000):
        fam = random_family(rng)
        worst = max(worst, abs(math.expm1(joint_probability(fam).log_value - stepwise_probability(fam).log_value)))
    assert worst <= 1e-10


@given(families(r_max=3))
def test_subfamily_monotone(fam):
    assume(fam.r > 1)
    sub = TupleFamily(fam.tuples[1:], fam.theta)
    assert joint_probability(fam).log_value <= joint_probability(sub).log_value + 1e-12


@given(families())
def test_product_bounds(fam):
    th, N, r = fam.theta, fam.N, fam.r
    lo = sum(math.log(th) + math.lgamma(N + 1) - (N + 1) * math.log(th + t[-1]) for t in fam.tuples)
    hi_args = [th + t[-1] - (r + 1) * N - 1 for t in fam.tuples]
    assume(all(h > 0 for h in hi_args))
    hi = sum(math.log(th) + math.lgamma(N + 1) - (N + 1) * math.log(h) for h in hi_args)
    v = joint_probability(fam).log_value
    assert lo - 1e-12 <= v <= hi + 1e-12


def test_joint_probability_against_enumeration():
    # sum over all partitions of [7] of the indicator of the event
    theta = 1.7
    fam = TupleFamily(((1, 3, 6), (2, 4, 7)), theta)
    dist = exhaustive_partition_distribution(7, theta)

    def holds(part):
        for t in fam.tuples:
            block = next(b for b in part if t[0] in b)
            if block[: len(t)] != t:
                return False
        return True

    total = math.fsum(p for part, p in dist.items() if holds(part))
    assert joint_probability(fam).value == pytest.approx(total, rel=1e-12)


# -- exhaustive partitions and Ewens ----------------------------------------------

def test_exhaustive_n2():
    d = exhaustive_partition_distribution(2, 1.0)
    assert d[((1,), (2,))] == pytest.approx(0.5)
    assert d[((1, 2),)] == pytest.approx(0.5)


def test_exhaustive_n3_one_block():
    d = exhaustive_partition_distribution(3, 1.0)
    assert d[((1, 2, 3),)] == pytest.approx(2 / 6, rel=1e-14)


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 8])
def test_exhaustive_matches_ewens(n, theta):
    d = exhaustive_partition_distribution(n, theta)
    assert abs(math.fsum(d.values()) - 1.0) <= 1e-12
    every = list(set_partitions(n))
    assert len(every) == len(d)
    for part in every:
        assert abs(d[part] - ewens_partition_pmf(part, theta)) <= 1e-12


def test_exhaustive_limits():
    with pytest.raises(ValueError):
        exhaustive_partition_distribution(11, 1.0)
    assert len(exhaustive_partition_distribution(10, 1.0)) == 115975


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_cycle_types_match_partitions(n, theta):
    d = exhaustive_partition_distribution(n, theta)
    by_type = {}
    for part, p in d.items():
        key = tuple(sorted(len(b) for b in part))
        by_type[key] = by_type.get(key, 0.0) + p
    perms = cycle_type_distribution(n, theta)
    assert set(by_type) == set(perms)
    for k in perms:
        assert abs(by_type[k] - perms[k]) <= 1e-12


def test_permutation_pmf_examples():
    for perm in itertools.permutations(range(3)):
        assert ewens_permutation_pmf(perm, 1.0) == pytest.approx(1 / 6)
    assert ewens_permutation_pmf((0, 1, 2, 3), 2.0) == pytest.approx(16 / 120)


# -- lattice sums ---------------------------------------------------------------------

LATTICE_CASES = [
    (ConeWindow(((0.5, 1.0),), (1.0, 2.0)), 1.0, 12),
    (ConeWindow(((0.2, 1.5),), (0.5, 2.0)), 1.0, 14),
    (ConeWindow(((0.0, 2.0),), (0.1, 1.3)), 1.0, 14),
    (ConeWindow(((0.3, 0.9),), (1.1, 2.3)), 2.5, 10),
    (ConeWindow(((0.0, 0.6), (0.2, 1.0)), (0.5, 1.5)), 0.7, 10),
]


@pytest.mark.parametrize("window,theta,n", LATTICE_CASES)
def test_lattice_sum_r1_matches_enumeration(window, theta, n):
    assert lattice_sum(window, theta, n, 1) == pytest.approx(lattice_sum_bruteforce(window, theta, n, 1), rel=1e-12)


@pytest.mark.parametrize("window,theta,n", [c for c in LATTICE_CASES if c[0].N == 1])
def test_lattice_sum_r2_matches_enumeration(window, theta, n):
    got = lattice_sum(window, theta, n, 2)
    assert math.isfinite(got)
    assert got == pytest.approx(lattice_sum_bruteforce(window, theta, n, 2), rel=1e-12)


def test_lattice_sum_needs_bounded_y():
    with pytest.raises(ValueError):
        lattice_sum(ConeWindow(((0.0, 1.0),), (1.0, math.inf)), 1.0, 10)
