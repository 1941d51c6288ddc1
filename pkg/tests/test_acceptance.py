"""Acceptance gate: twelve criteria at their stated scales and tolerances.

Every test prints one ``ACCEPTANCE <id> PASS|FAIL`` line.  The file can also
be run directly (``python tests/test_acceptance.py``) to print the lines
without pytest.
"""

from fractions import Fraction
import math
import time

import pytest

from crplimits.intensity import ConeWindow, consistency_check
from crplimits.oracle import TupleFamily, joint_probability, stepwise_probability
from crplimits.verify import default_config, reports_to_json, run_suite


pytestmark = pytest.mark.slow

SEEDS = {
    "oracle": 3,
    "ewens": 5,
    "theorem1": 11,
    "counts": 13,
    "fpc": 17,
    "minpoint": 19,
    "shortlived": 23,
    "qprocess": 29,
    "measures": 31,
    "lemma2": 37,
}


_FIRST_RUN = {}


def _config(suite):
    return default_config(suite, SEEDS[suite])


def _run(suite):
    """Run a suite once at acceptance scale; later calls reuse the result."""
    if suite not in _FIRST_RUN:
        cfg = _config(suite)
        t0 = time.perf_counter()
        reports = run_suite(cfg)
        _FIRST_RUN[suite] = (reports, reports_to_json(reports, cfg), time.perf_counter() - t0)
    return _FIRST_RUN[suite]


def _emit(capsys, cid, ok, text):
    line = f"ACCEPTANCE {cid:>2} {'PASS' if ok else 'FAIL'}  {text}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def _failed(reports):
    return [r.line() for r in reports if not r.passed]


def _find(reports, prefix):
    found = [r for r in reports if r.test.startswith(prefix)]
    assert found, f"no report named {prefix}"
    return found


def test_01_oracle_duality(capsys):
    reports, _, secs = _run("oracle")
    dual = _find(reports, "oracle/duality")[0]
    ok = dual.passed and dual.n == 1000 and dual.statistic <= 1e-10 and secs < 10 and not _failed(reports)
    _emit(capsys, 1, ok, f"closed form vs stepwise on 1000 families: max rel err {dual.statistic:.2e} "
                         f"(<= 1e-10), {secs:.1f} s (< 10 s)")
    assert ok, _failed(reports)


def test_02_worked_example(capsys):
    fam = TupleFamily(((3, 7, 11, 19), (6, 12, 21, 24)), 1.0)
    a = joint_probability(fam).value
    b = stepwise_probability(fam).value
    exact = Fraction(36, 57120 * 255024)
    rel = float(abs(Fraction(a) - exact) / exact)
    ok = a == b and rel <= 1e-15
    _emit(capsys, 2, ok, f"both routes give {a!r}; routes identical: {a == b}; "
                         f"relative distance to 36/(57120*255024) {rel:.1e} (float rounding)")
    assert ok


def test_03_ewens_exactness(capsys):
    reports, _, secs = _run("ewens")
    mc = _find(reports, "ewens/monte-carlo")
    worst = max(r.statistic for r in mc)
    ok = not _failed(reports) and secs < 60
    _emit(capsys, 3, ok, f"n<=5, theta in {{0.5,1,2}}: normalisation and pmf within 1e-12; "
                         f"1e6-replicate frequencies max |z| {worst:.2f} (<= 4); {secs:.1f} s (< 60 s)")
    assert ok, _failed(reports)


def test_04_atom_poisson_limit(capsys):
    reports, _, secs = _run("theorem1")
    gof = _find(reports, "theorem1/poisson")
    worst = min(r.p_value for r in gof)
    ok = not _failed(reports) and len(gof) == 6 and secs < 300
    _emit(capsys, 4, ok, f"n=1e5, 2000 reps, 3 windows for N=1 and N=2: min chi2 p {worst:.3g} (>= 1e-3), "
                         f"void checks within 4 SE; {secs:.0f} s (< 300 s)")
    assert ok, _failed(reports)


def test_05_block_counts(capsys):
    reports, _, secs = _run("counts")
    means = _find(reports, "counts/mean")
    cov = _find(reports, "counts/cov/C1@n,C1@alpha_n")[0]
    ok = all(r.passed for r in means) and cov.passed and secs < 600
    rest = _failed(reports)
    _emit(capsys, 5, ok, f"N=3, alpha=2, 5000 reps: {sum(r.passed for r in means)}/{len(means)} means within 4 SE; "
                         f"Cov(C1(n),C1(2n)) {cov.metadata['estimate']:.4f} vs 0.5 (z={cov.statistic:.2f}); "
                         f"other checks failing: {len(rest)}; {secs:.0f} s (< 600 s)")
    assert ok and not rest, rest


def test_06_singleton_count_path(capsys):
    reports, _, _ = _run("fpc")
    pgf = _find(reports, "fpc/pgf/z=[0.5, 0.5]")[0]
    marg = _find(reports, "fpc/marginal")
    target = math.exp(-0.875)
    ok = pgf.passed and abs(pgf.metadata["target"] - target) < 1e-15 and all(r.passed for r in marg)
    rest = _failed(reports)
    _emit(capsys, 6, ok, f"pgf at z=(0.5,0.5): {pgf.metadata['estimate']:.4f} vs e^-0.875={target:.4f} "
                         f"(z={pgf.statistic:.2f}); X1 marginals at t=0.5,1,2,8 min p "
                         f"{min(r.p_value for r in marg):.3g}; other checks failing: {len(rest)}")
    assert ok and not rest, rest


def test_07_first_singleton(capsys):
    reports, _, _ = _run("minpoint")
    r = _find(reports, "minpoint/survival/prelimit/t=[1.0],x=[0.5]")[0]
    ok = r.passed and abs(r.metadata["target"] - math.exp(-0.5)) < 1e-15
    rest = _failed(reports)
    _emit(capsys, 7, ok, f"P{{M_n/n > 0.5}} at n=1e5: {r.metadata['estimate']:.4f} vs e^-0.5="
                         f"{math.exp(-0.5):.4f} (z={r.statistic:.2f}); other checks failing: {len(rest)}")
    assert ok and not rest, rest


def test_08_short_lived_singleton(capsys):
    reports, _, _ = _run("shortlived")
    ks = _find(reports, "shortlived/T-vs-pareto")[0]
    cens = _find(reports, "shortlived/censoring")[0]
    ok = ks.passed and cens.passed and ks.n + cens.metadata["censored"] == 2000
    rest = _failed(reports)
    _emit(capsys, 8, ok, f"KS of T/n vs Pareto at delta=0.5, n=1e5: p {ks.p_value:.3g} (>= 1e-3); "
                         f"censored {cens.statistic:.2%} (< 1%); other checks failing: {len(rest)}")
    assert ok and not rest, rest


def test_09_record_lifetimes(capsys):
    reports, _, _ = _run("qprocess")
    inc = _find(reports, "qprocess/increment/prelimit")
    first = inc[0]
    ok = all(r.passed for r in inc) and first.metadata["interval"][0] == 0.0 \
        and abs(first.metadata["interval"][1] - (math.e - 1)) < 1e-12 and abs(first.metadata["mean"] - 1) < 1e-12
    rest = _failed(reports)
    _emit(capsys, 9, ok, f"increment chi2 suite: {sum(r.passed for r in inc)}/{len(inc)} pass; "
                         f"(0, e-1] vs Pois(1) p {first.p_value:.3g}; other checks failing: {len(rest)}")
    assert ok and not rest, rest


def test_10_measure_identities(capsys):
    reports, _, _ = _run("measures")
    # the lifting example: both sides equal theta/2 for (0,1] x (1,2]
    base, lifted, diff = consistency_check(ConeWindow(((0.0, 1.0),), (1.0, 2.0)), 2, 1.0)
    worst = max(r.statistic for r in reports if r.kind == "exact" and "negbin" not in r.test)
    ok = not _failed(reports) and abs(diff) <= 1e-8 and abs(base - 0.5) <= 1e-15
    _emit(capsys, 10, ok, f"scale invariance and lifting on 20 random windows, row identity for i<=5, N<=8, "
                          f"alpha in {{1.5,2,4}}: worst error {worst:.1e}")
    assert ok, _failed(reports)


def test_11_lattice_sum_convergence(capsys):
    reports, _, _ = _run("lemma2")
    final = _find(reports, "lemma2/final-gap")
    gaps = {(r.metadata["r"], r.metadata["theta"]): r.statistic for r in final}
    ok = not _failed(reports)
    summary = ", ".join(f"r={k[0]} theta={k[1]}: {v:.2%}" for k, v in sorted(gaps.items()))
    _emit(capsys, 11, ok, f"lattice sums at n=2000 vs mass^r ({summary}; all <= 2%), |gap| non-increasing in n")
    assert ok, _failed(reports)


def test_12_determinism(capsys):
    same = []
    for suite in SEEDS:
        _, first_json, _ = _run(suite)
        cfg = _config(suite)
        again = reports_to_json(run_suite(cfg), cfg)
        same.append((suite, again == first_json))
    ok = all(v for _, v in same)
    bad = [s for s, v in same if not v]
    _emit(capsys, 12, ok, f"all {len(same)} suites rerun at acceptance scale: byte-identical reports"
          + (f" except {bad}" if bad else ""))
    assert ok


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn(None)
            except AssertionError:
                failures += 1
    raise SystemExit(1 if failures else 0)
