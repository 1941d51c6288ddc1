import json
import math

import numpy as np
import pytest
from scipy import stats

from crplimits.intensity import ConeWindow
from crplimits.limits import T_cdf, sample_ST_closed_form
from crplimits.verify import (
    SUITES,
    GofReport,
    SuiteConfig,
    band_check,
    chi2_poisson,
    default_config,
    exact_check,
    ks_continuous,
    ks_two_sample,
    reports_to_json,
    reports_to_text,
    run_suite,
)

# Small but complete configurations, one per suite.
SMALL = {
    "theorem1": dict(reps=250, ns=(20000,)),
    "counts": dict(reps=250, ns=(20000,), options=dict(limit_reps=250)),
    "fpc": dict(reps=250, ns=(20000,), options=dict(identity_reps=3, identity_n=2000)),
    "minpoint": dict(reps=250, ns=(20000,)),
    "shortlived": dict(reps=200, ns=(20000,), options=dict(limit_samples=500)),
    "qprocess": dict(reps=250, ns=(20000,)),
    "lemma2": dict(ns=(100, 500, 2000)),
    "oracle": dict(options=dict(families=100)),
    "ewens": dict(ns=(3, 4), options=dict(mc_reps=20000)),
    "measures": dict(options=dict(windows=4)),
}


# -- primitive tests --------------------------------------------------------------

def test_chi2_poisson_null_passes():
    x = np.random.default_rng(0).poisson(1.0, 10000)
    r = chi2_poisson(x, 1.0)
    assert r.passed and r.kind == "gof" and r.n == 10000


def test_chi2_poisson_detects_wrong_mean():
    x = np.random.default_rng(1).poisson(2.0, 10000)
    r = chi2_poisson(x, 1.0)
    assert not r.passed
    assert r.p_value < 1e-6


def test_chi2_poisson_degenerate():
    r = chi2_poisson(np.zeros(500, dtype=int), 1e-9)
    assert r.passed
    assert chi2_poisson(np.zeros(500, dtype=int), 0.0).passed
    assert not chi2_poisson(np.r_[np.zeros(499, dtype=int), 1], 0.0).passed


def test_chi2_poisson_needs_samples():
    with pytest.raises(ValueError):
        chi2_poisson(np.zeros(199, dtype=int), 1.0)


def test_ks_examples():
    rng = np.random.default_rng(2)
    assert ks_continuous(rng.random(2000), lambda x: np.clip(x, 0, 1)).passed
    _, T = sample_ST_closed_form(0.5, 1.3, rng, 5000)
    assert ks_continuous(T, lambda t: T_cdf(t, 0.5, 1.3)).passed
    assert not ks_continuous(rng.exponential(size=2000), lambda x: np.clip(x, 0, 1)).passed
    with pytest.raises(ValueError):
        ks_continuous(rng.random(99), lambda x: x)
    assert ks_two_sample(rng.random(1000), rng.random(1200)).passed
    assert not ks_two_sample(rng.random(1000), rng.random(1000) + 0.3).passed


def test_band_and_exact_semantics():
    r = band_check("b", 1.0 + 3.9 * 0.1, 1.0, 0.1, 100)
    assert r.passed
    assert not band_check("b", 1.0 + 4.1 * 0.1, 1.0, 0.1, 100).passed
    assert band_check("z", 2.0, 2.0, 0.0, 5).passed
    assert not band_check("z", 2.0, 2.5, 0.0, 5).passed
    assert exact_check("e", True).passed and not exact_check("e", False).passed


def test_report_invariants():
    with pytest.raises(ValueError):
        GofReport("x", 0.0, 1.5, 1, True, 0.1)
    for r in (chi2_poisson(np.random.default_rng(3).poisson(0.7, 400), 0.7), band_check("b", 0.0, 1.0, 0.5, 10)):
        assert 0.0 <= r.p_value <= 1.0
        assert r.passed == (r.p_value >= r.threshold)
        json.dumps(r.to_dict())


@pytest.mark.parametrize("mean", [0.3, 1.0, 4.5])
def test_chi2_null_calibration(mean):
    # each test applied to its own null passes at least 99% of the time at p >= 1e-3
    passes = 0
    for rep in range(1000):
        x = np.random.default_rng([11, rep]).poisson(mean, 300)
        passes += chi2_poisson(x, mean).passed
    assert passes >= 990


def test_ks_null_calibration():
    passes = 0
    for rep in range(1000):
        _, T = sample_ST_closed_form(1.0, 1.0, np.random.default_rng([12, rep]), 200)
        passes += ks_continuous(T, lambda t: T_cdf(t, 1.0, 1.0)).passed
    assert passes >= 990


def test_band_null_calibration():
    passes = 0
    for rep in range(1000):
        x = np.random.default_rng([13, rep]).poisson(2.0, 200)
        passes += band_check("m", x.mean(), 2.0, math.sqrt(2.0 / 200), 200).passed
    assert passes >= 990


# -- configuration ----------------------------------------------------------------------

def test_seed_is_mandatory():
    with pytest.raises(ValueError):
        SuiteConfig("oracle", None)
    with pytest.raises(ValueError):
        SuiteConfig("oracle", -3)


def test_unknown_suite():
    with pytest.raises(ValueError):
        default_config("nope", 1)
    with pytest.raises(ValueError):
        run_suite(SuiteConfig("nope", 1))


def test_config_round_trip():
    c = default_config("theorem1", 5, reps=10)
    d = c.to_dict()
    again = SuiteConfig.from_dict(json.loads(json.dumps(d)))
    assert again.to_dict() == d
    assert again.windows == c.windows


def test_window_beyond_horizon_rejected():
    c = default_config("theorem1", 1, reps=5, ns=(1000,),
                       windows=(ConeWindow(((0.0, 1.0),), (1.0, 3.0), "far"),))
    with pytest.raises(ValueError, match="horizon"):
        run_suite(c)


def test_theorem1_default_windows_are_well_posed():
    c = default_config("theorem1", 1)
    assert len([w for w in c.windows if w.N == 1]) == 3
    assert len([w for w in c.windows if w.N == 2]) == 3
    assert all(w.y_bounds[1] <= c.horizon_factor for w in c.windows)


# -- suites at small scale ---------------------------------------------------------------

@pytest.mark.parametrize("suite", sorted(SUITES))
def test_small_suites_pass_and_are_deterministic(suite):
    cfg = default_config(suite, 2024, **SMALL[suite])
    first = run_suite(cfg)
    second = run_suite(default_config(suite, 2024, **SMALL[suite]))
    assert first, suite
    assert reports_to_json(first, cfg) == reports_to_json(second, cfg)
    failed = [r.line() for r in first if not r.passed]
    assert not failed, failed
    text = reports_to_text(first, cfg)
    assert text.startswith(f"suite {suite}")


def test_worker_count_does_not_change_reports():
    kw = dict(reps=200, ns=(5000,))
    one = run_suite(default_config("theorem1", 9, workers=1, **kw))
    two = run_suite(default_config("theorem1", 9, workers=2, **kw))
    assert [r.to_dict() for r in one] == [r.to_dict() for r in two]


def test_reports_json_shape():
    cfg = default_config("oracle", 1, options=dict(families=20))
    doc = json.loads(reports_to_json(run_suite(cfg), cfg))
    assert doc["passed"] is True
    assert doc["config"]["seed"] == 1
    assert {r["kind"] for r in doc["reports"]} == {"exact"}
