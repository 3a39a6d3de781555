import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qperp.qcalc import gamma_classical
from qperp.qgamma import inverse_gamma_reference
from qperp.rng import RngState
from qperp.stats import (
    KS_CRIT_1PCT,
    MomentCheck,
    QuadratureError,
    adaptive_quadrature,
    empirical_mellin,
    ks_one_sample,
    ks_two_sample,
    policy_verdict,
)


class Run:
    """Scripted sequence of check outcomes for policy tests."""

    def __init__(self, outcomes):
        self.outcomes = outcomes
        self.calls = []

    def __call__(self, k):
        self.calls.append(k)
        passed, extreme = self.outcomes[k]
        return type("R", (), {"passed": passed, "extreme": extreme})()


# -- KS ------------------------------------------------------------------------


def test_ks_one_sample_uniform_self_test():
    u = np.random.default_rng(1).random(100_000)
    res = ks_one_sample(u, lambda x: x)
    assert res.passed
    assert res.critical_1pct == pytest.approx(KS_CRIT_1PCT / math.sqrt(1e5))


def test_ks_one_sample_degenerate():
    res = ks_one_sample(np.full(20, 0.5), lambda x: x)
    assert res.statistic == 0.5
    assert not res.passed


def test_ks_one_sample_inverse_gamma():
    ref = inverse_gamma_reference(1.5)
    assert ks_one_sample(ref.sampler(RngState(3), 100_000), ref.cdf).passed


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 400), st.integers(0, 2**32))
def test_ks_one_sample_matches_scipy(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    ref = stats.kstest(x, stats.norm.cdf).statistic
    assert ks_one_sample(x, stats.norm.cdf).statistic == pytest.approx(ref, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 2**32))
def test_ks_two_sample_matches_scipy(n, m, seed):
    g = np.random.default_rng(seed)
    # rounding creates ties, which the merged sweep must handle
    a, b = np.round(g.normal(size=n), 1), np.round(g.normal(0.2, size=m), 1)
    res = ks_two_sample(a, b)
    assert res.statistic == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-14)
    assert ks_two_sample(b, a).statistic == res.statistic
    assert res.n_effective == pytest.approx(n * m / (n + m))


def test_ks_two_sample_identical():
    a = np.random.default_rng(2).random(1000)
    res = ks_two_sample(a, a)
    assert res.statistic == 0.0 and res.passed
    assert res.critical_1pct == pytest.approx(1.63 * math.sqrt(2000 / 1e6))


def test_ks_empty_input():
    with pytest.raises(ValueError):
        ks_one_sample([], lambda x: x)
    with pytest.raises(ValueError):
        ks_two_sample([1.0], [])


def test_ks_result_serializes():
    d = ks_one_sample(np.full(20, 0.5), lambda x: x).to_dict()
    assert set(d) == {"statistic", "n_effective", "critical_1pct", "pass"}


# -- multiple-testing policy ---------------------------------------------------


def test_policy_first_pass():
    run = Run([(True, False)])
    assert policy_verdict(run)[0] and run.calls == [0]


def test_policy_extreme_fails_at_once():
    run = Run([(False, True), (True, False)])
    assert not policy_verdict(run)[0] and run.calls == [0]


def test_policy_rerun_rescues_ordinary_failure():
    run = Run([(False, False), (False, False), (True, False)])
    ok, results = policy_verdict(run)
    assert ok and len(results) == 3


def test_policy_reproducible_failure():
    run = Run([(False, False)] * 3)
    ok, results = policy_verdict(run)
    assert not ok and run.calls == [0, 1, 2]


def test_moment_check_flags():
    assert MomentCheck(1.0, 0.1, 1.25).passed
    m = MomentCheck(1.0, 0.1, 1.31)
    assert not m.passed and not m.extreme
    assert MomentCheck(1.0, 0.1, 1.4).extreme
    assert MomentCheck(2.0, 0.0, 2.0).passed


# -- empirical Mellin ----------------------------------------------------------


@pytest.mark.parametrize("c", [0.3, 1.0, 7.25])
@pytest.mark.parametrize("s", [0, 1, 2])
def test_empirical_mellin_constant(c, s):
    assert empirical_mellin(np.full(1000, c), s) == (c**s, 0.0)


def test_empirical_mellin_standard_error():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    est, se = empirical_mellin(x, 1.0)
    assert est == 2.5
    assert se == pytest.approx(np.std(x, ddof=1) / 2)
    with pytest.raises(ValueError):
        empirical_mellin([], 1.0)


# -- quadrature ----------------------------------------------------------------


def test_quadrature_examples():
    v, err = adaptive_quadrature(lambda x: x, 0.0, 1.0, 1e-12)
    assert abs(v - 0.5) <= 1e-12 and err <= 1e-12
    v, err = adaptive_quadrature(lambda x: math.exp(-x), 0.0, 50.0, 1e-12, points=[1.0, 5.0, 20.0])
    assert abs(v - 1.0) <= 1e-12 + math.exp(-50)


@pytest.mark.parametrize("x", [1.0, 2.5, 5.0])
def test_quadrature_gamma_integral(x):
    v, _ = adaptive_quadrature(lambda t: t ** (x - 1) * math.exp(-t), 0.0, 50.0, 1e-10, points=[1.0, 10.0])
    assert v == pytest.approx(gamma_classical(x), abs=1e-8)


def test_quadrature_error():
    with pytest.raises(QuadratureError):
        adaptive_quadrature(lambda x: math.sin(1 / x) / x, 1e-9, 1.0, 1e-14, limit=5)
