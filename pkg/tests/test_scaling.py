import math

import numpy as np
import pytest

from qperp.qcalc import DomainError, QParams
from qperp.qgamma import inverse_gamma_reference
from qperp.rng import RngState
from qperp.samplers import SkeletonPath, exp_functional_of_path, simulate_zeta
from qperp.scaling import (
    LimitRow,
    RescaledPath,
    dufresne_limit_study,
    limit_table_csv,
    psi_q,
    trajectory_identity_check,
    wald_moments,
)
from qperp.stats import KS_CRIT_1PCT, ks_one_sample

Q_LIMIT = (0.9, 0.99, 0.999, 0.9999)
PAIRS = [(q, mu) for q in (0.5, 0.8) for mu in (0.7, 1.5, 3.0)]


def test_psi_q_examples():
    p = QParams(0.7, 1.3)
    assert psi_q(p, 0.0) == 0.0
    assert abs(psi_q(p, -2 * 1.3)) < 1e-14
    assert abs(psi_q(QParams(0.999, 1.0), 1.0) - 1.5) < 5e-3


def test_psi_q_is_exponent_of_rescaled_walk():
    # E exp(s W_t) = exp(t psi_q(s)) with W_t = -(log q)/2 * zeta(2t/(1-q)^2)
    q, mu, s, t = 0.8, 1.0, 0.7, 0.05
    p = QParams(q, mu)
    from qperp.perpetuity import levy_exponent

    # zeta exponent: E q^(-u zeta_r) = exp(r psi(u)), so s W_t = (s/2)(-log q) zeta
    lhs = t * 2 / (1 - q) ** 2 * levy_exponent(p, s / 2)
    assert psi_q(p, s) * t == pytest.approx(lhs, rel=1e-13)


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("s", [-1.5, -0.5, 0.5, 1.0, 3.0])
def test_psi_q_approaches_brownian_exponent(mu, s):
    target = 0.5 * s * s + s * mu
    gaps = [abs(psi_q(QParams(q, mu), s) - target) for q in Q_LIMIT]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("nu, mu", [(0.5, 1.0), (1.0, 2.0)])
def test_psi_q_negative_on_moment_range(nu, mu):
    for q in np.linspace(0.9, 0.99999, 40):
        assert psi_q(QParams(float(q), mu), -2 * nu) < 0
    assert psi_q(QParams(0.99999, mu), -2 * nu) == pytest.approx(2 * nu * (nu - mu), rel=1e-3)


def test_wald_moments_examples():
    m, v = wald_moments(QParams(0.999, 2.0), 1.0)
    assert abs(m - 2) < 1e-2 and abs(v - 1) < 1e-2
    m, _ = wald_moments(QParams(0.5, 50.0), 1.0)
    assert m == pytest.approx(-math.log(0.5) / 0.25, rel=1e-12)
    with pytest.raises(DomainError):
        wald_moments(QParams(0.5, 1.0), 0.0)


@pytest.mark.parametrize("mu", [0.5, 2.0])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_wald_moments_converge_monotonically(mu, t):
    ms, vs = zip(*(wald_moments(QParams(q, mu), t) for q in Q_LIMIT))
    mg = [abs(m - mu * t) for m in ms]
    vg = [abs(v - t) for v in vs]
    assert all(b < a for a, b in zip(mg, mg[1:]))
    assert all(b < a for a, b in zip(vg, vg[1:]))


def test_wald_moments_vs_simulation():
    p = QParams(0.9, 1.0)
    t = 5.0
    time_scale = 2 / (1 - p.q) ** 2
    W = np.array([
        RescaledPath(simulate_zeta(p, t * time_scale, RngState(4, k)), p.q).value_at(t) for k in range(10_000)
    ])
    m, v = wald_moments(p, t)
    assert abs(W.mean() - m) <= 3 * W.std(ddof=1) / 100
    assert abs(W.var(ddof=1) - v) <= 3 * v * math.sqrt(2 / 1e4)


def test_rescaled_path_scales():
    base = SkeletonPath(np.array([1.0, 3.0]), np.array([0, 1, 2]), 4.0)
    r = RescaledPath(base, 0.5)
    assert r.space_scale == pytest.approx(math.log(2) / 2)
    assert r.time_scale == 8.0
    np.testing.assert_allclose(r.jump_times, [0.125, 0.375])
    assert r.horizon == 0.5
    assert r.value_at(0.2) == pytest.approx(r.space_scale)


def test_trajectory_identity_hand_built_path():
    # z = 0 path with three segments
    q = 0.5
    base = SkeletonPath(np.array([1.0, 3.0]), np.array([0, 1, 2]), 4.0)
    lhs = (1 - q) ** 2 * exp_functional_of_path(base, q)
    assert lhs == (1 - q) ** 2 * (1 + 2 * 0.5 + 0.25)
    assert RescaledPath(base, q).exp_functional() == pytest.approx(lhs, rel=1e-15)
    assert trajectory_identity_check(QParams(q, math.inf), 0.5, RngState(0), path=base) < 1e-15


def test_trajectory_identity_example():
    assert trajectory_identity_check(QParams(0.5, 1.0), 10.0, RngState(17)) < 1e-12


@pytest.mark.parametrize("q, mu", PAIRS)
def test_trajectory_identity_many_seeds(q, mu):
    gaps = [trajectory_identity_check(QParams(q, mu), 10.0, RngState(k)) for k in range(100)]
    assert max(gaps) < 1e-11


def test_trajectory_identity_rejects_bad_horizon():
    with pytest.raises(DomainError):
        trajectory_identity_check(QParams(0.5, 1.0), -1.0, RngState(0))


def test_ks_machinery_self_test():
    ref = inverse_gamma_reference(2.0)
    x = ref.sampler(RngState(5), 100_000)
    assert ks_one_sample(x, ref.cdf).statistic < KS_CRIT_1PCT / math.sqrt(1e5)


def test_limit_study_regression_bound():
    # threshold frozen from a calibration run (20 seeds: max distance 0.0055)
    rows = dufresne_limit_study(2.0, [0.999], 100_000, RngState(2026))
    assert rows[0].ks_distance < 0.02
    assert rows[0].ks_critical_1pct == pytest.approx(1.63 / math.sqrt(1e5))


def test_limit_study_validation():
    with pytest.raises(DomainError):
        dufresne_limit_study(2.0, [], 100, RngState(0))
    with pytest.raises(DomainError):
        dufresne_limit_study(2.0, [0.9, 1.0], 100, RngState(0))
    with pytest.raises(DomainError):
        dufresne_limit_study(2.0, [0.99, 0.9], 100, RngState(0))
    with pytest.raises(DomainError):
        dufresne_limit_study(2.0, [0.9], 0, RngState(0))


def test_limit_study_is_reproducible():
    a = dufresne_limit_study(1.5, [0.9, 0.99], 10_000, RngState(3))
    b = dufresne_limit_study(1.5, [0.9, 0.99], 10_000, RngState(3))
    assert a == b


def test_limit_table_csv():
    text = limit_table_csv([LimitRow(0.9, 10, 0.25, 0.5)])
    assert text == "q,n,ks_distance,ks_critical_1pct\n0.9,10,0.25,0.5\n"
