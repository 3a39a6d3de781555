"""Verification suites: closed-form identities and cross-sampler statistics.

Every check returns a list of :class:`Case`.  ``analytic_suite`` is
deterministic apart from the random evaluation points it draws from the seed;
``distributional_suite`` is Monte Carlo and follows the multiple-testing
policy of :func:`qperp.stats.policy_verdict`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import qcalc
from .perpetuity import (
    PerpetuityLaw,
    levy_exponent,
    mellin,
    mellin_recurrence_residual,
    numeric_mellin,
    total_mass,
    wiener_hopf_factors,
)
from .qcalc import LIMIT_TOL, QParams, gamma_classical, q_gamma
from .qgamma import QGammaLaw, pmf_table, qgamma_mellin, qgamma_pmf, qgamma_sample_geomsum, qgamma_sample_invcdf
from .rng import RngState
from .samplers import draw_batch
from .scaling import dufresne_limit_study, psi_q, trajectory_identity_check, wald_moments
from .stats import KsResult, MomentCheck, empirical_mellin, ks_two_sample, policy_verdict

MELLIN_Q = (0.3, 0.5, 0.8, 0.95)
MELLIN_MU = (0.5, 1.0, 2.0, 5.0)
SAMPLER_PAIRS = tuple((q, mu) for q in (0.5, 0.8) for mu in (0.7, 1.5, 3.0))
QGAMMA_GRID = tuple((a, q) for a in (0.25, 0.5, 0.9) for q in (0.3, 0.5, 0.9))


def mellin_s_grid(mu: float) -> tuple[float, ...]:
    return (-3.0, -1.5, -0.5, 0.0, 0.3 * mu, 0.9 * mu)


def _num(v: Any) -> Any:
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class Case:
    name: str
    inputs: dict
    expected: Any
    observed: Any
    tolerance: Any
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "inputs": _num(self.inputs),
            "expected": _num(self.expected),
            "observed": _num(self.observed),
            "tolerance": _num(self.tolerance),
            "pass": bool(self.passed),
        }


@dataclass
class VerificationReport:
    suite_name: str
    seed: int
    cases: list[Case] = field(default_factory=list)
    timestamp: str = "unset"

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.cases)

    def to_json(self) -> str:
        doc = {
            "suite_name": self.suite_name,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "overall_pass": self.overall_pass,
            "n_cases": len(self.cases),
            "n_failed": sum(not c.passed for c in self.cases),
            "cases": [c.to_dict() for c in self.cases],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# -- analytic checks ---------------------------------------------------------


def check_mellin_forms() -> list[Case]:
    """Both closed forms of E[I^s] on the 4 x 4 x 6 grid, relative 1e-10."""
    cases = []
    for q in MELLIN_Q:
        for mu in MELLIN_MU:
            law = PerpetuityLaw.of(q, mu)
            for s in mellin_s_grid(mu):
                a = mellin(law, s, "pochhammer")
                b = mellin(law, s, "qgamma")
                err = _rel(b, a)
                cases.append(Case("mellin_forms", {"q": q, "mu": mu, "s": s}, a, b, 1e-10, err <= 1e-10))
    return cases


def recurrence_points(seed: int = 0) -> tuple[list[tuple], list[tuple]]:
    """50 real and 10 complex ``(q, mu, r)`` points for the Mellin recurrence."""
    real = [(q, mu, -s) for q in MELLIN_Q for mu in MELLIN_MU for s in mellin_s_grid(mu) if s < 0]
    real += [(0.5, 1.5, 0.7), (0.9, 0.5, 2.3)]
    gen = np.random.default_rng([seed, 31])
    cplx = []
    for _ in range(10):
        q = float(gen.choice(MELLIN_Q))
        mu = float(gen.choice(MELLIN_MU))
        r = complex(gen.uniform(0.1, 3.0), gen.uniform(-3.0, 3.0))
        cplx.append((q, mu, r))
    return real, cplx


def check_recurrence(seed: int = 0) -> list[Case]:
    real, cplx = recurrence_points(seed)
    cases = []
    for q, mu, r in real + cplx:
        res = mellin_recurrence_residual(PerpetuityLaw.of(q, mu), r)
        cases.append(Case("mellin_recurrence", {"q": q, "mu": mu, "r": r}, 0.0, res, 1e-9, res <= 1e-9))
    return cases


def check_wiener_hopf(seed: int = 0, count: int = 100) -> list[Case]:
    gen = np.random.default_rng([seed, 17])
    cases = []
    for _ in range(count):
        q = float(gen.uniform(0.05, 0.99))
        mu = float(gen.uniform(0.1, 5.0))
        s = complex(gen.uniform(-5, 5), gen.uniform(-10, 10))
        p = QParams(q, mu)
        psi = levy_exponent(p, s)
        plus, _ = wiener_hopf_factors(p, s)
        _, minus = wiener_hopf_factors(p, -s)
        gap = abs(psi + plus * minus)
        tol = 1e-14 * (1.0 + abs(psi))
        cases.append(Case("wiener_hopf", {"q": q, "mu": mu, "s": s}, 0.0, gap, tol, gap <= tol))
    return cases


def check_density_normalization() -> list[Case]:
    cases = []
    for q, mu in SAMPLER_PAIRS:
        mass, err = total_mass(PerpetuityLaw.of(q, mu))
        ok = abs(mass - 1.0) <= 1e-6 and err <= 1e-6
        cases.append(Case("density_normalization", {"q": q, "mu": mu}, 1.0, mass, 1e-6, ok))
    return cases


def check_numeric_mellin() -> list[Case]:
    cases = []
    for q, mu in SAMPLER_PAIRS:
        law = PerpetuityLaw.of(q, mu)
        for s in (-0.5, 0.3 * mu):
            num, _ = numeric_mellin(law, s)
            exact = mellin(law, s)
            ok = abs(num - exact) <= 1e-4
            cases.append(Case("numeric_mellin", {"q": q, "mu": mu, "s": s}, exact, num, 1e-4, ok))
    return cases


def first_moment_oracle(q: float, mu: float) -> float:
    # E I = (1+z)^-1 sum_n E q^(B_n), E q^(B_n) = ((q + z/q)/(1+z))^n
    return 1.0 / ((1.0 - q) * (1.0 - q ** (mu - 1.0)))


def check_first_moment_closed_form() -> list[Case]:
    cases = []
    for q in MELLIN_Q:
        for mu in (1.5, 2.0, 3.0, 5.0):
            exact = first_moment_oracle(q, mu)
            got = mellin(PerpetuityLaw.of(q, mu), 1.0)
            err = _rel(got, exact)
            cases.append(Case("first_moment_closed_form", {"q": q, "mu": mu}, exact, got, 1e-12, err <= 1e-12))
    return cases


def check_qgamma_pmf() -> list[Case]:
    cases = []
    for a, q in QGAMMA_GRID + ((0.0, 0.5),):
        pmf, tail = pmf_table(QGammaLaw(a, q))
        total = float(math.fsum(pmf))
        ok = abs(total - 1.0) <= 1e-12 and tail <= 1e-12
        cases.append(Case("qgamma_pmf_sum", {"a": a, "q": q}, 1.0, total, 1e-12, ok))
    # closed form with the q-Pochhammer primitives
    for a, q in ((0.5, 0.5), (0.25, 0.9)):
        law = QGammaLaw(a, q)
        norm, _ = qcalc.qpochhammer_inf(a, q)
        for n in range(6):
            expect = norm * a**n / qcalc.qpochhammer_finite(q, q, n)
            got = qgamma_pmf(law, n)
            err = _rel(got, expect)
            cases.append(Case("qgamma_pmf_closed_form", {"a": a, "q": q, "n": n}, expect, got, 1e-10, err <= 1e-10))
    for a, q in QGAMMA_GRID:
        law = QGammaLaw(a, q)
        for s in (0.5, 1.0, 2.0):
            x = qgamma_mellin(law, s)
            y = qgamma_mellin(law, s, "qgamma")
            cases.append(Case("qgamma_mellin_forms", {"a": a, "q": q, "s": s}, x, y, 1e-10, _rel(y, x) <= 1e-10))
    return cases


def check_q_calculus() -> list[Case]:
    cases = []
    q = 0.5
    for x in (-0.5, 0.3, 0.8):
        for z in (-0.6, 0.2, 0.7):
            num, en = qcalc.qpochhammer_inf(x * z, q)
            den, ed = qcalc.qpochhammer_inf(z, q)
            lhs = num / den
            partial = 0.0
            for n in range(200):
                term = qcalc.qpochhammer_finite(x, q, n) / qcalc.qpochhammer_finite(q, q, n) * z**n
                partial += term
                if abs(term) < 1e-18:
                    break
            # product truncation propagated through the ratio, plus rounding of the partial sum
            bound = en / abs(den) + abs(num) * ed / den**2 + 1e-14 * abs(lhs)
            err = abs(partial - lhs)
            cases.append(Case("q_binomial", {"x": x, "z": z, "q": q}, lhs, partial, bound, err <= bound))
    for qq in (0.3, 0.5, 0.9, 0.99):
        for x in np.linspace(0.25, 10.0, 14):
            lhs = q_gamma(x + 1.0, qq)
            rhs = (1.0 - qq**x) / (1.0 - qq) * q_gamma(x, qq)
            err = _rel(lhs, rhs)
            cases.append(Case("q_gamma_recurrence", {"x": float(x), "q": qq}, rhs, lhs, 1e-11, err <= 1e-11))
    for qq in (0.3, 0.8):
        u = 1.0 / (1.0 - qq)
        for x in (0.5, 1.0, 2.0, 3.7):
            # the Jackson nodes t = q^n/(1-q) need E_q(-q t) = (q^(n+1); q)_inf
            val, tail = qcalc.q_integral(
                lambda t, x=x: t ** (x - 1.0) * qcalc.q_exponential(-qq * t, qq).real,
                u,
                qq,
                f_bound=1.0,
                f_power=x - 1.0,
            )
            exact = q_gamma(x, qq)
            err = abs(val - exact)
            cases.append(Case("q_integral_gamma", {"x": x, "q": qq}, exact, val, 1e-10 + tail, err <= 1e-10 + tail))
    return cases


def approaches(gaps: list[float], scale: float = 1.0) -> bool:
    """Strictly decreasing gaps; gaps at rounding level count as exact zeros."""
    floor = 1e-13 * (1.0 + abs(scale))
    g = [0.0 if x <= floor else x for x in gaps]
    return all(b < a or b == 0.0 for a, b in zip(g, g[1:]))


def check_q_limits() -> list[Case]:
    """Gamma_q -> Gamma and psi_q -> s^2/2 + s mu, monotonically along q."""
    cases = []
    qs = (0.9, 0.99, 0.999, 0.9999)
    for x in (0.5, 1.5, 2.5, 4.0):
        gaps = [abs(q_gamma(x, q, LIMIT_TOL) - gamma_classical(x)) for q in qs]
        ok = approaches(gaps)
        cases.append(Case("q_gamma_to_gamma", {"x": x, "q_grid": list(qs)}, "decreasing", gaps, None, ok))
    for mu in (0.5, 1.0, 2.0):
        for s in (-2.0, -0.5, 0.5, 1.0, 3.0):
            target = 0.5 * s * s + s * mu
            gaps = [abs(psi_q(QParams(q, mu), s) - target) for q in qs]
            ok = approaches(gaps, target)
            cases.append(Case("psi_q_to_brownian", {"mu": mu, "s": s}, target, gaps, None, ok))
        for t in (0.5, 2.0):
            mgaps = [abs(wald_moments(QParams(q, mu), t)[0] - mu * t) for q in qs]
            vgaps = [abs(wald_moments(QParams(q, mu), t)[1] - t) for q in qs]
            ok = approaches(mgaps, mu * t) and approaches(vgaps, t)
            cases.append(Case("wald_to_brownian", {"mu": mu, "t": t}, [mu * t, t], [mgaps, vgaps], None, ok))
    for nu, mu in ((0.5, 1.0), (1.0, 2.0)):
        vals = [psi_q(QParams(q, mu), -2 * nu) for q in np.linspace(0.9, 0.9999, 25)]
        ok = all(v < 0 for v in vals)
        cases.append(Case("psi_q_negative", {"nu": nu, "mu": mu}, "< 0", max(vals), 0.0, ok))
    return cases


def check_trajectory_identity(seed: int = 0, seeds: int = 100) -> list[Case]:
    cases = []
    for q, mu in SAMPLER_PAIRS:
        worst = 0.0
        for k in range(seeds):
            worst = max(worst, trajectory_identity_check(QParams(q, mu), 10.0, RngState(seed, (9, k))))
        cases.append(Case("trajectory_identity", {"q": q, "mu": mu, "paths": seeds}, 0.0, worst, 1e-11, worst <= 1e-11))
    return cases


# -- distributional checks ---------------------------------------------------


def _policy_case(name: str, inputs: dict, run: Callable[[int], Any], expected: Any) -> Case:
    ok, results = policy_verdict(run)
    observed = [r.summary() for r in results]
    tol = [r.tolerance for r in results]
    return Case(name, inputs, expected, observed, tol, ok)


def check_first_moment_samplers(seed: int, n: int = 1_000_000) -> list[Case]:
    cases = []
    for q, mu in ((0.5, 2.0), (0.5, 3.0)):
        exact = first_moment_oracle(q, mu)
        for sid in ("path", "series", "factorization"):

            def run(k: int, sid=sid, q=q, mu=mu) -> MomentCheck:
                b = draw_batch(sid, QParams(q, mu), n, _sub(seed, 61, k))
                est, se = empirical_mellin(b.values, 1.0)
                return MomentCheck(est, se, exact)

            cases.append(_policy_case("sampler_mean", {"sampler": sid, "q": q, "mu": mu, "n": n}, run, exact))
    return cases


def _sub(seed: int, tag: int, k: int) -> int:
    # distinct deterministic 64-bit seeds per (check, attempt)
    return int(np.random.SeedSequence([seed, tag, k]).generate_state(2, np.uint32).view(np.uint64)[0])


def check_factorization_vs_path(seed: int, n: int = 100_000) -> list[Case]:
    cases = []
    for q, mu in SAMPLER_PAIRS:

        def run(k: int, q=q, mu=mu) -> KsResult:
            p = QParams(q, mu)
            a = draw_batch("factorization", p, n, _sub(seed, 71, k)).values
            b = draw_batch("path", p, n, _sub(seed, 72, k)).values
            return ks_two_sample(a, b)

        cases.append(_policy_case("ks_factorization_vs_path", {"q": q, "mu": mu, "n": n}, run, "same law"))
    return cases


def check_series_vs_others(seed: int, n: int = 100_000) -> list[Case]:
    cases = []
    for q, mu in SAMPLER_PAIRS:

        def run(k: int, q=q, mu=mu) -> KsResult:
            p = QParams(q, mu)
            a = draw_batch("series", p, n, _sub(seed, 73, k)).values
            b = draw_batch("factorization", p, n, _sub(seed, 74, k)).values
            return ks_two_sample(a, b)

        cases.append(_policy_case("ks_series_vs_factorization", {"q": q, "mu": mu, "n": n}, run, "same law"))
    return cases


def check_qgamma_samplers(seed: int, n: int = 100_000, n_mellin: int = 1_000_000) -> list[Case]:
    cases = []
    for a, q in QGAMMA_GRID:
        law = QGammaLaw(a, q)

        def run(k: int, law=law) -> KsResult:
            x = qgamma_sample_invcdf(law, RngState(_sub(seed, 81, k)), n)
            y = qgamma_sample_geomsum(law, RngState(_sub(seed, 82, k)), n)
            return ks_two_sample(x, y)

        cases.append(_policy_case("ks_qgamma_invcdf_vs_geomsum", {"a": a, "q": q, "n": n}, run, "same law"))
    for a, q in ((0.25, 0.5), (0.5, 0.9), (0.25, 0.3)):
        law = QGammaLaw(a, q)
        for method, sampler in (("invcdf", qgamma_sample_invcdf), ("geomsum", qgamma_sample_geomsum)):
            for s in (-0.5, 0.5, 1.0, 2.0):
                exact = qgamma_mellin(law, s)

                def run(k: int, law=law, s=s, exact=exact, sampler=sampler) -> MomentCheck:
                    x = sampler(law, RngState(_sub(seed, 83, k)), n_mellin)
                    est, se = empirical_mellin(x, s)
                    return MomentCheck(est, se, exact)

                cases.append(
                    _policy_case("qgamma_empirical_mellin", {"a": a, "q": q, "s": s, "method": method}, run, exact)
                )
    return cases


def dufresne_trend_ok(distances: list[float], n: int) -> bool:
    """Strictly decreasing, except one rise of at most ``2/sqrt(n)``."""
    rises = [b - a for a, b in zip(distances, distances[1:]) if b >= a]
    return len(rises) == 0 or (len(rises) == 1 and rises[0] <= 2.0 / math.sqrt(n))


@dataclass
class _TrendResult:
    distances: list[float]
    n: int

    @property
    def passed(self) -> bool:
        return dufresne_trend_ok(self.distances, self.n)

    @property
    def extreme(self) -> bool:
        return False

    @property
    def tolerance(self) -> float:
        return 2.0 / math.sqrt(self.n)

    def summary(self) -> list[float]:
        return self.distances


def check_dufresne_limit(seed: int, n: int = 100_000, q_grid=(0.9, 0.99, 0.999)) -> list[Case]:
    cases = []
    for mu in (1.5, 2.0):

        def run(k: int, mu=mu) -> _TrendResult:
            rows = dufresne_limit_study(mu, q_grid, n, RngState(_sub(seed, 91, k)))
            return _TrendResult([r.ks_distance for r in rows], n)

        cases.append(_policy_case("dufresne_ks_trend", {"mu": mu, "q_grid": list(q_grid), "n": n}, run, "decreasing"))
    return cases


ANALYTIC_CHECKS = (
    check_q_calculus,
    check_qgamma_pmf,
    check_mellin_forms,
    check_recurrence,
    check_wiener_hopf,
    check_first_moment_closed_form,
    check_density_normalization,
    check_numeric_mellin,
    check_q_limits,
    check_trajectory_identity,
)

DISTRIBUTIONAL_CHECKS = (
    check_factorization_vs_path,
    check_series_vs_others,
    check_qgamma_samplers,
    check_first_moment_samplers,
    check_dufresne_limit,
)


def run_suite(suite: str, seed: int = 0) -> VerificationReport:
    if suite not in ("analytic", "distributional", "all"):
        raise ValueError(f"unknown suite {suite!r}")
    report = VerificationReport(suite, seed)
    checks: list[Callable] = []
    if suite in ("analytic", "all"):
        checks += ANALYTIC_CHECKS
    if suite in ("distributional", "all"):
        checks += DISTRIBUTIONAL_CHECKS
    for check in checks:
        if check in (check_recurrence, check_wiener_hopf, check_trajectory_identity) or check in DISTRIBUTIONAL_CHECKS:
            report.cases.extend(check(seed))
        else:
            report.cases.extend(check())
    return report
