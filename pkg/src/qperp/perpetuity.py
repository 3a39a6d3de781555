"""Analytic law of the perpetuity ``I = int_0^inf q^(zeta_s) ds``.

``zeta`` jumps +1 at rate 1 and -1 at rate ``z = q^mu``.  The Mellin transform

    E[I^s] = Gamma(1+s) (q^(1+s); q)_inf / (q; q)_inf * (z; q)_inf / (z q^-s; q)_inf

is finite for ``Re(s) < mu``; the density and CDF are double series obtained
by expanding both Pochhammer ratios (Euler's formula and the q-binomial
theorem) and inverting term by term.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from .qcalc import (
    DEFAULT_TOL,
    CapExceededError,
    DomainError,
    QParams,
    SeriesTolerance,
    gamma_over_q_gamma,
    log_q_gamma,
    log_qpochhammer_inf,
    one_minus_qpow_over,
    qpochhammer_inf,
    tol_for,
)
from .stats import adaptive_quadrature

__all__ = [
    "PerpetuityLaw",
    "X_FLOOR",
    "levy_exponent",
    "wiener_hopf_factors",
    "mellin",
    "mellin_recurrence_residual",
    "density",
    "cdf",
    "total_mass",
    "numeric_mellin",
]

X_FLOOR = 1e-8
_MACH_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class PerpetuityLaw:
    params: QParams
    tol: SeriesTolerance = field(default=DEFAULT_TOL)

    @classmethod
    def of(cls, q: float, mu: float, tol: SeriesTolerance | None = None) -> "PerpetuityLaw":
        return cls(QParams(q, mu), tol if tol is not None else tol_for(q))

    @property
    def q(self) -> float:
        return self.params.q

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def z(self) -> float:
        return self.params.z

    def mellin(self, s, form: str = "pochhammer"):
        return mellin(self, s, form)

    def density(self, x):
        return density(self, x)

    def cdf(self, y):
        return cdf(self, y)

    @cached_property
    def _series(self) -> "_SeriesData":
        return _SeriesData.build(self)


def levy_exponent(params: QParams, s: complex) -> complex:
    """``psi(s) = (q^-s - 1) + z (q^s - 1)``, so ``E exp(-s log(q) zeta_t) = exp(t psi(s))``."""
    q, z = params.q, params.z
    return (q ** (-s) - 1.0) + z * (q**s - 1.0)


def wiener_hopf_factors(params: QParams, s: complex) -> tuple[complex, complex]:
    """Ladder exponents ``(phi_plus(s), phi_minus(s))`` with ``psi(s) = -phi_plus(s) phi_minus(-s)``."""
    q, z = params.q, params.z
    return q ** (-s) - 1.0, z * q ** (-s) - 1.0


def _gamma_times_qpoch(s: complex, q: float, tol: SeriesTolerance) -> complex:
    # Gamma(1+s) (q^(1+s); q)_inf.  Zeros of the product cancel the poles of
    # Gamma, so for Re(1+s) <= 0 both are shifted up by K together.
    x = 1.0 + s
    is_complex = isinstance(s, complex) and s.imag != 0.0
    K = 0 if x.real > 0 else int(math.floor(-x.real)) + 1
    log_q = math.log(q)
    factor = 1.0
    for i in range(1, K + 1):
        factor *= one_minus_qpow_over(s + i, log_q)
    y = x + K
    if is_complex:
        poch, _ = qpochhammer_inf(q**y, q, tol, relative=True)
        return factor * complex(special.gamma(y)) * poch
    y = float(y.real) if isinstance(y, complex) else float(y)
    lp, _ = log_qpochhammer_inf(q**y, q, tol)
    return factor * math.exp(special.gammaln(y) + lp)


def mellin(law: PerpetuityLaw, s: complex, form: str = "pochhammer") -> complex:
    """``E[I^s]`` for ``Re(s) < mu``.

    ``form="pochhammer"`` works for complex ``s``.  ``form="qgamma"`` evaluates
    ``(1-q)^-2s Gamma(1+s)/Gamma_q(1+s) * Gamma_q(mu-s)/Gamma_q(mu)`` and needs
    real ``s``.  Real input gives a float.
    """
    q, mu, z = law.q, law.mu, law.z
    is_complex = isinstance(s, complex) and s.imag != 0.0
    if not complex(s).real < mu:
        raise DomainError(f"Mellin transform is finite only for Re(s) < mu = {mu} (s={s!r})")
    tol = law.tol
    if form == "qgamma":
        if is_complex:
            raise DomainError("the q-gamma form needs real s (mu - s must be real)")
        s = float(complex(s).real)
        ratio = gamma_over_q_gamma(1.0 + s, q, tol)
        if math.isinf(mu):
            tail = s * math.log1p(-q)
        else:
            tail = log_q_gamma(mu - s, q, tol)[0] - log_q_gamma(mu, q, tol)[0]
        return math.exp(-2.0 * s * math.log1p(-q) + tail) * ratio
    if form != "pochhammer":
        raise ValueError(f"unknown form {form!r}")
    if not is_complex:
        s = float(complex(s).real)
    head = _gamma_times_qpoch(s, q, tol)
    log_norm = log_qpochhammer_inf(z, q, tol)[0] - log_qpochhammer_inf(q, q, tol)[0]
    if is_complex:
        den, _ = qpochhammer_inf(z * q ** (-s), q, tol, relative=True)
        return head * cmath.exp(log_norm) / den
    lden = log_qpochhammer_inf(z * q ** (-s), q, tol)[0]
    return head * math.exp(log_norm - lden)


def mellin_recurrence_residual(law: PerpetuityLaw, r: complex) -> float:
    """Relative defect of ``E[I^-r] = r / ((q^-r - 1)(1 - q^(mu+r))) E[I^-(r+1)]``."""
    if not complex(r).real > 0:
        raise DomainError("the recurrence is stated for Re(r) > 0")
    q, mu = law.q, law.mu
    lhs = mellin(law, -r)
    rhs = r / ((q ** (-r) - 1.0) * (1.0 - q ** (mu + r))) * mellin(law, -(r + 1))
    return abs(lhs - rhs) / abs(lhs)


@dataclass
class _SeriesData:
    """Coefficients shared by the density and CDF series."""

    q: float
    qz: float
    z: float
    log_c: float  # log (z;q)_inf / (q;q)_inf
    log_qq_inf: float
    inner: np.ndarray  # c_n = (-1)^n q^(n(n-1)/2) / (q;q)_n
    inner_tail: float  # sum_{n > N} |c_n| bound
    inner_abs: float  # sum_n |c_n|
    inner_abs_q: float  # sum_n |c_n| q^n
    qpow_neg: np.ndarray  # q^-n

    @classmethod
    def build(cls, law: PerpetuityLaw) -> "_SeriesData":
        q, z = law.q, law.z
        tol = law.tol
        log_qq_inf = log_qpochhammer_inf(q, q, tol)[0]
        log_c = log_qpochhammer_inf(z, q, tol)[0] - log_qq_inf
        coeffs = []
        log_qq_n = 0.0
        n = 0
        while True:
            if n > 0:
                log_qq_n += math.log1p(-(q**n))
            mag = math.exp(0.5 * n * (n - 1) * math.log(q) - log_qq_n)
            coeffs.append(-mag if n % 2 else mag)
            # |c_{k+1}| / |c_k| = q^k / (1 - q^(k+1)) <= q^n / (1 - q) for k >= n
            rho = q**n / (1.0 - q)
            if rho < 0.5:
                tail = mag * rho / (1.0 - rho)
                if tail < 1e-40:
                    break
            n += 1
        inner = np.array(coeffs)
        N = inner.size
        return cls(
            q=q,
            qz=q * z,
            z=z,
            log_c=log_c,
            log_qq_inf=log_qq_inf,
            inner=inner,
            inner_tail=tail,
            inner_abs=float(np.sum(np.abs(inner))) + tail,
            inner_abs_q=float(np.sum(np.abs(inner) * q ** np.arange(N))) + tail,
            qpow_neg=q ** (-np.arange(N, dtype=float)),
        )

    def outer_weights(self, base: float, count: int) -> np.ndarray:
        # base^m / (q;q)_m for m = 0..count-1
        m = np.arange(count, dtype=float)
        steps = np.log1p(-self.q ** np.maximum(m, 1.0))
        steps[0] = 0.0
        with np.errstate(divide="ignore"):
            log_base = math.log(base) if base > 0 else -math.inf
        return np.exp(m * log_base - np.cumsum(steps)) if base > 0 else (m == 0).astype(float)

    def terms_needed(self, base: float, bound_coeff: float, eps: float, cap: int) -> int:
        # smallest M with  C * bound_coeff * base^M / ((q;q)_inf (1 - base)) <= eps
        if base == 0.0:
            return 1
        log_lhs0 = self.log_c + math.log(bound_coeff) - self.log_qq_inf - math.log1p(-base)
        M = int(math.ceil((math.log(eps) - log_lhs0) / math.log(base)))
        M = max(M, 1)
        if M > cap:
            raise CapExceededError(f"series needs {M} outer terms > max_terms={cap}")
        return M

    def outer_tail(self, base: float, bound_coeff: float, M: int) -> float:
        if base == 0.0:
            return 0.0
        return math.exp(
            self.log_c + math.log(bound_coeff) + M * math.log(base) - self.log_qq_inf - math.log1p(-base)
        )


def _density_one(law: PerpetuityLaw, x: float, eps: float) -> tuple[float, float]:
    sd = law._series
    if x < X_FLOOR:
        # sup of the density over all x: sum of absolute values of all terms
        bound = math.exp(sd.log_c - log_qpochhammer_inf(sd.qz, sd.q, law.tol)[0]) * sd.inner_abs
        return 0.0, bound
    M = sd.terms_needed(sd.qz, sd.inner_abs, eps / 2.0, law.tol.max_terms)
    w = sd.outer_weights(sd.qz, M)
    y = x * sd.q ** np.arange(M, dtype=float)
    E = np.exp(-np.outer(y, sd.qpow_neg))  # exp(-x q^(m-n))
    terms = E * sd.inner
    g = terms.sum(axis=1)
    C = math.exp(sd.log_c)
    value = C * float(w @ g)
    absum = C * float(w @ np.abs(terms).sum(axis=1))
    inner_cut = C * sd.inner_tail * float(w.sum())
    err = sd.outer_tail(sd.qz, sd.inner_abs, M) + inner_cut + 4.0 * _MACH_EPS * sd.inner.size * absum
    return value, err


def density(law: PerpetuityLaw, x, eps: float | None = None):
    """Density of ``I`` at ``x`` and an error bound, ``(value, err_bound)``.

    Below ``X_FLOOR`` the alternating inner series cancels catastrophically;
    there the value 0 is returned together with a global bound on the density.
    Accepts scalars or arrays.
    """
    eps = law.tol.eps_abs if eps is None else eps
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise DomainError("density is evaluated for x >= 0")
    flat = xs.ravel()
    vals = np.empty(flat.size)
    errs = np.empty(flat.size)
    for i, xi in enumerate(flat):
        vals[i], errs[i] = _density_one(law, float(xi), eps)
    if xs.ndim == 0:
        return float(vals[0]), float(errs[0])
    return vals.reshape(xs.shape), errs.reshape(xs.shape)


def _survival_one(law: PerpetuityLaw, y: float, eps: float) -> tuple[float, float]:
    # P(I > y) = C sum_m z^m/(q;q)_m sum_n c_n q^n exp(-y q^(m-n))
    sd = law._series
    M = sd.terms_needed(sd.z, sd.inner_abs_q, eps / 2.0, law.tol.max_terms)
    w = sd.outer_weights(sd.z, M)
    qn = sd.q ** np.arange(sd.inner.size, dtype=float)
    yy = y * sd.q ** np.arange(M, dtype=float)
    terms = np.exp(-np.outer(yy, sd.qpow_neg)) * (sd.inner * qn)
    C = math.exp(sd.log_c)
    value = C * float(w @ terms.sum(axis=1))
    absum = C * float(w @ np.abs(terms).sum(axis=1))
    err = (
        sd.outer_tail(sd.z, sd.inner_abs_q, M)
        + C * sd.inner_tail * float(w.sum())
        + 4.0 * _MACH_EPS * sd.inner.size * absum
    )
    return value, err


def cdf(law: PerpetuityLaw, y, eps: float | None = None):
    """``P(I <= y)`` and an error bound, integrating the density series term by term."""
    eps = law.tol.eps_abs if eps is None else eps
    ys = np.asarray(y, dtype=float)
    if np.any(ys < 0):
        raise DomainError("cdf is evaluated for y >= 0")
    flat = ys.ravel()
    vals = np.empty(flat.size)
    errs = np.empty(flat.size)
    for i, yi in enumerate(flat):
        if yi == 0.0:
            vals[i], errs[i] = 0.0, 0.0
            continue
        sf, err = _survival_one(law, float(yi), eps)
        vals[i] = min(1.0, max(0.0, 1.0 - sf))
        errs[i] = err
    if ys.ndim == 0:
        return float(vals[0]), float(errs[0])
    return vals.reshape(ys.shape), errs.reshape(ys.shape)


def _moment_tails(law: PerpetuityLaw, s: float, x_lo: float, x_hi: float) -> float:
    # Markov: int_0^x_lo x^s f <= x_lo^(s+k) E[I^-k];  int_x_hi^inf x^s f <= x_hi^(s-nu) E[I^nu]
    k = max(1.0, math.ceil(1.0 - s))
    lower = x_lo ** (s + k) * mellin(law, -k)
    nu = s + 0.5 * (law.mu - s) if math.isfinite(law.mu) else s + 2.0
    upper = x_hi ** (s - nu) * mellin(law, nu)
    return float(lower + upper)


def numeric_mellin(
    law: PerpetuityLaw,
    s: float,
    eps: float = 1e-9,
    x_hi: float = 1e40,
) -> tuple[float, float]:
    """``int x^s density(x) dx`` by quadrature in ``log x``; returns (value, error bound).

    The error bound adds the quadrature estimate, the series truncation
    allowance and Markov bounds for the two ends cut off at ``X_FLOOR`` and
    ``x_hi``.
    """
    s = float(s)
    if not s < law.mu:
        raise DomainError("numeric Mellin needs s < mu")

    def integrand(u: float) -> float:
        x = math.exp(u)
        local = 1e-12 * x ** (-(s + 1.0)) / (1.0 + u * u)
        val, _ = _density_one(law, x, local)
        return x ** (s + 1.0) * val

    lo, hi = math.log(X_FLOOR), math.log(x_hi)
    pts = list(np.arange(math.ceil(lo), hi, 4.0))
    value, qerr = adaptive_quadrature(integrand, lo, hi, eps, points=pts)
    return value, qerr + math.pi * 1e-12 + _moment_tails(law, s, X_FLOOR, x_hi)


def total_mass(law: PerpetuityLaw, eps: float = 1e-9) -> tuple[float, float]:
    """``int density`` over ``(0, inf)`` with its error bound."""
    return numeric_mellin(law, 0.0, eps)
