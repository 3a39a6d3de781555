"""Scalar q-calculus: q-Pochhammer symbols, q-gamma, q-exponential, Jackson integral.

Every infinite product is truncated with an explicit bound on what was
dropped.  For a factor list ``1 - a q^j`` with ``j >= J`` the tail satisfies

    |log prod_{j>=J} (1 - a q^j)| <= |a| q^J / ((1 - q) (1 - |a| q^J))

which is what ``qpochhammer_inf`` reports back (propagated through ``exp``).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

__all__ = [
    "CapExceededError",
    "DomainError",
    "QParams",
    "SeriesTolerance",
    "DEFAULT_TOL",
    "LIMIT_TOL",
    "tol_for",
    "qpochhammer_finite",
    "qpochhammer_inf",
    "log_qpochhammer_inf",
    "q_gamma",
    "log_q_gamma",
    "gamma_over_q_gamma",
    "q_exponential",
    "q_integral",
    "gamma_classical",
    "one_minus_qpow_over",
]


class DomainError(ValueError):
    """An argument lies outside the domain where the formula is defined."""


class CapExceededError(ArithmeticError):
    """A truncated series or product needed more than ``max_terms`` terms."""


@dataclass(frozen=True)
class QParams:
    """Model parameters ``0 < q < 1``, ``mu > 0``; ``z = q**mu`` is derived.

    ``mu = math.inf`` gives ``z = 0``, the pure up-jump walk.
    """

    q: float
    mu: float
    z: float = field(init=False)

    def __post_init__(self) -> None:
        q, mu = float(self.q), float(self.mu)
        if not 0.0 < q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {q!r}")
        # mu = inf is allowed and means z = 0 (no down-jumps)
        if not mu > 0.0:
            raise DomainError(f"mu must be positive, got {mu!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "z", q**mu)

    @property
    def log_q(self) -> float:
        return math.log(self.q)


@dataclass(frozen=True)
class SeriesTolerance:
    eps_abs: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self) -> None:
        if not self.eps_abs > 0:
            raise ValueError("eps_abs must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_TOL = SeriesTolerance()
# q close to 1 (limit studies): the products need many more factors.
LIMIT_TOL = SeriesTolerance(eps_abs=1e-12, max_terms=1_000_000)


def tol_for(q: float, eps_abs: float = 1e-12) -> SeriesTolerance:
    """Default tolerance, with ``max_terms`` raised when ``q`` is close to 1."""
    needed = math.log(eps_abs * (1.0 - q) / 4.0) / math.log(q)
    if needed < DEFAULT_TOL.max_terms:
        return SeriesTolerance(eps_abs, DEFAULT_TOL.max_terms)
    return SeriesTolerance(eps_abs, max(LIMIT_TOL.max_terms, int(2 * needed)))


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q!r}")


def qpochhammer_finite(a: complex, q: float, n: int) -> complex:
    """Return ``(a; q)_n = prod_{j=0}^{n-1} (1 - a q^j)`` (n factors)."""
    if n < 0:
        raise DomainError("n must be non-negative")
    out = 1.0
    qj = 1.0
    for _ in range(n):
        out *= 1.0 - a * qj
        qj *= q
    return out


def _tail_log_bound(abs_a: float, q: float, J: int) -> float:
    w = abs_a * q**J
    if w >= 1.0:
        return math.inf
    return w / ((1.0 - q) * (1.0 - w))


def log_qpochhammer_inf(
    a: float, q: float, tol: SeriesTolerance = DEFAULT_TOL
) -> tuple[float, float]:
    """``log (a; q)_inf`` for real ``a < 1`` with a bound on the dropped tail.

    All factors are positive here, so the product is summed as logs.  That
    keeps values like ``(q; q)_inf`` at ``q = 0.999`` (about ``e^-1645``)
    representable.
    """
    _check_q(q)
    a = float(a)
    if a >= 1.0:
        raise DomainError("log form needs a < 1 (all factors positive)")
    if a == 0.0:
        return 0.0, 0.0
    abs_a = abs(a)
    # smallest J with the tail bound below eps_abs
    target = tol.eps_abs
    ratio = target * (1.0 - q) / (abs_a * (1.0 + target * (1.0 - q)))
    J = 0 if ratio >= 1.0 else int(math.ceil(math.log(ratio) / math.log(q)))
    J = max(J, 1)
    if J > tol.max_terms:
        raise CapExceededError(
            f"(a;q)_inf with a={a}, q={q} needs {J} factors > max_terms={tol.max_terms}"
        )
    total = 0.0
    for start in range(0, J, 1 << 16):
        j = np.arange(start, min(J, start + (1 << 16)), dtype=float)
        total += float(np.sum(np.log1p(-a * q**j)))
    return total, _tail_log_bound(abs_a, q, J)


def qpochhammer_inf(
    a: complex, q: float, tol: SeriesTolerance = DEFAULT_TOL, *, relative: bool = False
) -> tuple[complex, float]:
    """``(a; q)_inf`` and an absolute bound on the truncation error.

    Real ``a < 1`` goes through :func:`log_qpochhammer_inf`; otherwise the
    factors are multiplied directly (complex ``a``, or real ``a >= 1`` where
    early factors can be zero or negative).  With ``relative=True`` the
    product is continued until the error is below ``eps_abs * |value|``,
    which matters for values far below 1.
    """
    _check_q(q)
    is_real = not isinstance(a, complex) or a.imag == 0.0
    if is_real:
        a = a.real if isinstance(a, complex) else float(a)
        if a < 1.0:
            logv, lerr = log_qpochhammer_inf(a, q, tol)
            if logv > 709.0:
                raise OverflowError(f"(a;q)_inf with a={a}, q={q} exceeds double range; use log_qpochhammer_inf")
            v = math.exp(logv)
            if v > 1.0 and v * math.expm1(lerr) > tol.eps_abs:
                # negative a: value exceeds 1, tighten the log target
                tight = SeriesTolerance(tol.eps_abs / (2.0 * v), tol.max_terms)
                logv, lerr = log_qpochhammer_inf(a, q, tight)
                v = math.exp(logv)
            return v, v * math.expm1(lerr)
    abs_a = abs(a)
    head = 1.0 + 0.0j if not is_real else 1.0
    qj = 1.0
    for J in range(tol.max_terms + 1):
        if head == 0:
            return head, 0.0
        L = _tail_log_bound(abs_a, q, J)
        if L < 1.0:
            err = abs(head) * math.expm1(L)
            if err <= tol.eps_abs * (abs(head) if relative else 1.0):
                return head, err
        if J == tol.max_terms:
            break
        head *= 1.0 - a * qj
        qj *= q
    raise CapExceededError(
        f"(a;q)_inf with a={a}, q={q} not converged within {tol.max_terms} factors"
    )


def log_q_gamma(x: float, q: float, tol: SeriesTolerance = DEFAULT_TOL) -> tuple[float, float]:
    """``log Gamma_q(x)`` for real ``x > 0`` and a bound on its absolute error."""
    _check_q(q)
    if not x > 0:
        raise DomainError(f"q-gamma is defined for x > 0 here, got {x!r}")
    lnum, enum = log_qpochhammer_inf(q, q, tol)
    lden, eden = log_qpochhammer_inf(q**x, q, tol)
    return (1.0 - x) * math.log1p(-q) + lnum - lden, enum + eden


def q_gamma(x: float, q: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    """``Gamma_q(x) = (1-q)^(1-x) (q;q)_inf / (q^x;q)_inf`` for ``x > 0``."""
    return math.exp(log_q_gamma(x, q, tol)[0])


def one_minus_qpow_over(w: complex, log_q: float) -> complex:
    """``(1 - q^w) / w``, continuous at ``w = 0`` where it equals ``-log q``."""
    t = w * log_q
    if abs(t) < 1e-4:
        return -log_q * (1.0 + t / 2.0 + t * t / 6.0 + t**3 / 24.0)
    if isinstance(w, complex):
        return -(cmath.exp(t) - 1.0) / w
    return -math.expm1(t) / w


def gamma_over_q_gamma(x: float, q: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    """``Gamma(x) / Gamma_q(x)`` for any real ``x``.

    Both functions have simple poles at ``0, -1, -2, ...`` and the ratio is
    finite there.  Arguments ``x <= 0`` are shifted up with the two
    recurrences ``Gamma(x+1) = x Gamma(x)`` and
    ``Gamma_q(x+1) = (1 - q^x)/(1 - q) Gamma_q(x)``.
    """
    _check_q(q)
    x = float(x)
    shift = 0 if x > 0 else int(math.floor(-x)) + 1
    log_q = math.log(q)
    factor = 1.0
    for j in range(shift):
        factor *= one_minus_qpow_over(x + j, log_q) / (1.0 - q)
    y = x + shift
    lg, _ = log_q_gamma(y, q, tol)
    return factor * special.gamma(y) * math.exp(-lg)


def q_exponential(t: complex, q: float, tol: SeriesTolerance = DEFAULT_TOL) -> complex:
    """``E_q(t) = (-t (1-q); q)_inf``, so that ``E_q(-t) = (t (1-q); q)_inf``."""
    value, _ = qpochhammer_inf(-t * (1.0 - q), q, tol)
    return value


def q_integral(
    f: Callable[[float], float],
    u: float,
    q: float,
    tol: SeriesTolerance = DEFAULT_TOL,
    *,
    f_bound: float = 1.0,
    f_power: float = 0.0,
) -> tuple[float, float]:
    """Jackson integral ``(1-q) sum_n q^n u f(q^n u)`` with a tail bound.

    The caller promises ``|f(t)| <= f_bound * t**f_power`` for small ``t``
    (``f_power > -1``); ``f_power = 0`` is a plain sup bound.  Returns the
    partial sum and the bound on the omitted terms.
    """
    _check_q(q)
    if not u > 0:
        raise DomainError("u must be positive")
    if not f_power > -1.0:
        raise DomainError("f_power must exceed -1 for the Jackson sum to converge")
    p1 = 1.0 + f_power
    total = 0.0
    for n in range(tol.max_terms):
        t = q**n * u
        total += (1.0 - q) * t * f(t)
        # sum over m > n of (1-q) q^m u * f_bound (q^m u)^f_power
        tail = (1.0 - q) * f_bound * u**p1 * q ** ((n + 1) * p1) / (1.0 - q**p1)
        if tail <= tol.eps_abs:
            return total, tail
    raise CapExceededError(f"Jackson sum not converged within {tol.max_terms} terms")


def gamma_classical(s: complex) -> complex:
    """Euler's gamma function; real in, real out.

    Backed by ``scipy.special.gamma`` (relative error well below 1e-12 on
    ``|Re s|, |Im s| <= 30``; see tests).
    """
    if isinstance(s, complex) and s.imag != 0.0:
        return complex(special.gamma(s))
    x = s.real if isinstance(s, complex) else float(s)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"gamma has a pole at {x!r}")
    return float(special.gamma(x))
