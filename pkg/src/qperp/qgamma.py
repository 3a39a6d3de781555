"""The q-gamma distribution and the inverse-gamma reference law.

``R`` lives on the lattice ``x_n = q^n / (1 - q)``, ``n = 0, 1, ...`` with

    P(R = x_n) = (a; q)_inf a^n / (q; q)_n .

Two exact samplers are provided.  ``sample_invcdf`` walks the cumulative pmf;
``sample_geomsum`` builds ``R = (1-q)^-1 q^(sum_n G_{a q^n})`` from independent
geometric variables (``P(G_p = k) = (1 - p) p^k``).  They share nothing but
the law, so each one checks the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .qcalc import (
    DomainError,
    SeriesTolerance,
    log_q_gamma,
    log_qpochhammer_inf,
    qpochhammer_inf,
    tol_for,
)
from .rng import RngState

__all__ = [
    "QGammaLaw",
    "qgamma_pmf",
    "pmf_table",
    "qgamma_mellin",
    "sample_index_invcdf",
    "qgamma_sample_invcdf",
    "qgamma_sample_geomsum",
    "InverseGammaReference",
    "inverse_gamma_reference",
]


@dataclass(frozen=True)
class QGammaLaw:
    a: float
    q: float
    kappa: float = field(init=False)

    def __post_init__(self) -> None:
        a, q = float(self.a), float(self.q)
        if not 0.0 < q < 1.0:
            raise DomainError(f"q must lie in (0, 1), got {q!r}")
        if not 0.0 <= a < 1.0:
            raise DomainError(f"a must lie in [0, 1), got {a!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "kappa", math.log(a) / math.log(q) if a > 0 else math.inf)

    @classmethod
    def from_kappa(cls, kappa: float, q: float) -> "QGammaLaw":
        return cls(q**kappa, q)

    def support(self, n):
        return self.q ** np.asarray(n, dtype=float) / (1.0 - self.q)


def _log_norm(law: QGammaLaw) -> float:
    return log_qpochhammer_inf(law.a, law.q, tol_for(law.q, 1e-15))[0]


def qgamma_pmf(law: QGammaLaw, n: int) -> float:
    """``P(R = q^n / (1-q))``, computed in log space."""
    if n < 0:
        return 0.0
    if law.a == 0.0:
        return 1.0 if n == 0 else 0.0
    j = np.arange(1, n + 1, dtype=float)
    log_qq_n = float(np.sum(np.log1p(-law.q**j)))
    return math.exp(_log_norm(law) + n * math.log(law.a) - log_qq_n)


def pmf_table(law: QGammaLaw, eps: float = 1e-16) -> tuple[np.ndarray, float]:
    """pmf values for ``n = 0..N`` and a bound on the mass beyond ``N``.

    Consecutive terms have ratio ``a / (1 - q^(n+1))``; once that ratio is
    below one the remaining mass is dominated by a geometric series.
    """
    if law.a == 0.0:
        return np.array([1.0]), 0.0
    a, q = law.a, law.q
    log_c = _log_norm(law)
    log_a = math.log(a)
    chunks: list[np.ndarray] = []
    log_qq = 0.0
    start = 0
    size = 256
    while True:
        n = np.arange(start, start + size, dtype=float)
        steps = np.log1p(-q ** np.maximum(n, 1.0))
        steps[n == 0] = 0.0
        log_qq_n = log_qq + np.cumsum(steps)
        chunk = np.exp(log_c + n * log_a - log_qq_n)
        chunks.append(chunk)
        log_qq = float(log_qq_n[-1])
        N = start + size - 1
        ratio = a / (1.0 - q ** (N + 1))
        if ratio < 1.0:
            tail = float(chunk[-1]) * ratio / (1.0 - ratio)
            if tail <= eps:
                return np.concatenate(chunks), tail
        start += size
        size = min(2 * size, 1 << 16)
        if start > 50_000_000:
            raise DomainError("pmf table did not converge")


def _mellin_checks(law: QGammaLaw, s: complex) -> None:
    if law.a > 0 and law.a * law.q ** complex(s).real >= 1.0:
        raise DomainError(
            f"Mellin transform of the q-gamma law needs a q^Re(s) < 1 (s={s!r}, kappa={law.kappa})"
        )


def qgamma_mellin(law: QGammaLaw, s: complex, form: str = "pochhammer") -> complex:
    """``E[R^s]``.

    ``form="pochhammer"``: ``(1-q)^-s (a;q)_inf / (a q^s; q)_inf``;
    ``form="qgamma"``: ``Gamma_q(s + kappa) / Gamma_q(kappa)`` (real ``s``, ``a > 0``).
    """
    _mellin_checks(law, s)
    q, a = law.q, law.a
    tol = tol_for(q)
    is_complex = isinstance(s, complex) and s.imag != 0.0
    if form == "qgamma":
        if is_complex or a == 0.0:
            raise DomainError("the q-gamma form needs real s and a > 0")
        s = float(complex(s).real)
        return math.exp(log_q_gamma(s + law.kappa, q, tol)[0] - log_q_gamma(law.kappa, q, tol)[0])
    if form != "pochhammer":
        raise ValueError(f"unknown form {form!r}")
    if a == 0.0:
        return (1.0 - q) ** (-s)
    if not is_complex:
        s = float(complex(s).real)
        lnum, _ = log_qpochhammer_inf(a, q, tol)
        lden, _ = log_qpochhammer_inf(a * q**s, q, tol)
        return math.exp(-s * math.log1p(-q) + lnum - lden)
    num, _ = qpochhammer_inf(a, q, tol)
    den, _ = qpochhammer_inf(a * q**s, q, tol)
    return (1.0 - q) ** (-s) * num / den


class _CdfTable:
    """Cumulative pmf, extended on demand for uniforms beyond the table."""

    def __init__(self, law: QGammaLaw) -> None:
        self.law = law
        pmf, _ = pmf_table(law)
        self.cdf = np.cumsum(pmf)

    def extend(self, u_max: float) -> None:
        law = self.law
        log_c = _log_norm(law)
        n = len(self.cdf)
        j = np.arange(1, n, dtype=float)
        log_qq = float(np.sum(np.log1p(-law.q**j)))
        extra = []
        c = float(self.cdf[-1])
        while c < u_max and len(extra) < 1_000_000:
            log_qq += math.log1p(-law.q**n)
            p = math.exp(log_c + n * math.log(law.a) - log_qq)
            if p == 0.0:
                break
            c += p
            extra.append(c)
            n += 1
        if extra:
            self.cdf = np.concatenate([self.cdf, extra])

    def lookup(self, u: np.ndarray) -> np.ndarray:
        if u.size and u.max() >= self.cdf[-1]:
            self.extend(float(u.max()))
        idx = np.searchsorted(self.cdf, u, side="right")
        # leftover rounding mass: put it on the last tabulated point
        return np.minimum(idx, len(self.cdf) - 1)


def sample_index_invcdf(law: QGammaLaw, rng: RngState, size: int) -> np.ndarray:
    """Lattice indices ``n`` with ``P(n) = pmf(n)``, by inverse-CDF lookup."""
    if law.a == 0.0:
        return np.zeros(size, dtype=np.int64)
    table = _CdfTable(law)
    u = rng.generator.random(size)
    return table.lookup(u).astype(np.int64)


def qgamma_sample_invcdf(law: QGammaLaw, rng: RngState, size: int | None = None):
    """Draw ``R`` by inverse CDF; scalar when ``size`` is None."""
    n = sample_index_invcdf(law, rng, 1 if size is None else size)
    x = law.support(n)
    return float(x[0]) if size is None else x


def _stop_tables(a: float, q: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Z_n = (a q^n; q)_inf and 1 - Z_n, from suffix sums of log-factors.
    J = int(math.ceil(math.log(1e-250 / a) / math.log(q))) + 1
    p = a * q ** np.arange(J + 1, dtype=float)
    logs = np.log1p(-p)
    tail = -p[-1] / (1.0 - q)
    S = np.cumsum(logs[::-1])[::-1] + tail
    return p, np.exp(S), -np.expm1(S)


def qgamma_sample_geomsum(law: QGammaLaw, rng: RngState, size: int | None = None):
    """Draw ``R = (1-q)^-1 q^(sum_n G_{a q^n})`` with exact early stopping.

    Before index ``n`` (when nothing is pending) stop with probability
    ``Z_n = P(G_{aq^j} = 0 for all j >= n)``.  If we do not stop, the rest is
    conditioned on not being all zero, so ``G_{aq^n}`` is drawn from its law
    given that event: zero with probability
    ``(1 - p_n)(1 - Z_{n+1}) / (1 - Z_n)`` (and the condition carries over
    to ``n + 1``), otherwise ``1 + Geometric(p_n)`` (condition discharged).
    """
    m = 1 if size is None else int(size)
    q, a = law.q, law.a
    if a == 0.0:
        x = np.full(m, 1.0 / (1.0 - q))
        return float(x[0]) if size is None else x
    gen = rng.generator
    p, Z, one_minus_Z = _stop_tables(a, q)
    last = len(p) - 2
    keep_zero = (1.0 - p[:-1]) * one_minus_Z[1:] / one_minus_Z[:-1]

    total = np.zeros(m, dtype=np.int64)
    idx = np.arange(m)
    n = np.zeros(m, dtype=np.int64)
    pending = np.zeros(m, dtype=bool)
    while idx.size:
        nn = np.minimum(n, last)
        fresh = ~pending
        stop = np.zeros(idx.size, dtype=bool)
        if fresh.any():
            u = gen.random(int(fresh.sum()))
            stop[fresh] = u < Z[nn[fresh]]
        stop |= n > last
        go = ~stop
        nn_go = nn[go]
        u = gen.random(nn_go.size)
        zero = u < keep_zero[nn_go]
        g = np.zeros(nn_go.size, dtype=np.int64)
        nz = ~zero
        if nz.any():
            g[nz] = gen.geometric(1.0 - p[nn_go[nz]])
        total[idx[go]] += g
        pending_go = zero
        idx = idx[go]
        n = n[go] + 1
        pending = pending_go
    x = q ** total.astype(float) / (1.0 - q)
    return float(x[0]) if size is None else x


class InverseGammaReference(NamedTuple):
    density: Callable
    sampler: Callable
    cdf: Callable


def inverse_gamma_reference(mu: float) -> InverseGammaReference:
    """Law of ``1/gamma_mu``: density ``x^(-mu-1) e^(-1/x) / Gamma(mu)``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu!r}")
    log_g = special.gammaln(mu)

    def density(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-(mu + 1.0) * np.log(x) - 1.0 / x - log_g)
        out = np.where(x > 0, out, 0.0)
        return out if out.ndim else float(out)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 0, special.gammaincc(mu, 1.0 / np.maximum(x, 1e-300)), 0.0)
        return out if out.ndim else float(out)

    def sampler(rng: RngState, size: int | None = None):
        g = rng.generator.gamma(mu, size=size)
        return 1.0 / g

    return InverseGammaReference(density, sampler, cdf)
