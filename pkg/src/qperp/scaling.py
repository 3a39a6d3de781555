"""Brownian rescaling of the walk and the q -> 1 limit.

``W_t = (-log q / 2) * zeta(2 t / (1-q)^2)``.  Because ``e^(-2 W_t)`` is just
``q^zeta`` at the rescaled time, ``(1-q)^2 I = 2 int_0^inf e^(-2 W_s) ds``
holds path by path.  As ``q -> 1`` the perpetuity rescaled by ``(1-q)^2``
approaches ``1 / gamma_mu`` in law.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .qcalc import DomainError, QParams
from .qgamma import inverse_gamma_reference
from .rng import RngState
from .samplers import SkeletonPath, exp_functional_of_path, sample_perpetuity_factorization, simulate_zeta
from .stats import KS_CRIT_1PCT, ks_one_sample

__all__ = [
    "RescaledPath",
    "psi_q",
    "wald_moments",
    "trajectory_identity_check",
    "LimitRow",
    "dufresne_limit_study",
    "limit_table_csv",
]


@dataclass(frozen=True)
class RescaledPath:
    base: SkeletonPath
    q: float

    @property
    def space_scale(self) -> float:
        return -math.log(self.q) / 2.0

    @property
    def time_scale(self) -> float:
        return 2.0 / (1.0 - self.q) ** 2

    @property
    def jump_times(self) -> np.ndarray:
        return self.base.jump_times / self.time_scale

    @property
    def values(self) -> np.ndarray:
        return self.space_scale * self.base.levels

    @property
    def horizon(self) -> float:
        return self.base.horizon / self.time_scale

    def value_at(self, t: float) -> float:
        return self.space_scale * self.base.level_at(t * self.time_scale)

    def exp_functional(self) -> float:
        """``2 int_0^horizon exp(-2 W_s) ds`` computed on the rescaled skeleton."""
        edges = np.concatenate([[0.0], self.jump_times, [self.horizon]])
        return float(2.0 * np.sum(np.exp(-2.0 * self.values) * np.diff(edges)))


def psi_q(params: QParams, s: complex) -> complex:
    """Exponent of ``W``: ``E exp(s W_t) = exp(t psi_q(s))``."""
    q, mu = params.q, params.mu
    return -2.0 * (1.0 - q ** (-s / 2.0)) * (1.0 - q ** (mu + s / 2.0)) / (1.0 - q) ** 2


def wald_moments(params: QParams, t: float) -> tuple[float, float]:
    """Mean and variance of ``W_t``; they tend to ``(mu t, t)`` as ``q -> 1``."""
    if not t > 0:
        raise DomainError("t must be positive")
    q, z = params.q, params.z
    log_q = math.log(q)
    mean = -(1.0 - z) * log_q * t / (1.0 - q) ** 2
    var = 0.5 * log_q**2 * (1.0 + z) * t / (1.0 - q) ** 2
    return mean, var


def trajectory_identity_check(
    params: QParams,
    horizon_rescaled: float,
    rng: RngState,
    path: SkeletonPath | None = None,
) -> float:
    """Relative gap between ``(1-q)^2 int q^zeta`` and ``2 int e^(-2W)`` on one path.

    A ``path`` in the original clock may be supplied; otherwise one is
    simulated on ``[0, horizon_rescaled * time_scale]``.
    """
    if not horizon_rescaled > 0:
        raise DomainError("horizon must be positive")
    q = params.q
    if path is None:
        path = simulate_zeta(params, horizon_rescaled * 2.0 / (1.0 - q) ** 2, rng)
    lhs = (1.0 - q) ** 2 * exp_functional_of_path(path, q)
    rhs = RescaledPath(path, q).exp_functional()
    return abs(lhs - rhs) / abs(lhs)


@dataclass(frozen=True)
class LimitRow:
    q: float
    n: int
    ks_distance: float
    ks_critical_1pct: float


def dufresne_limit_study(
    mu: float,
    q_grid,
    n: int,
    rng: RngState,
    *,
    rescaled_bias: float = 1e-8,
) -> list[LimitRow]:
    """KS distance between ``(1-q)^2 I`` and ``1/gamma_mu`` for each ``q`` of the grid.

    Draws come from the factorization sampler, with the series part truncated
    so that its rescaled mean error is at most ``rescaled_bias``.  Grid point
    ``i`` uses the sub-stream ``rng.child(i)``.
    """
    grid = [float(q) for q in q_grid]
    if not grid:
        raise DomainError("q_grid is empty")
    if any(not 0 < q < 1 for q in grid):
        raise DomainError("every q must lie in (0, 1)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("q_grid must be increasing")
    if n < 1:
        raise DomainError("n must be >= 1")
    ref = inverse_gamma_reference(mu)
    rows = []
    for i, q in enumerate(grid):
        params = QParams(q, mu)
        eps_series = rescaled_bias / (1.0 - q) ** 2
        x = sample_perpetuity_factorization(params, eps_series, rng.child(i), n)
        res = ks_one_sample((1.0 - q) ** 2 * x, ref.cdf)
        rows.append(LimitRow(q, n, res.statistic, KS_CRIT_1PCT / math.sqrt(n)))
    return rows


def limit_table_csv(rows: list[LimitRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "n", "ks_distance", "ks_critical_1pct"])
    for r in rows:
        w.writerow([repr(r.q), r.n, repr(r.ks_distance), repr(r.ks_critical_1pct)])
    return buf.getvalue()
