"""Three independent ways to draw the perpetuity ``I``.

* ``path``: simulate the continuous-time walk ``zeta`` up to a horizon ``T``
  and integrate ``q^zeta`` exactly over the skeleton.
* ``series``: the embedded jump chain, ``I = (1+z)^-1 sum_n q^(B_n) eps_n``,
  run until the walk first reaches a level ``L``.
* ``factorization``: ``I = (1-q)^-1 I0 / R`` with ``I0 = sum_n q^n eps_n`` and
  ``R`` an independent q-gamma variable with parameter ``z``.

Each sampler drops a remainder; the size of what is dropped is controlled by a
Markov bound on a moment ``E[I^nu]``, ``nu = mu/2``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .perpetuity import PerpetuityLaw, levy_exponent, mellin
from .qcalc import DomainError, QParams, tol_for
from .qgamma import QGammaLaw, qgamma_sample_geomsum, sample_index_invcdf
from .rng import RngState

__all__ = [
    "SkeletonPath",
    "SampleBatch",
    "SAMPLER_IDS",
    "simulate_zeta",
    "exp_functional_of_path",
    "moment_order",
    "path_horizon",
    "series_level",
    "sample_perpetuity_path",
    "sample_perpetuity_series",
    "sample_perpetuity_factorization",
    "draw_batch",
]

SAMPLER_IDS = ("path", "series", "factorization", "qgamma")
CHUNK = 1 << 16
DEFAULT_EPS_TAIL = 1e-4
DEFAULT_REL_DELTA = 1e-4
DEFAULT_EPS_SERIES = 1e-12


@dataclass(frozen=True)
class SkeletonPath:
    """Piecewise-constant path: ``levels[i]`` holds on ``[t_i, t_{i+1})``.

    ``t_0 = 0`` and ``t_i = jump_times[i-1]``; the last level runs to ``horizon``.
    """

    jump_times: np.ndarray
    levels: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        jt = np.asarray(self.jump_times, dtype=float)
        lv = np.asarray(self.levels, dtype=np.int64)
        if lv.size != jt.size + 1:
            raise ValueError("need exactly one more level than jump times")
        if lv.size and lv[0] != 0:
            raise ValueError("paths start at level 0")
        if np.any(np.abs(np.diff(lv)) != 1):
            raise ValueError("levels must move by +-1 at each jump")
        if jt.size and (np.any(np.diff(jt) <= 0) or jt[0] <= 0 or jt[-1] > self.horizon):
            raise ValueError("jump times must be strictly increasing inside (0, horizon]")
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "levels", lv)

    @property
    def segment_lengths(self) -> np.ndarray:
        edges = np.concatenate([[0.0], self.jump_times, [self.horizon]])
        return np.diff(edges)

    def level_at(self, t: float) -> int:
        return int(self.levels[np.searchsorted(self.jump_times, t, side="right")])


def simulate_zeta(params: QParams, horizon: float, rng: RngState) -> SkeletonPath:
    """One path of ``zeta`` on ``[0, horizon]``: Exp(1+z) holding times, up-jump w.p. 1/(1+z)."""
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    gen = rng.generator
    rate = 1.0 + params.z
    p_up = 1.0 / rate
    times: list[np.ndarray] = []
    t = 0.0
    block = max(16, int(rate * horizon * 1.1) + 16)
    while t <= horizon:
        gaps = gen.exponential(1.0 / rate, size=block)
        cum = t + np.cumsum(gaps)
        times.append(cum)
        t = float(cum[-1])
    jt = np.concatenate(times)
    jt = jt[jt <= horizon]
    steps = np.where(gen.random(jt.size) < p_up, 1, -1)
    levels = np.concatenate([[0], np.cumsum(steps)])
    return SkeletonPath(jt, levels, float(horizon))


def exp_functional_of_path(path: SkeletonPath, q: float) -> float:
    """``int_0^horizon q^(zeta_s) ds``, exact for the skeleton."""
    return float(np.sum(q ** path.levels.astype(float) * path.segment_lengths))


def moment_order(params: QParams) -> float:
    """Moment used in Markov tail bounds: ``mu/2`` (1 when ``z = 0``)."""
    return params.mu / 2.0 if math.isfinite(params.mu) else 1.0


def _scale(law: PerpetuityLaw, nu: float) -> float:
    return float(mellin(law, nu)) ** (1.0 / nu)


def path_horizon(params: QParams, delta: float, eps_tail: float) -> float:
    """Smallest ``T`` with ``delta^-nu exp(T psi(-nu)) E[I^nu] <= eps_tail``.

    ``I - I_T = q^(zeta_T) I'`` with ``I'`` an independent copy, and
    ``E q^(nu zeta_T) = exp(T psi(-nu))``, so this bounds
    ``P(I - I_T >= delta)`` by ``eps_tail``.
    """
    if not (delta > 0 and 0 < eps_tail < 1):
        raise DomainError("need delta > 0 and eps_tail in (0, 1)")
    nu = moment_order(params)
    rate = float(levy_exponent(params, -nu).real)
    if not rate < 0:
        raise DomainError("non-negative decay rate: the horizon is unreachable")
    law = PerpetuityLaw(params, tol_for(params.q))
    log_target = math.log(eps_tail) + nu * math.log(delta) - math.log(mellin(law, nu))
    return max(log_target / rate, 1e-12)


def series_level(params: QParams, delta: float, eps_tail: float) -> int:
    """Smallest ``L`` with ``(q^L / delta)^nu E[I^nu] <= eps_tail``."""
    nu = moment_order(params)
    law = PerpetuityLaw(params, tol_for(params.q))
    log_qL = math.log(delta) + (math.log(eps_tail) - math.log(mellin(law, nu))) / nu
    return max(1, int(math.ceil(log_qL / math.log(params.q))))


def _default_delta(params: QParams) -> float:
    law = PerpetuityLaw(params, tol_for(params.q))
    return DEFAULT_REL_DELTA * _scale(law, moment_order(params))


def _path_batch(params: QParams, horizon: float, gen: np.random.Generator, size: int) -> np.ndarray:
    q, z = params.q, params.z
    rate = 1.0 + z
    p_up = 1.0 / rate
    log_q = math.log(q)
    out = np.zeros(size)
    idx = np.arange(size)
    t = np.zeros(size)
    level = np.zeros(size, dtype=np.int64)
    acc = np.zeros(size)
    while idx.size:
        dt = gen.standard_exponential(idx.size) / rate
        seg = np.minimum(dt, horizon - t)
        acc += np.exp(level * log_q) * seg
        t += dt
        alive = t < horizon
        if not alive.all():
            out[idx[~alive]] = acc[~alive]
            idx, t, level, acc = idx[alive], t[alive], level[alive], acc[alive]
        level += np.where(gen.random(idx.size) < p_up, 1, -1)
    return out


def sample_perpetuity_path(
    params: QParams,
    delta: float | None = None,
    eps_tail: float = DEFAULT_EPS_TAIL,
    rng: RngState | None = None,
    size: int | None = None,
):
    """``I_T`` for the Markov horizon ``T(delta, eps_tail)``.

    Each draw is within ``delta`` of an exact draw except on an event of
    probability at most ``eps_tail``.  ``delta`` defaults to ``1e-4`` times
    ``E[I^nu]^(1/nu)``.
    """
    rng = rng if rng is not None else RngState(0)
    delta = _default_delta(params) if delta is None else delta
    T = path_horizon(params, delta, eps_tail)
    x = _path_batch(params, T, rng.generator, 1 if size is None else size)
    return float(x[0]) if size is None else x


def _series_batch(
    params: QParams, level_stop: int, gen: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    q, z = params.q, params.z
    p_up = 1.0 / (1.0 + z)
    log_q = math.log(q)
    out = np.zeros(size)
    steps_out = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    B = np.zeros(size, dtype=np.int64)
    acc = np.zeros(size)
    steps = 0
    while idx.size:
        eps = gen.standard_exponential(idx.size)
        acc += np.exp(B * log_q) * eps
        B += np.where(gen.random(idx.size) < p_up, 1, -1)
        steps += 1
        done = B >= level_stop
        if done.any():
            out[idx[done]] = acc[done]
            steps_out[idx[done]] = steps
            keep = ~done
            idx, B, acc = idx[keep], B[keep], acc[keep]
    return out / (1.0 + z), steps_out


def sample_perpetuity_series(
    params: QParams,
    level_stop: int,
    rng: RngState | None = None,
    size: int | None = None,
    *,
    return_steps: bool = False,
):
    """Partial sum of the jump-chain series up to the first visit of ``level_stop``.

    Returns ``(value, remainder_scale)`` where ``remainder_scale = q^L``: by
    the strong Markov property the unsimulated part is ``q^L`` times an
    independent copy of ``I``.  With ``return_steps`` the first-passage step
    counts are appended.
    """
    if level_stop < 1:
        raise DomainError("level_stop must be >= 1")
    rng = rng if rng is not None else RngState(0)
    vals, steps = _series_batch(params, int(level_stop), rng.generator, 1 if size is None else size)
    scale = params.q**level_stop
    if size is None:
        vals, steps = float(vals[0]), int(steps[0])
    return (vals, scale, steps) if return_steps else (vals, scale)


def i0_terms(q: float, eps_series: float) -> int:
    """Terms ``N`` so that ``E sum_{n >= N} q^n eps_n = q^N / (1-q) <= eps_series``."""
    return max(1, int(math.ceil(math.log(eps_series * (1.0 - q)) / math.log(q))))


def _i0_batch(q: float, N: int, gen: np.random.Generator, size: int) -> np.ndarray:
    weights = q ** np.arange(N, dtype=float)
    rows = max(1, (1 << 22) // N)
    out = np.empty(size)
    for start in range(0, size, rows):
        stop = min(size, start + rows)
        out[start:stop] = gen.standard_exponential((stop - start, N)) @ weights
    return out


def sample_perpetuity_factorization(
    params: QParams,
    eps_series: float = DEFAULT_EPS_SERIES,
    rng: RngState | None = None,
    size: int | None = None,
):
    """``q^-K * I0`` where ``P(K = n)`` is the q-gamma pmf with parameter ``z``.

    Equivalent to ``(1-q)^-1 I0 / R`` since ``R = q^K / (1-q)``.  ``I0`` is
    truncated after :func:`i0_terms` terms (mean of the dropped part at most
    ``eps_series``).
    """
    rng = rng if rng is not None else RngState(0)
    m = 1 if size is None else int(size)
    gen = rng.generator
    i0 = _i0_batch(params.q, i0_terms(params.q, eps_series), gen, m)
    k = sample_index_invcdf(QGammaLaw(params.z, params.q), rng, m)
    x = i0 * params.q ** (-k.astype(float))
    return float(x[0]) if size is None else x


# -- batches ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass
class SampleBatch:
    sampler_id: str
    params: QParams | QGammaLaw
    seed: int
    n: int
    values: np.ndarray
    bias_bound: float = 0.0
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sampler_id not in SAMPLER_IDS:
            raise ValueError(f"unknown sampler {self.sampler_id!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n,):
            raise ValueError("values must have length n")

    def metadata(self) -> dict[str, Any]:
        p = self.params
        if isinstance(p, QGammaLaw):
            params = {"a": float(p.a), "q": float(p.q)}
        else:
            params = {"q": float(p.q), "mu": float(p.mu), "z": float(p.z)}
        return {
            "sampler_id": self.sampler_id,
            "params": params,
            "seed": self.seed,
            "n": self.n,
            "bias_bound": float(self.bias_bound),
            "options": dict(self.options),
        }

    def to_json(self) -> str:
        # json writes floats as their shortest round-trip repr
        doc = {**self.metadata(), "values": self.values.tolist()}
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        meta = self.metadata()
        flat = {"sampler_id": meta["sampler_id"], **meta["params"], "seed": meta["seed"],
                "n": meta["n"], "bias_bound": meta["bias_bound"], **meta["options"]}
        for k, v in flat.items():
            buf.write(f"# {k}={_fmt(v) if isinstance(v, float) else v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value"])
        for v in self.values:
            w.writerow([_fmt(v)])
        return buf.getvalue()

    def write(self, path: str, fmt: str = "csv") -> None:
        text = self.to_json() if fmt == "json" else self.to_csv()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    @staticmethod
    def read_values(path: str) -> np.ndarray:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            return np.array(json.loads(text)["values"], dtype=float)
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        return np.array([float(r) for r in rows[1:]])


def _threads() -> int:
    raw = os.environ.get("QPERP_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n >= 1:
            return n
    return os.cpu_count() or 1


def draw_batch(
    sampler_id: str,
    params: QParams | QGammaLaw,
    n: int,
    seed: int,
    *,
    delta: float | None = None,
    eps_tail: float = DEFAULT_EPS_TAIL,
    eps_series: float = DEFAULT_EPS_SERIES,
    level_stop: int | None = None,
    method: str = "invcdf",
    threads: int | None = None,
) -> SampleBatch:
    """Reproducible batch of ``n`` draws.

    Draws are produced in fixed chunks of ``CHUNK`` values; chunk ``i`` uses
    the stream ``(seed, i)``.  Chunks may run on several threads
    (``QPERP_THREADS``) without changing the result.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if sampler_id not in SAMPLER_IDS:
        raise DomainError(f"unknown sampler {sampler_id!r}; choose from {SAMPLER_IDS}")
    options: dict[str, Any] = {}
    if sampler_id == "qgamma":
        if not isinstance(params, QGammaLaw):
            raise DomainError("the qgamma sampler takes a QGammaLaw")
        law = params
        options["method"] = method
        bias = 1e-14 if method == "geomsum" else 0.0

        def one(rng: RngState, m: int) -> np.ndarray:
            if method == "geomsum":
                return qgamma_sample_geomsum(law, rng, m)
            return law.support(sample_index_invcdf(law, rng, m))

    else:
        if not isinstance(params, QParams):
            raise DomainError(f"the {sampler_id} sampler takes QParams")
        if sampler_id == "path":
            delta = _default_delta(params) if delta is None else delta
            T = path_horizon(params, delta, eps_tail)
            options.update(delta=delta, eps_tail=eps_tail, horizon=T)
            bias = delta

            def one(rng: RngState, m: int) -> np.ndarray:
                return _path_batch(params, T, rng.generator, m)

        elif sampler_id == "series":
            if level_stop is None:
                delta = _default_delta(params) if delta is None else delta
                level_stop = series_level(params, delta, eps_tail)
                options.update(delta=delta, eps_tail=eps_tail)
            options["level_stop"] = int(level_stop)
            bias = params.q**level_stop
            L = int(level_stop)

            def one(rng: RngState, m: int) -> np.ndarray:
                return _series_batch(params, L, rng.generator, m)[0]

        else:
            options["eps_series"] = eps_series
            bias = eps_series

            def one(rng: RngState, m: int) -> np.ndarray:
                return sample_perpetuity_factorization(params, eps_series, rng, m)

    root = RngState(seed)
    sizes = [min(CHUNK, n - s) for s in range(0, n, CHUNK)]
    workers = min(threads or _threads(), len(sizes))
    jobs = [(root.child(i), m) for i, m in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: one(*job), jobs))
    else:
        parts = [one(*job) for job in jobs]
    values = np.concatenate(parts)
    return SampleBatch(sampler_id, params, int(seed), int(n), values, float(bias), options)
