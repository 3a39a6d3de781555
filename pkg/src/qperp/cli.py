"""Command line: ``qperp {eval,sample,verify,limit}``.

Exit codes: 0 success, 1 verification failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from typing import Sequence

from . import perpetuity, qcalc, qgamma, scaling, verify
from .qcalc import CapExceededError, DomainError, QParams, SeriesTolerance, tol_for
from .rng import RngState
from .samplers import SAMPLER_IDS, draw_batch

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

EVAL_FUNCTIONS = ("qpoch", "qgamma_fn", "qexp", "psi", "psi_q", "mellin", "density", "cdf", "pmf")
FIXED_TIMESTAMP = "1970-01-01T00:00:00Z"


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, complex):
        if v.imag == 0.0:
            return repr(v.real)
        return repr(v)
    return repr(float(v))


def _complex(text: str) -> complex | float:
    try:
        v = complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return v.real if v.imag == 0.0 else v


def _grid(text: str) -> list[float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _need(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.function} needs {', '.join(missing)}")


def _tol(args, q: float) -> SeriesTolerance:
    return tol_for(q) if args.tol is None else tol_for(q, args.tol)


def _evaluate(args) -> tuple[object, float | None, dict]:
    fn = args.function
    if fn == "qpoch":
        _need(args, "a", "q")
        if args.n is None:
            v, err = qcalc.qpochhammer_inf(args.a, args.q, _tol(args, args.q))
            return v, err, {"a": args.a, "q": args.q, "n": "inf"}
        return qcalc.qpochhammer_finite(args.a, args.q, args.n), 0.0, {"a": args.a, "q": args.q, "n": args.n}
    if fn == "qgamma_fn":
        _need(args, "x", "q")
        return qcalc.q_gamma(args.x, args.q, _tol(args, args.q)), None, {"x": args.x, "q": args.q}
    if fn == "qexp":
        _need(args, "t", "q")
        return qcalc.q_exponential(args.t, args.q, _tol(args, args.q)), None, {"t": args.t, "q": args.q}
    if fn == "pmf":
        _need(args, "a", "q", "n")
        law = qgamma.QGammaLaw(args.a, args.q)
        return qgamma.qgamma_pmf(law, args.n), None, {"a": args.a, "q": args.q, "n": args.n}
    _need(args, "q", "mu")
    params = QParams(args.q, args.mu)
    inputs: dict = {"q": args.q, "mu": args.mu}
    if fn in ("psi", "psi_q", "mellin"):
        _need(args, "s")
        inputs["s"] = args.s
        if fn == "psi":
            return perpetuity.levy_exponent(params, args.s), None, inputs
        if fn == "psi_q":
            return scaling.psi_q(params, args.s), None, inputs
        law = perpetuity.PerpetuityLaw(params, _tol(args, args.q))
        return perpetuity.mellin(law, args.s, args.form), None, inputs
    _need(args, "x")
    if isinstance(args.x, complex):
        raise DomainError("x must be real")
    inputs["x"] = args.x
    law = perpetuity.PerpetuityLaw(params, _tol(args, args.q))
    f = perpetuity.density if fn == "density" else perpetuity.cdf
    v, err = f(law, args.x)
    return v, err, inputs


def cmd_eval(args) -> int:
    value, err, inputs = _evaluate(args)
    if args.format == "json":
        doc = {"function": args.function, "inputs": verify._num(inputs), "value": verify._num(value)}
        if err is not None:
            doc["err_bound"] = float(err)
        print(json.dumps(doc, ensure_ascii=False))
    elif args.format == "csv":
        print("function,value,err_bound")
        print(f"{args.function},{_fmt(value)},{'' if err is None else _fmt(err)}")
    else:
        print(_fmt(value))
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.n < 1:
        raise DomainError("n must be >= 1")
    if args.sampler == "qgamma":
        if args.a is None or args.q is None:
            raise UsageError("qgamma sampling needs --a and --q")
        params: object = qgamma.QGammaLaw(args.a, args.q)
    else:
        if args.q is None or args.mu is None:
            raise UsageError(f"{args.sampler} sampling needs --q and --mu")
        params = QParams(args.q, args.mu)
    batch = draw_batch(
        args.sampler,
        params,
        args.n,
        args.seed,
        delta=args.delta,
        eps_tail=args.eps_tail,
        eps_series=args.eps_series,
        level_stop=args.level_stop,
        method=args.method,
    )
    fmt = args.format or "csv"
    if args.out:
        batch.write(args.out, fmt)
    else:
        sys.stdout.write(batch.to_json() if fmt == "json" else batch.to_csv())
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify.run_suite(args.suite, args.seed)
    report.timestamp = (
        _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ") if args.stamp_now else FIXED_TIMESTAMP
    )
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = sum(not c.passed for c in report.cases)
    print(f"{args.suite}: {len(report.cases) - failed}/{len(report.cases)} cases pass", file=sys.stderr)
    return EXIT_OK if report.overall_pass else EXIT_FAIL


def cmd_limit(args) -> int:
    if not args.grid:
        raise DomainError("q grid is empty")
    if args.n < 1:
        raise DomainError("n must be >= 1")
    if any(b <= a for a, b in zip(args.grid, args.grid[1:])):
        raise DomainError("q grid must be increasing")
    rows = scaling.dufresne_limit_study(args.mu, args.grid, args.n, RngState(args.seed))
    text = scaling.limit_table_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qperp", description="q-deformed perpetuities: evaluation, sampling, checks.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="evaluate one function and print the value")
    e.add_argument("function", choices=EVAL_FUNCTIONS)
    e.add_argument("--q", type=float, help="base q in (0, 1)")
    e.add_argument("--mu", type=float, help="drift parameter mu > 0; z = q**mu")
    e.add_argument("--s", type=_complex, help="Mellin / exponent argument, complex allowed (e.g. 0.5+2j)")
    e.add_argument("--x", type=_complex, help="point for qgamma_fn, density or cdf")
    e.add_argument("--a", type=_complex, help="parameter a of qpoch / pmf")
    e.add_argument("--t", type=_complex, help="argument of qexp")
    e.add_argument("--n", type=int, help="finite length for qpoch, lattice index for pmf")
    e.add_argument("--form", choices=("pochhammer", "qgamma"), default="pochhammer", help="closed form for mellin")
    e.add_argument("--tol", type=float, help="absolute series tolerance (default 1e-12)")
    e.add_argument("--format", choices=("csv", "json"), help="structured output instead of a bare value")
    e.set_defaults(handler=cmd_eval)

    s = sub.add_parser("sample", help="draw a reproducible batch and write it as CSV or JSON")
    s.add_argument("sampler", choices=SAMPLER_IDS)
    s.add_argument("--q", type=float, help="base q in (0, 1)")
    s.add_argument("--mu", type=float, help="drift parameter (perpetuity samplers)")
    s.add_argument("--a", type=float, help="q-gamma parameter a in [0, 1) (qgamma sampler)")
    s.add_argument("--n", type=int, required=True, help="number of draws")
    s.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    s.add_argument("--out", help="output file (default stdout)")
    s.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    s.add_argument("--delta", type=float, help="bias budget of the path/series samplers")
    s.add_argument("--eps-tail", type=float, default=1e-4, help="tail probability of the truncation rule")
    s.add_argument("--eps-series", type=float, default=1e-12, help="truncation of the factorization series")
    s.add_argument("--level-stop", type=int, help="first-passage level of the series sampler")
    s.add_argument("--method", choices=("invcdf", "geomsum"), default="invcdf", help="qgamma sampling method")
    s.set_defaults(handler=cmd_sample)

    v = sub.add_parser("verify", help="run a check suite and write a JSON report")
    v.add_argument("suite", choices=("analytic", "distributional", "all"))
    v.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    v.add_argument("--out", help="report file (default stdout)")
    v.add_argument(
        "--stamp-now",
        action="store_true",
        help=f"record the current UTC time; otherwise the timestamp is {FIXED_TIMESTAMP} so reruns are identical",
    )
    v.set_defaults(handler=cmd_verify)

    lim = sub.add_parser("limit", help="KS distance of (1-q)^2 I to 1/gamma_mu along a q grid")
    lim.add_argument("--mu", type=float, required=True, help="drift parameter mu > 0")
    lim.add_argument("--grid", type=_grid, default=[0.9, 0.99, 0.999], help="comma-separated q values")
    lim.add_argument("--n", type=int, default=100_000, help="draws per grid point")
    lim.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    lim.add_argument("--out", help="CSV file (default stdout)")
    lim.set_defaults(handler=cmd_limit)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.handler(args)
    except (DomainError, UsageError, CapExceededError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
