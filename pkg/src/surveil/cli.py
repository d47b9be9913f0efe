"""Command-line entry point: ``surveil sweep | eval | selftest``.

Exit codes: 0 success, 2 usage or configuration error, 3 scheme not
applicable to the antenna configuration, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analytics import nonoutage_exact
from .beamform import SchemeId
from .model import SchemeInapplicable, SystemParams
from .montecarlo import run_schemes
from .numerics import DomainError, NumericalError
from .sdp import SolverError
from .sweep import Mode, SpecError, load_spec, parse_params, run_sweep

EXIT_USAGE, EXIT_INAPPLICABLE, EXIT_NUMERICAL = 2, 3, 4


def _overrides(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise SpecError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _point_params(args) -> SystemParams:
    values = {}
    if args.config:
        text = Path(args.config).read_text()
        body = text if text.lstrip().startswith("[") else "[params]\n" + text
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        cp.read_string(body)
        if cp.has_section("params"):
            values.update(cp["params"])
    values.update(_overrides(args.set))
    if args.pj_db is not None:
        values["pj_db"] = str(args.pj_db)
    return parse_params(values)


def cmd_sweep(args) -> int:
    spec, params = load_spec(Path(args.spec_file).read_text())
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.mode is not None:
        changes["mode"] = Mode(args.mode)
    if args.out is not None:
        changes["output_path"] = None if args.out == "-" else args.out
    if args.shards is not None:
        changes["shards"] = args.shards
    spec = replace(spec, **changes)
    text = run_sweep(spec, params, workers=args.workers)
    if spec.output_path is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {spec.output_path}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    params = _point_params(args)
    scheme = SchemeId.parse(args.scheme)
    mode = Mode(args.mode or "analytic")
    print(f"scheme: {scheme.name}")
    if mode is not Mode.montecarlo:
        try:
            res = nonoutage_exact(params, scheme)
        except NotImplementedError as exc:
            if mode is Mode.analytic:
                raise
            print(f"warning: {exc}", file=sys.stderr)
        else:
            print(f"analytic: {res.value!r}")
            if res.flags:
                print(f"flags: {','.join(res.flags)}")
    if mode is not Mode.analytic:
        trials = args.trials or 100_000
        r = run_schemes(params, [scheme], trials, args.seed or 0, args.shards)[scheme]
        print(f"montecarlo: {r.estimate!r}")
        print(f"std_error: {r.std_error!r}")
        print(f"trials: {r.trials}")
    return 0


def _selftest_checks():
    from scipy import special

    from .analytics import nonoutage_mrt_mrc_exact, nonoutage_siso_exact
    from .beamform import miso_fractional_objective, miso_optimal_design, miso_sdp_design
    from .model import sample_channels
    from .numerics import exp_scaled_gamma, upper_incomplete_gamma

    def gamma_recursion():
        worst = 0.0
        for x in (0.3, 2.0, 9.0):
            for a in range(-5, 5):
                lhs = upper_incomplete_gamma(a + 1, x)
                rhs = a * upper_incomplete_gamma(a, x) + x**a * math.exp(-x)
                worst = max(worst, abs(lhs - rhs) / abs(lhs))
        return worst < 1e-10, f"max relative residual {worst:.1e}"

    def e1_against_scipy():
        xs = (1e-3, 0.5, 3.0, 40.0)
        err = max(abs(exp_scaled_gamma(0, x) - special.exp1(x) * math.exp(x)) / (special.exp1(x) * math.exp(x)) for x in xs)
        return err < 1e-12, f"max relative error {err:.1e}"

    def miso_sdp():
        p = SystemParams(n_r=1)
        worst = 0.0
        for seed in range(5):
            ch = sample_channels(p, seed)
            a = miso_fractional_objective(p, ch, miso_optimal_design(p, ch).w_t)
            b = miso_fractional_objective(p, ch, miso_sdp_design(p, ch)[0].w_t)
            worst = max(worst, abs(a - b) / a)
        return worst < 1e-6, f"max relative gap {worst:.1e}"

    def collapse():
        p = SystemParams(n_t=1, n_r=1)
        d = abs(nonoutage_mrt_mrc_exact(p).value - nonoutage_siso_exact(p).value)
        return d < 1e-6, f"difference {d:.1e}"

    def mc_agreement():
        p = SystemParams()
        r = run_schemes(p, [SchemeId.SISO_OPT], 20_000, 7, 1)[SchemeId.SISO_OPT]
        a = nonoutage_siso_exact(p).value
        z = abs(r.estimate - a) / r.std_error
        return z < 4.0, f"{z:.2f} standard errors"

    return [
        ("incomplete gamma recursion", gamma_recursion),
        ("scaled E1 vs scipy", e1_against_scipy),
        ("MISO eigen vs SDP", miso_sdp),
        ("MRT/MRC 1x1 equals SISO", collapse),
        ("SISO analytic vs Monte Carlo", mc_agreement),
    ]


def cmd_selftest(args) -> int:
    failed = 0
    for name, check in _selftest_checks():
        try:
            ok, detail = check()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surveil", description="Proactive-eavesdropping monitor experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--mode", choices=[m.value for m in Mode])
        p.add_argument("--shards", type=int, help="Monte Carlo shards (default: $SURVEIL_SHARDS or 1)")

    sw = sub.add_parser("sweep", help="run a sweep file and write CSV")
    sw.add_argument("spec_file")
    common(sw)
    sw.add_argument("--out", help="CSV path ('-' for stdout); overrides the file's output key")
    sw.add_argument("--workers", type=int, default=1, help="processes evaluating sweep points")
    sw.set_defaults(func=cmd_sweep)

    ev = sub.add_parser("eval", help="evaluate one scheme at one parameter point")
    ev.add_argument("--scheme", required=True)
    ev.add_argument("--config", help="key = value parameter file")
    ev.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter")
    ev.add_argument("--pj-db", type=float, help="jamming budget P_J/N_D in dB")
    common(ev)
    ev.set_defaults(func=cmd_eval)

    st = sub.add_parser("selftest", help="quick numerical self-checks")
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemeInapplicable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except NotImplementedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpecError, DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
