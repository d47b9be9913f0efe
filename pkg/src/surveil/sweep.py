"""Parameter sweeps written as CSV.

A sweep file is flat ``key = value`` text.  Keys before any section header
(or under ``[params]``) set :class:`~surveil.model.SystemParams` fields; the
``[sweep]`` section describes the axis, schemes and mode::

    n_t = 3
    n_r = 3
    pj_db = 10

    [sweep]
    axis = PJ_dB
    start = 0
    stop = 20
    steps = 5
    schemes = SISO_OPT, PASSIVE, CONSTANT_FULL
    mode = montecarlo
    trials = 100000
    output = results/pj.csv
"""

from __future__ import annotations

import configparser
import csv
import enum
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analytics import NoAsymptotic, nonoutage_exact, outage_asymptotic, outage_exact
from .beamform import SchemeId, scheme_array
from .model import SchemeInapplicable, SystemParams
from .montecarlo import run_schemes

__all__ = ["Axis", "Mode", "SweepSpec", "SpecError", "load_spec", "parse_params", "axis_values", "run_sweep"]


class SpecError(ValueError):
    """Invalid sweep description."""


class Axis(enum.Enum):
    PJ_dB = "PJ_dB"
    rho = "rho"
    Nt_split = "Nt_split"
    EMR = "EMR"


class Mode(enum.Enum):
    analytic = "analytic"
    montecarlo = "montecarlo"
    both = "both"


_PARAM_KEYS = {
    "n_t": int,
    "n_r": int,
    "lambda1": float,
    "lambda2": float,
    "lambda3": float,
    "lambda4": float,
    "rho": float,
    "n_d": float,
    "n_e": float,
    "p_j_max": float,
    "p_s": float,
}


@dataclass(frozen=True)
class SweepSpec:
    axis: Axis
    start: float
    stop: float
    steps: int
    schemes: tuple
    mode: Mode = Mode.analytic
    output_path: str | None = None
    trials: int = 100_000
    seed: int = 0
    log_scale: bool = False
    quantity: str = "nonoutage"
    total_antennas: int = 14
    shards: int | None = None

    def __post_init__(self):
        if self.steps < 2:
            raise SpecError("steps must be at least 2")
        if not self.schemes:
            raise SpecError("at least one scheme is required")
        if self.quantity not in ("nonoutage", "outage"):
            raise SpecError("quantity must be 'nonoutage' or 'outage'")
        if self.log_scale and (self.start <= 0 or self.stop <= 0):
            raise SpecError("log-scale axes need positive endpoints")
        if self.axis is Axis.Nt_split:
            lo, hi = sorted((self.start, self.stop))
            if lo < 1 or hi > self.total_antennas - 1 or lo != int(lo) or hi != int(hi):
                raise SpecError(f"Nt_split range must be integers within [1, {self.total_antennas - 1}]")


def parse_params(values: dict, base: SystemParams | None = None) -> SystemParams:
    """Build SystemParams from string key/values; ``pj_db`` sets the budget in dB."""
    base = base or SystemParams()
    changes = {}
    for key, raw in values.items():
        k = key.strip().lower()
        if k == "pj_db":
            continue
        if k not in _PARAM_KEYS:
            raise SpecError(f"unknown parameter {key!r}")
        try:
            changes[k] = _PARAM_KEYS[k](float(raw)) if _PARAM_KEYS[k] is int else float(raw)
        except ValueError:
            raise SpecError(f"bad value for {key}: {raw!r}") from None
    try:
        params = replace(base, **changes)
        if "pj_db" in {k.strip().lower() for k in values}:
            db = float({k.strip().lower(): v for k, v in values.items()}["pj_db"])
            params = params.with_pj_db(db)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    return params


def load_spec(text: str) -> tuple[SweepSpec, SystemParams]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    body = text if text.lstrip().startswith("[") else "[params]\n" + text
    try:
        parser.read_string(body)
    except configparser.Error as exc:
        raise SpecError(f"cannot parse sweep file: {exc}") from None
    params = parse_params(dict(parser["params"])) if parser.has_section("params") else SystemParams()
    if not parser.has_section("sweep"):
        raise SpecError("missing [sweep] section")
    sw = {k.lower(): v.strip() for k, v in parser["sweep"].items()}
    known = {"axis", "start", "stop", "steps", "schemes", "mode", "output", "trials", "seed", "scale", "quantity", "total", "shards"}
    extra = set(sw) - known
    if extra:
        raise SpecError(f"unknown sweep keys: {sorted(extra)}")
    try:
        axis = Axis(sw["axis"])
    except KeyError:
        raise SpecError("sweep needs an 'axis'") from None
    except ValueError:
        raise SpecError(f"axis must be one of {[a.value for a in Axis]}") from None
    try:
        schemes = tuple(SchemeId.parse(s) for s in sw.get("schemes", "").split(",") if s.strip())
        mode = Mode(sw.get("mode", "analytic"))
        scale = sw.get("scale", "log" if axis is Axis.EMR else "linear")
        if scale not in ("log", "linear"):
            raise SpecError("scale must be 'log' or 'linear'")
        spec = SweepSpec(
            axis=axis,
            start=float(sw["start"]),
            stop=float(sw["stop"]),
            steps=int(sw["steps"]),
            schemes=schemes,
            mode=mode,
            output_path=sw.get("output"),
            trials=int(float(sw.get("trials", 100_000))),
            seed=int(sw.get("seed", 0)),
            log_scale=scale == "log",
            quantity=sw.get("quantity", "nonoutage"),
            total_antennas=int(sw.get("total", 14)),
            shards=int(sw["shards"]) if "shards" in sw else None,
        )
    except KeyError as exc:
        raise SpecError(f"sweep needs {exc.args[0]!r}") from None
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    return spec, params


def axis_values(spec: SweepSpec) -> np.ndarray:
    if spec.axis is Axis.Nt_split:
        return np.round(np.linspace(spec.start, spec.stop, spec.steps)).astype(int)
    if spec.log_scale:
        return np.logspace(np.log10(spec.start), np.log10(spec.stop), spec.steps)
    return np.linspace(spec.start, spec.stop, spec.steps)


def point_params(spec: SweepSpec, base: SystemParams, value) -> SystemParams:
    if spec.axis is Axis.PJ_dB:
        return base.with_pj_db(float(value))
    if spec.axis is Axis.rho:
        return base.replace(rho=float(value))
    if spec.axis is Axis.Nt_split:
        n_t = int(value)
        return base.replace(n_t=n_t, n_r=spec.total_antennas - n_t)
    return base.replace(lambda2=float(value) * base.lambda1)


def _columns(spec: SweepSpec) -> list[str]:
    cols = [spec.axis.value]
    for s in spec.schemes:
        n = s.name
        if spec.mode is Mode.analytic:
            cols.append(n)
            if spec.quantity == "outage":
                cols.append(f"{n}_asym")
        elif spec.mode is Mode.montecarlo:
            cols += [n, f"{n}_se"]
        else:
            cols += [f"{n}_analytic", f"{n}_mc", f"{n}_se"]
    return cols


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _warn(stream, msg):
    print(f"warning: {msg}", file=stream)


def _eval_point(job) -> tuple[dict, list[str]]:
    """One axis point: ``(row, warnings)``; picklable so points can run in worker processes."""
    spec, params, value = job
    warnings = []
    outage = spec.quantity == "outage"
    where = f"{spec.axis.value}={value}"
    try:
        p = point_params(spec, params, value)
    except ValueError as exc:
        raise SpecError(f"axis value {value}: {exc}") from None
    row = {spec.axis.value: value}
    mc = {}
    if spec.mode is not Mode.analytic:
        usable = []
        for s in spec.schemes:
            try:
                scheme_array(s, p)
                usable.append(s)
            except SchemeInapplicable as exc:
                warnings.append(f"{s.name} at {where}: {exc}")
        if usable:
            mc = run_schemes(p, usable, spec.trials, spec.seed, spec.shards)
    for s in spec.schemes:
        a_val = asym = None
        if spec.mode is not Mode.montecarlo:
            try:
                if outage:
                    a_val = outage_exact(p, s)
                    try:
                        coef, div = outage_asymptotic(p, s)
                        asym = coef / p.emr**div
                    except NoAsymptotic:
                        pass
                else:
                    res = nonoutage_exact(p, s)
                    a_val = res.value
                    warnings += [f"{s.name} at {where}: analytic value {flag}" for flag in res.flags]
            except NotImplementedError:
                warnings.append(f"{s.name}: no analytic expression")
            except SchemeInapplicable as exc:
                if spec.mode is Mode.analytic:
                    warnings.append(f"{s.name} at {where}: {exc}")
        n = s.name
        if spec.mode is Mode.analytic:
            row[n] = a_val
            if outage:
                row[f"{n}_asym"] = asym
            continue
        r = mc.get(s)
        est = None if r is None else (1.0 - r.estimate if outage else r.estimate)
        se = None if r is None else r.std_error
        if spec.mode is Mode.montecarlo:
            row[n], row[f"{n}_se"] = est, se
        else:
            row[f"{n}_analytic"], row[f"{n}_mc"], row[f"{n}_se"] = a_val, est, se
    return row, warnings


def run_sweep(spec: SweepSpec, params: SystemParams, *, workers: int = 1, stderr=None) -> str:
    """Evaluate the sweep; returns the CSV text and writes it to ``spec.output_path`` if set.

    Points are evaluated in ``workers`` processes; rows always follow the
    axis order.  Inapplicable schemes or schemes without an analytic form
    produce empty cells and a warning on ``stderr``.
    """
    stderr = stderr or sys.stderr
    jobs = [(spec, params, v) for v in axis_values(spec)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_eval_point, jobs))
    else:
        results = [_eval_point(j) for j in jobs]
    rows = []
    seen = set()
    for row, warnings in results:
        for w in warnings:
            if w not in seen:
                seen.add(w)
                _warn(stderr, w)
        rows.append(row)

    cols = _columns(spec)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        out = [int(row[cols[0]]) if spec.axis is Axis.Nt_split else repr(float(row[cols[0]]))]
        out += [_fmt(row.get(c)) for c in cols[1:]]
        writer.writerow(out)
    text = buf.getvalue()
    if spec.output_path:
        path = Path(spec.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text
