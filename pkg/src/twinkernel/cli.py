"""Command-line interface.

Every command reads one YAML run configuration (optional; documented
defaults fill the rest), applies ``--set section.key=value`` overrides and
writes its primary result files into the output directory.  Primary files
depend only on the resolved configuration; the worker count, the output
directory and wall-clock timings go to a separate ``timings_*.json``.

Exit status: 0 success, 1 validation failure, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import re
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import analysis as an
from . import space as sp
from .errors import (
    CarrierEscapeError,
    ConfigError,
    DataFormatError,
    DegenerateFitError,
    EmptyInputError,
    LengthMismatchError,
    NegativeLevelError,
    PowerOverflowError,
    ZeroDenominatorError,
    ZeroMassError,
)
from .estimator import Dataset, EstimatorConfig
from .kernel import BandwidthSchedule, TwinKernelHierarchy, make_kernel, validate_kernel
from .selection import CodeLengthScheme, PenaltyConfig, fit_pipeline, kraft_sum, select_level
from .twin_algebra import BUILTIN_OPS, linear_subgroup_scan, sample_pairs

OK, VALIDATION, INPUT, NUMERIC = 0, 1, 2, 3
OUT_ENV = "TWINKERNEL_OUT"

# Every key a config may contain, with its default.  ``None`` means "derived":
# bounds from the space kind, max_power from the action, output dir from
# $TWINKERNEL_OUT or ./results.
DEFAULTS = {
    "space": {"kind": "circle", "axes": None, "bounds": None, "grid_size": None, "norm": "max"},
    "action": {"kind": "rotation", "alpha": an.GOLDEN, "factor": 2.0, "shift": 1.0,
               "components": None, "max_power": None},
    "kernel": {"name": "epanechnikov", "coeffs": None, "h0": 1.0, "rho": 0.5, "dyadic": False,
               "grid_size": 1024},
    "estimator": {"eta_rule": "inverse_square", "eta_value": 0.0, "degree": 0, "ridge": 1e-10},
    "selection": {"scheme": "squared", "lambda_rule": "rice", "lambda": 1.0, "c": 1.0,
                  "risk": "resubstitution", "levels": None},
    "experiment": {"scenario": "classical-circle", "n_grid": list(an.DEFAULT_N_GRID),
                   "replicates": an.DEFAULT_REPLICATES, "seed": 0, "n": 512, "sigma": None,
                   "jobs": 1, "x0": None, "n_max": 4096, "radii": [float(r) for r in sp.DEFAULT_RADII],
                   "starts": 1, "op": "addition", "window": 8, "pairs": 200, "tol": 1e-9,
                   "kraft_levels": 10},
    "output": {"dir": None},
}

SPACE_DEFAULT_BOUNDS = {
    "circle": [[0.0, 1.0]], "real_line": [[0.0, 1.0]], "positive_half_line": [[1.0, 4.0]],
    "box_in_Rd": [[0.0, 1.0], [0.0, 1.0]],
}


# ---------------------------------------------------------------------------
# configuration


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-10`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*\.[0-9_]*(?:[eE][-+]?[0-9]+)?|\.[0-9_]+(?:[eE][-+]?[0-9]+)?
               |[0-9][0-9_]*[eE][-+]?[0-9]+|\.(?:inf|Inf|INF)|[-+]\.(?:inf|Inf|INF)|\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _yaml_load(text):
    return yaml.load(text, Loader=_Loader)


def _merge(base, update, path=""):
    for key, val in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val


def _parse_set(item):
    if "=" not in item:
        raise ConfigError(f"--set expects section.key=value, got {item!r}")
    path, raw = item.split("=", 1)
    parts = path.strip().split(".")
    if len(parts) != 2:
        raise ConfigError(f"--set key must look like section.key, got {path!r}")
    return {parts[0]: {parts[1]: _yaml_load(raw)}}


def resolve_config(path=None, sets=(), seed=None, jobs=None, out=None) -> dict:
    """Defaults, then the YAML file, then ``--set`` items, then dedicated flags."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = _yaml_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        _merge(cfg, loaded)
    for item in sets:
        _merge(cfg, _parse_set(item))
    if seed is not None:
        cfg["experiment"]["seed"] = seed
    if jobs is not None:
        cfg["experiment"]["jobs"] = jobs
    if out is not None:
        cfg["output"]["dir"] = out
    return _fill_derived(cfg)


def _fill_derived(cfg):
    s = cfg["space"]
    if s["kind"] == "product":
        if not s["axes"]:
            raise ConfigError("product spaces need space.axes")
        if s["bounds"] is None:
            s["bounds"] = [[0.0, 1.0] if a == "circle" else [1.0, 4.0] if a == "half_line" else [0.0, 1.0]
                           for a in s["axes"]]
    elif s["kind"] in SPACE_DEFAULT_BOUNDS:
        if s["bounds"] is None:
            s["bounds"] = SPACE_DEFAULT_BOUNDS[s["kind"]]
    else:
        raise ConfigError(f"unknown space kind {s['kind']!r}")
    s["bounds"] = [[float(lo), float(hi)] for lo, hi in s["bounds"]]
    if s["grid_size"] is None:
        s["grid_size"] = 2048 if len(s["bounds"]) == 1 else 256
    if cfg["output"]["dir"] is None:
        cfg["output"]["dir"] = os.environ.get(OUT_ENV, "results")
    e = cfg["experiment"]
    if not isinstance(e["seed"], int):
        raise ConfigError("experiment.seed must be an integer")
    a = cfg["action"]
    if a["max_power"] is None:
        a["max_power"] = build_action(a, len(s["bounds"])).max_power
    return cfg


def build_space(spec) -> sp.MetricSpace:
    kind, bounds, g = spec["kind"], spec["bounds"], int(spec["grid_size"])
    if kind == "circle":
        return sp.circle(g)
    if kind == "real_line":
        return sp.real_line(*bounds[0], grid_size=g)
    if kind == "positive_half_line":
        return sp.positive_half_line(*bounds[0], grid_size=g)
    if kind == "box_in_Rd":
        return sp.box(bounds, norm=spec["norm"], grid_size=g)
    return sp.MetricSpace("product", tuple(spec["axes"]), tuple(tuple(b) for b in bounds),
                          norm=spec["norm"], grid_size=g)


def build_action(spec, dim) -> sp.GroupAction:
    kind = spec["kind"]
    if kind == "trivial":
        act = sp.trivial(dim)
    elif kind == "rotation":
        act = sp.rotation(spec["alpha"])
    elif kind == "dilation":
        f = spec["factor"]
        act = sp.dilation([f] * dim if np.isscalar(f) and dim > 1 else f)
    elif kind == "translation":
        sh = spec["shift"]
        act = sp.translation([sh] * dim if np.isscalar(sh) and dim > 1 else sh)
    elif kind == "product":
        comps = spec.get("components") or []
        if not comps:
            raise ConfigError("product actions need action.components")
        parts = []
        for c in comps:
            extra = set(c) - set(DEFAULTS["action"]) - {"dim"}
            if extra:
                raise ConfigError(f"unknown action component keys {sorted(extra)}")
            sub = {**DEFAULTS["action"], "max_power": None, **c}
            parts.append(build_action(sub, int(c.get("dim", 1))))
        act = sp.product_action(*parts)
    else:
        raise ConfigError(f"unknown action kind {kind!r}")
    if act.dim != dim:
        raise ConfigError(f"action acts on dimension {act.dim}, space has dimension {dim}")
    if spec.get("max_power") is not None:
        act = replace(act, max_power=int(spec["max_power"]))
    return act


def build_hierarchy(cfg) -> TwinKernelHierarchy:
    space = build_space(cfg["space"])
    action = build_action(cfg["action"], space.dim)
    k = cfg["kernel"]
    kernel = make_kernel(k["name"], k["coeffs"])
    return TwinKernelHierarchy(kernel, BandwidthSchedule(k["h0"], k["rho"], bool(k["dyadic"])), action, space)


def build_selection(cfg):
    e, s = cfg["estimator"], cfg["selection"]
    est = EstimatorConfig(e["eta_rule"], float(e["eta_value"]), int(e["degree"]), float(e["ridge"]))
    pen = PenaltyConfig(float(s["lambda"]), s["lambda_rule"])
    return est, pen, CodeLengthScheme(s["scheme"])


def build_scenario(cfg) -> an.Scenario:
    e = cfg["experiment"]
    ov = {}
    if e["sigma"] is not None:
        ov["sigma"] = float(e["sigma"])
    return an.get_scenario(e["scenario"], **ov)


# ---------------------------------------------------------------------------
# data files


def read_dataset(path, dim) -> Dataset:
    """CSV with a header naming ``x`` (or ``x1..xd``) and ``y``."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataFormatError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError("empty file; a header row is required", line=1) from None
        xcols = ["x"] if dim == 1 and "x" in header else [f"x{i + 1}" for i in range(dim)]
        for col in xcols + ["y"]:
            if col not in header:
                raise DataFormatError(f"missing column {col!r}", line=1)
        idx = [header.index(c) for c in xcols]
        iy = header.index("y")
        xs, ys = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"expected {len(header)} fields, found {len(row)}", line=line)
            try:
                vals = [float(row[i]) for i in idx + [iy]]
            except ValueError:
                raise DataFormatError("non-numeric value", line=line) from None
            if not all(math.isfinite(v) for v in vals):
                raise DataFormatError("non-finite value", line=line)
            xs.append(vals[:-1])
            ys.append(vals[-1])
    if not ys:
        raise DataFormatError("no data rows")
    return Dataset(np.array(xs), np.array(ys))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in r])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n", encoding="utf-8")


class Output:
    """Names result files by command, scenario, seed and version."""

    def __init__(self, cfg, command, tag):
        self.dir = Path(cfg["output"]["dir"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stem = f"{command}_{tag}_seed{cfg['experiment']['seed']}_v{__version__}"
        self.files = []

    def path(self, suffix):
        p = self.dir / f"{self.stem}{suffix}"
        self.files.append(str(p))
        return p


# execution settings that cannot change results; kept out of primary files so
# that e.g. --jobs 4 or another output directory gives byte-identical output
RUNTIME_KEYS = (("experiment", "jobs"), ("output", "dir"))


def result_config(cfg):
    out = copy.deepcopy(cfg)
    for section, key in RUNTIME_KEYS:
        out[section].pop(key, None)
    return out


def bundle(cfg, command, result):
    return {"command": command, "config": result_config(cfg), "version": __version__, "result": result}


# ---------------------------------------------------------------------------
# commands


def cmd_check_kernel(cfg, args):
    k = cfg["kernel"]
    report = validate_kernel(make_kernel(k["name"], k["coeffs"]), int(k["grid_size"]))
    out = Output(cfg, "check-kernel", report.kernel)
    dump_json(out.path(".json"), bundle(cfg, "check-kernel", report.to_dict()))
    for key in ("K1", "K2", "K3", "K4"):
        r = getattr(report, key)
        print(f"{key}: {'pass' if r.passed else 'FAIL'} ({r.detail}: {r.value:.6g})")
    if not report.K4.passed and report.essential_ok:
        print("warning: K4 (Lipschitz) check failed", file=sys.stderr)
    return OK if report.essential_ok else VALIDATION


def _load_for_fit(cfg, args):
    hier = build_hierarchy(cfg)
    data = read_dataset(args.data, hier.space.dim)
    if not np.all(hier.space.contains(data.xs)):
        raise DataFormatError("covariates outside the carrier")
    est, pen, scheme = build_selection(cfg)
    return hier, data, est, pen, scheme


def _trace_files(out, cfg, command, trace):
    dump_json(out.path("_trace.json"), bundle(cfg, command, trace.to_dict()))
    write_csv(out.path("_levels.csv"), ["j", "h_j", "risk", "pen", "criterion"],
              [[r["j"], r["h_j"], r["risk"], r["pen"], r["criterion"]] for r in trace.rows()])


def cmd_select(cfg, args):
    hier, data, est, pen, scheme = _load_for_fit(cfg, args)
    s = cfg["selection"]
    trace = select_level(data, hier, est, pen, scheme, float(s["c"]), s["risk"], s["levels"])
    out = Output(cfg, "select", Path(args.data).stem)
    _trace_files(out, cfg, "select", trace)
    print(f"j_hat = {trace.j_hat}  (h = {hier.bandwidth(trace.j_hat):.6g}, lambda = {trace.lambda_:.6g})")
    return OK


def cmd_fit(cfg, args):
    hier, data, est, pen, scheme = _load_for_fit(cfg, args)
    s = cfg["selection"]
    trace, predictor = fit_pipeline(data, hier, est, pen, scheme, float(s["c"]), s["risk"], s["levels"])
    grid, _ = hier.space.quad_grid()
    mhat = predictor(grid)
    out = Output(cfg, "fit", Path(args.data).stem)
    _trace_files(out, cfg, "fit", trace)
    cols = ["x"] if hier.space.dim == 1 else [f"x{i + 1}" for i in range(hier.space.dim)]
    write_csv(out.path("_predictions.csv"), cols + ["m_hat"],
              [list(map(float, g)) + [float(v)] for g, v in zip(grid, mhat)])
    print(f"j_hat = {trace.j_hat}; predictions on {grid.shape[0]} grid points")
    return OK


def cmd_simulate(cfg, args):
    sc = build_scenario(cfg)
    e = cfg["experiment"]
    data = an.simulate_dataset(sc.space, sc.design, sc.target, sc.noise, int(e["n"]), int(e["seed"]))
    out = Output(cfg, "simulate", sc.name)
    cols = ["x"] if sc.space.dim == 1 else [f"x{i + 1}" for i in range(sc.space.dim)]
    write_csv(out.path(".csv"), cols + ["y"], [list(map(float, x)) + [float(y)] for x, y in zip(data.xs, data.ys)])
    print(f"wrote {data.n} rows")
    return OK


REPLICATE_HEADER = ["n", "rep", "j", "h_j", "risk", "pen", "criterion", "selected", "ise", "sup"]


def _replicate_rows(sc, records):
    rows = []
    for r in records:
        for j, risk, p, c in zip(r["levels"], r["risks"], r["penalties"], r["criteria"]):
            rows.append([r["n"], r["rep"], j, float(sc.hierarchy.bandwidth(j)), _finite(risk), float(p),
                         _finite(c), int(j == r["j_hat"]), r["ise"], r["sup"]])
    return rows


def _finite(v):
    return float(v) if math.isfinite(v) else None


def cmd_rates(cfg, args):
    sc = build_scenario(cfg)
    e = cfg["experiment"]
    records = []
    fit = an.rate_experiment(sc, e["n_grid"], int(e["replicates"]), int(e["seed"]), int(e["jobs"]), records)
    out = Output(cfg, "rates", sc.name)
    dump_json(out.path(".json"), bundle(cfg, "rates", {"scenario": sc.describe(), "rate": fit.to_dict()}))
    write_csv(out.path("_replicates.csv"), REPLICATE_HEADER, _replicate_rows(sc, records))
    write_csv(out.path("_plot.csv"), ["n", "mise", "se", "fitted"],
              [[r["n"], r["mise"], r["se"], r["fitted"]] for r in fit.plot_rows()])
    print(f"slope = {fit.slope:.4f} +- {fit.slope_se:.4f} (expected {fit.expected_slope:.4f})")
    return OK


def cmd_oracle(cfg, args):
    sc = build_scenario(cfg)
    e = cfg["experiment"]
    reports, records = [], []
    for n in e["n_grid"]:
        rep = an.oracle_experiment(sc, int(n), int(e["replicates"]), int(e["seed"]), int(e["jobs"]), records)
        reports.append(rep.to_dict())
        print(f"n = {n}: achieved {rep.achieved_risk:.4g}, oracle {rep.oracle_value:.4g}, ratio {rep.ratio:.4g}")
    out = Output(cfg, "oracle", sc.name)
    dump_json(out.path(".json"), bundle(cfg, "oracle", {"scenario": sc.describe(), "reports": reports}))
    write_csv(out.path("_replicates.csv"), REPLICATE_HEADER, _replicate_rows(sc, records))
    return OK


def cmd_orbit_dim(cfg, args):
    space = build_space(cfg["space"])
    action = build_action(cfg["action"], space.dim)
    e = cfg["experiment"]
    if int(e["starts"]) > 1:
        summary, reports = sp.orbital_dimension_multistart(
            space, action, int(e["starts"]), int(e["seed"]), e["radii"], int(e["n_max"]))
        result = {"summary": summary.to_dict(), "starts": [r.to_dict() for r in reports]}
    else:
        x0 = e["x0"]
        if x0 is None:
            x0 = [lo if ax == "half_line" else lo + 0.1 * (hi - lo) for ax, (lo, hi) in zip(space.axes, space.bounds)]
        summary = sp.orbital_dimension(space, action, x0, e["radii"], int(e["n_max"]))
        result = {"summary": summary.to_dict(), "x0": x0}
    out = Output(cfg, "orbit-dim", action.name)
    dump_json(out.path(".json"), bundle(cfg, "orbit-dim", result))
    print(f"d_orb = {summary.d_orb:.4f}, d_eff = {summary.d_eff:.4f}, counts = {summary.covering_counts}")
    return OK


def cmd_twin_scan(cfg, args):
    space = build_space(cfg["space"])
    action = build_action(cfg["action"], space.dim)
    e = cfg["experiment"]
    if e["op"] not in BUILTIN_OPS:
        raise ConfigError(f"unknown operation {e['op']!r}; expected one of {sorted(BUILTIN_OPS)}")
    pairs = sample_pairs(space, int(e["pairs"]), int(e["seed"]))
    carrier = space if space.periodic.any() else None
    report = linear_subgroup_scan(BUILTIN_OPS[e["op"]], action, int(e["window"]), pairs, float(e["tol"]), carrier)
    out = Output(cfg, "twin-scan", f"{action.name}-{e['op']}")
    dump_json(out.path(".json"), bundle(cfg, "twin-scan", report.to_dict()))
    print(json.dumps(_clean(report.to_dict()), sort_keys=True, indent=2))
    return OK


def cmd_kraft(cfg, args):
    s, e = cfg["selection"], cfg["experiment"]
    scheme = CodeLengthScheme(s["scheme"])
    levels = list(range(int(e["kraft_levels"])))
    total = kraft_sum(scheme, levels)
    ok = total <= 1.0
    out = Output(cfg, "kraft", scheme.kind)
    dump_json(out.path(".json"), bundle(cfg, "kraft", {"scheme": scheme.kind, "levels": levels,
                                                       "kraft_sum": total, "satisfied": ok}))
    print(f"Kraft sum over levels 0..{levels[-1]} ({scheme.kind} scheme) = {total:.4f}")
    print("OK: Kraft inequality holds" if ok else "VIOLATION: Kraft inequality fails (sum > 1)")
    return OK


COMMANDS = {
    "check-kernel": (cmd_check_kernel, "validate the base kernel profile"),
    "fit": (cmd_fit, "select a level and predict on the quadrature grid"),
    "select": (cmd_select, "run penalized level selection on a dataset"),
    "simulate": (cmd_simulate, "draw a dataset from a built-in scenario"),
    "rates": (cmd_rates, "Monte Carlo MISE rate experiment"),
    "oracle": (cmd_oracle, "achieved risk against the bias-penalty oracle"),
    "orbit-dim": (cmd_orbit_dim, "orbital and effective dimension of the action"),
    "twin-scan": (cmd_twin_scan, "scan powers for the linear subgroup of an operation"),
    "kraft": (cmd_kraft, "audit the Kraft sum of a code-length scheme"),
}

DATA_COMMANDS = ("fit", "select")


def build_parser():
    parser = argparse.ArgumentParser(prog="twinkernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        if name in DATA_COMMANDS:
            p.add_argument("data", help="CSV file with columns x (or x1..xd) and y")
        p.add_argument("-c", "--config", help="YAML run configuration")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config value (repeatable; YAML-parsed)")
        p.add_argument("--seed", type=int, help="experiment seed")
        p.add_argument("--jobs", type=int, help="worker processes for replicate fan-out")
        p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./results)")
        p.add_argument("--print-config", action="store_true", help="echo the resolved config as JSON and exit")
    return parser


INPUT_ERRORS = (ConfigError, DataFormatError, LengthMismatchError, EmptyInputError, NegativeLevelError,
                PowerOverflowError)
NUMERIC_ERRORS = (ZeroDenominatorError, DegenerateFitError, ZeroMassError, CarrierEscapeError,
                  FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        cfg = resolve_config(args.config, args.set, args.seed, args.jobs, args.out)
        if args.print_config:
            print(json.dumps(_clean(cfg), sort_keys=True, indent=2))
            return OK
        t0 = time.perf_counter()
        status = func(cfg, args)
        elapsed = time.perf_counter() - t0
        out = Output(cfg, "timings", args.command)
        runtime = {f"{sec}.{key}": cfg[sec][key] for sec, key in RUNTIME_KEYS}
        dump_json(out.path(".json"), {"command": args.command, "seconds": elapsed, "runtime": runtime})
        return status
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT


if __name__ == "__main__":
    sys.exit(main())
