"""Command-line interface: ``subcusum <command> [options]``.

Every command accepts ``--config FILE`` (a JSON object).  Its fields fill in
options that were not given on the command line, and built-in defaults fill
in the rest.  The effective settings are echoed into each JSON output.

Exit status is 0 on success, 1 when a computation fails (for example a
calibration that cannot reach its target), and 2 for usage or configuration
errors.
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import (CalibrationSpec, drift_delta, estimate_edd, find_threshold)
from .detectors import (DETECTOR_NAMES, EigenChartConfig, ExactCusumConfig, GLRConfig,
                        HotellingConfig, SubspaceCusumConfig, with_threshold)
from .errors import InvalidInput, ParseError, SubcusumError
from .ingest import (NORMALIZATIONS, SWARM_DETECTORS, preprocess, read_swarm_csv,
                     run_swarm_detectors, scale_01, synthetic_swarm, write_swarm_csv)
from .model import DEFAULT_SUBSPACE_SEED, NEVER, SCENARIOS, SeededStream, derive_seed, scenario_library
from .svg import line_chart

DEFAULT_SEED = 2024
DEFAULT_RHO_MIN = 0.5

# Threshold search brackets at sigma2 = 1; they scale with sigma2.
BRACKETS = {
    "exact-cusum": (1.0, 50.0),
    "subspace-cusum": (1.0, 80.0),
    "eigchart": (1.0, 8.0),
    "glr": (1.0, 100.0),
}

COMMON = {"seed": DEFAULT_SEED, "jobs": 1}
DEFAULTS = {
    "simulate": {"scenario": "rank1-dense", "k": 5, "d": 1, "sigma2": 1.0, "lam": 1.0,
                 "tau": 0, "n": 1000, "subspace_seed": DEFAULT_SUBSPACE_SEED, "out": "stream.csv"},
    "calibrate": {"detector": "subspace-cusum", "k": 5, "d": 2, "w": 20, "sigma2": 1.0,
                  "drift": None, "rho_min": DEFAULT_RHO_MIN, "solver": "lapack",
                  "scenario": "rankd-uniform", "lam": 1.0, "subspace_seed": DEFAULT_SUBSPACE_SEED,
                  "target_arl": 5000.0, "reps": 1000, "rtol": 0.05, "b_lo": None, "b_hi": None,
                  "grid": None, "grid_out": "calibration_grid.csv", "out": "calibration.json"},
    "edd": {"detector": "subspace-cusum", "scenario": "rankd-uniform", "k": 5, "d": 2,
            "sigma2": 1.0, "lam": 1.0, "tau": 0, "w": 50, "drift": None,
            "rho_min": DEFAULT_RHO_MIN, "solver": "lapack", "threshold": None, "auto": False,
            "target_arl": 5000.0, "reps": 1000, "rtol": 0.05, "b_lo": None, "b_hi": None,
            "subspace_seed": DEFAULT_SUBSPACE_SEED, "out": "edd.csv"},
    "detect": {"detector": "subspace-cusum", "input": None, "k": None, "d": 1, "w": 20,
               "sigma2": 1.0, "drift": None, "rho_min": DEFAULT_RHO_MIN, "solver": "jacobi",
               "threshold": None, "scenario": "rank1-dense", "lam": 1.0,
               "subspace_seed": DEFAULT_SUBSPACE_SEED, "U": None, "rho": None,
               "out_dir": "."},
    "swarm": {"input": None, "detectors": "subspace-cusum,eigchart", "window": 40, "d": 2,
              "drift": None, "rho_min": DEFAULT_RHO_MIN, "normalization": "rms",
              "thresholds": None, "out_dir": "."},
    "synth-swarm": {"agents": 10, "frames": 600, "change": 300, "alignment": 0.6,
                    "out": "swarm.csv"},
    "plot": {"input": None, "x": None, "y": None, "logx": False, "title": None,
             "out": "plot.svg"},
}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ output

def _num(v):
    """Full-precision decimal text for CSV cells; blank for missing values."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([c if isinstance(c, str) else _num(c) for c in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def _json_text(doc):
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# ------------------------------------------------------------------ options

def _echo(opts):
    """Options as recorded in outputs; the thread count does not affect
    results and is left out so outputs match across thread counts."""
    return {k: v for k, v in opts.items() if k != "jobs"}


def _merge(command, args):
    """Defaults < config file < explicit flags."""
    opts = {**COMMON, **DEFAULTS[command]}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in doc.items():
            name = key.replace("-", "_")
            if name not in opts:
                raise UsageError(f"config file: unknown field {key!r}")
            opts[name] = value
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        opts[key] = value
    return opts


def _int(opts, name, lo=None):
    try:
        v = opts[name]
        if isinstance(v, bool) or int(v) != float(v):
            raise ValueError
        v = int(v)
    except (TypeError, ValueError):
        raise UsageError(f"field {name!r} must be an integer, got {opts[name]!r}") from None
    if lo is not None and v < lo:
        raise UsageError(f"field {name!r} must be at least {lo}, got {v}")
    return v


def _float(opts, name, positive=False):
    try:
        v = float(opts[name])
    except (TypeError, ValueError):
        raise UsageError(f"field {name!r} must be a number, got {opts[name]!r}") from None
    if positive and not v > 0:
        raise UsageError(f"field {name!r} must be positive, got {v}")
    return v


def _choice(opts, name, choices):
    if opts[name] not in choices:
        raise UsageError(f"field {name!r} must be one of {', '.join(choices)}, got {opts[name]!r}")
    return opts[name]


def _threshold(opts):
    b = opts.get("threshold")
    if b is None or (isinstance(b, str) and b.lower() in ("inf", "none")):
        return math.inf
    return _float(opts, "threshold")


def _scenario(opts, tau=None):
    name = _choice(opts, "scenario", SCENARIOS)
    tau = opts.get("tau", 0) if tau is None else tau
    if isinstance(tau, str) and tau == "inf":
        tau = NEVER
    elif tau != NEVER:
        tau = _int({"tau": tau}, "tau", 0)
    try:
        return scenario_library(name, _int(opts, "k", 1), _int(opts, "d", 1),
                                _float(opts, "sigma2", True), _float(opts, "lam", True), tau,
                                _int(opts, "subspace_seed"))
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None


def _detector_config(opts, name, k, threshold=math.inf):
    """Detector configuration from merged options."""
    sigma2 = _float(opts, "sigma2", True)
    try:
        if name == "subspace-cusum":
            d = _int(opts, "d", 1)
            drift = opts.get("drift")
            drift = (drift_delta(d, sigma2, _float(opts, "rho_min", True)) if drift is None
                     else _float(opts, "drift", True))
            return SubspaceCusumConfig(k, d, _int(opts, "w", 2), drift, threshold,
                                       _choice(opts, "solver", ("jacobi", "lapack")))
        if name == "eigchart":
            return EigenChartConfig(k, _int(opts, "w", 1), threshold,
                                    _choice(opts, "solver", ("jacobi", "lapack")))
        if name == "hotelling":
            return HotellingConfig(k, sigma2, threshold)
        if name == "glr":
            return GLRConfig(k, _int(opts, "d", 1), sigma2, threshold)
        if name == "exact-cusum":
            if opts.get("U") is not None:
                U = np.asarray(opts["U"], float)
                rho = opts.get("rho")
                if rho is None:
                    raise UsageError("field 'rho' is required together with 'U'")
                return ExactCusumConfig(sigma2, U, rho, threshold)
            post = _scenario(dict(opts, k=k)).post
            return ExactCusumConfig.from_model(post, threshold)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"field 'detector' must be one of {', '.join(DETECTOR_NAMES)}, got {name!r}")


def _bracket(opts, name, k, sigma2):
    if name == "hotelling":
        lo, hi = float(k), float(k) + 10.0 * math.sqrt(k) + 40.0
    else:
        lo, hi = BRACKETS[name]
        lo, hi = lo * sigma2, hi * sigma2
    if opts.get("b_lo") is not None:
        lo = _float(opts, "b_lo")
    if opts.get("b_hi") is not None:
        hi = _float(opts, "b_hi")
    return lo, hi


def _calibrate(opts, config, sigma2, seed):
    lo, hi = _bracket(opts, config.kind, config.k, sigma2)
    try:
        spec = CalibrationSpec(config, _float(opts, "target_arl", True), _int(opts, "reps", 100),
                               lo, hi, _float(opts, "rtol", True), seed, sigma2,
                               _int(opts, "jobs", 1))
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    return find_threshold(spec)


def _subseed(seed, i):
    return int(derive_seed(seed, i).generate_state(1)[0])


# ------------------------------------------------------------------ commands

def cmd_simulate(opts):
    scen = _scenario(opts)
    n = _int(opts, "n", 1)
    seed = _int(opts, "seed")
    X = SeededStream(scen, seed).take(n)
    header = ["t"] + [f"x_{i}" for i in range(1, scen.k + 1)]
    rows = ([t] + list(x) for t, x in zip(range(1, n + 1), X))
    out = _write(opts["out"], _csv_text(header, rows))
    side = {"command": "simulate", "options": _echo(opts), "scenario": scen.to_dict(), "seed": seed}
    _write(out.with_suffix(".json"), _json_text(side))
    return f"wrote {n} observations to {out}"


def _calibration_row(opts, k, d, sigma2, w):
    local = dict(opts, k=k, d=d, sigma2=sigma2, w=w)
    name = _choice(local, "detector", DETECTOR_NAMES)
    config = _detector_config(local, name, k)
    result = _calibrate(local, config, sigma2, _int(local, "seed"))
    return config, result


def cmd_calibrate(opts):
    if opts.get("grid"):
        try:
            grid = json.loads(Path(opts["grid"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read grid file: {exc}") from None
        if not isinstance(grid, dict):
            raise UsageError("grid file must hold a JSON object")
        axes = {}
        for name in ("k", "d", "sigma2", "w"):
            values = grid.get(name, [opts[name]])
            axes[name] = values if isinstance(values, list) else [values]
        unknown = set(grid) - set(axes)
        if unknown:
            raise UsageError(f"grid file: unknown field(s) {', '.join(sorted(unknown))}")
        rows, results = [], []
        for k in axes["k"]:
            for d in axes["d"]:
                for sigma2 in axes["sigma2"]:
                    for w in axes["w"]:
                        _, res = _calibration_row(opts, k, d, sigma2, w)
                        rows.append([k, d, sigma2, w, res.threshold, res.arl])
                        results.append({"k": k, "d": d, "sigma2": sigma2, "w": w,
                                        **res.to_dict()})
        path = _write(opts["grid_out"], _csv_text(["k", "d", "sigma2", "w", "b", "arl"], rows))
        _write(opts["out"], _json_text({"command": "calibrate", "options": _echo(opts),
                                         "results": results}))
        return f"wrote {len(rows)} calibrated thresholds to {path}"
    config, res = _calibration_row(opts, _int(opts, "k", 1), _int(opts, "d", 1),
                                   _float(opts, "sigma2", True), _int(opts, "w", 1))
    doc = {"command": "calibrate", "options": _echo(opts), "config": config.to_dict(),
           "result": res.to_dict()}
    _write(opts["out"], _json_text(doc))
    return f"threshold {res.threshold!r} gives ARL {res.arl:.1f} (SE {res.std_error:.1f})"


def cmd_edd(opts):
    names = [s.strip() for s in str(opts["detector"]).split(",") if s.strip()]
    for name in names:
        _choice({"detector": name}, "detector", DETECTOR_NAMES)
    explicit = opts.get("threshold") is not None
    if explicit == bool(opts.get("auto")):
        raise UsageError("give exactly one of --threshold or --auto")
    if explicit and len(names) > 1:
        raise UsageError("--threshold applies to a single detector; use --auto for several")
    seed = _int(opts, "seed")
    scen = _scenario(opts)
    sigma2 = scen.post.sigma2
    rows, results = [], []
    for i, name in enumerate(names):
        config = _detector_config(opts, name, scen.k)
        calib = None
        if explicit:
            b = _threshold(opts)
        else:
            calib = _calibrate(opts, config, sigma2, _subseed(seed, 2 * i))
            b = calib.threshold
        res = estimate_edd(with_threshold(config, b), b, scen, _int(opts, "reps", 1),
                           seed=_subseed(seed, 2 * i + 1), n_jobs=_int(opts, "jobs", 1))
        rows.append([scen.k, scen.post.d, sigma2, name, b, res.edd, res.std_error])
        results.append({"detector": name, "threshold": b, "config": config.to_dict(),
                        "calibration": None if calib is None else calib.to_dict(),
                        "delay": res.to_dict()})
    path = _write(opts["out"], _csv_text(["k", "d", "sigma2", "detector", "threshold", "edd", "se"],
                                         rows))
    _write(path.with_suffix(".json"), _json_text({"command": "edd", "options": _echo(opts),
                                                  "scenario": scen.to_dict(),
                                                  "results": results}))
    return "\n".join(f"{r[3]}: EDD {r[5]:.2f} (SE {r[6]:.2f}) at b={r[4]!r}" for r in rows)


def _read_stream_csv(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError("empty file", 1)
            header = [h.strip() for h in header]
            k = len(header) - 1
            expected = ["t"] + [f"x_{i}" for i in range(1, k + 1)]
            if k < 1 or header != expected:
                raise ParseError("header must be t, x_1, ..., x_k", 1)
            rows = []
            for row_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != k + 1:
                    raise ParseError(f"expected {k + 1} cells, found {len(row)}", row_no)
                try:
                    rows.append([float(c) for c in row[1:]])
                except ValueError:
                    raise ParseError("non-numeric cell", row_no) from None
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    return np.array(rows, float).reshape(-1, k)


def cmd_detect(opts):
    if not opts.get("input"):
        raise UsageError("--input is required")
    X = _read_stream_csv(opts["input"])
    k = X.shape[1]
    if opts.get("k") is not None and _int(opts, "k", 1) != k:
        raise UsageError(f"input has {k} columns but the configuration says k={opts['k']}")
    name = _choice(opts, "detector", DETECTOR_NAMES)
    config = _detector_config(opts, name, k, _threshold(opts))
    if config.k != k:
        raise UsageError(f"input has {k} columns but the detector expects {config.k}")
    report = config.build().run(X, stop_at_alarm=False)
    out = Path(opts["out_dir"])
    _write(out / "trajectory.csv", report.to_csv())
    doc = {"command": "detect", "options": _echo(opts), "config": config.to_dict(), **report.to_dict()}
    _write(out / "report.json", _json_text(doc))
    when = "no alarm" if report.alarm_time is None else f"alarm at t={report.alarm_time}"
    return f"{when}; results in {out}"


def _parse_thresholds(text):
    out = {}
    for item in filter(None, (s.strip() for s in str(text or "").split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"thresholds: expected name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise UsageError(f"thresholds: {value!r} is not a number") from None
    return out


def cmd_swarm(opts):
    if not opts.get("input"):
        raise UsageError("--input is required")
    names = [s.strip() for s in str(opts["detectors"]).split(",") if s.strip()]
    if not names:
        raise UsageError("no detectors requested")
    for name in names:
        _choice({"detector": name}, "detector", SWARM_DETECTORS)
    norm = _choice(opts, "normalization", NORMALIZATIONS)
    thresholds = _parse_thresholds(opts.get("thresholds"))
    try:
        frames = read_swarm_csv(opts["input"])
    except OSError as exc:
        raise UsageError(f"cannot read {opts['input']}: {exc}") from None
    features = preprocess(frames, norm)
    drift = None if opts.get("drift") is None else _float(opts, "drift", True)
    try:
        sigma2, runs = run_swarm_detectors(features, names, _int(opts, "window", 2),
                                           _int(opts, "d", 1), _float(opts, "rho_min", True),
                                           drift, thresholds)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    index = [f.frame_index for f in frames]
    scaled = [scale_01(r.statistics) for r in runs]
    out = Path(opts["out_dir"])
    rows = ([index[i]] + [s[i] for s in scaled] for i in range(len(index)))
    _write(out / "swarm_scaled.csv", _csv_text(["frame"] + names, rows))
    series = [(n, index, s) for n, s in zip(names, scaled)]
    _write(out / "swarm.svg", line_chart(series, "frame", "scaled statistic",
                                         title="Detection statistics (scaled to 0-1)"))
    alarms = {r.name: (None if r.alarm_index is None else index[r.alarm_index - 1])
              for r in runs}
    doc = {"command": "swarm", "options": _echo(opts), "frames": len(frames), "agents": frames[0].n,
           "dimension": features.shape[1], "noise_variance": sigma2,
           "detectors": [r.config for r in runs], "alarm_frames": alarms}
    _write(out / "swarm.json", _json_text(doc))
    return "\n".join(f"{n}: alarm at frame {a}" if a is not None else f"{n}: no alarm"
                     for n, a in alarms.items())


def cmd_synth_swarm(opts):
    try:
        frames = synthetic_swarm(_int(opts, "agents", 1), _int(opts, "frames", 1),
                                 _int(opts, "change", 0), _float(opts, "alignment"),
                                 seed=_int(opts, "seed"))
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    path = Path(opts["out"])
    path.parent.mkdir(parents=True, exist_ok=True)
    write_swarm_csv(path, frames)
    return f"wrote {len(frames)} frames to {opts['out']}"


def _read_columns(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            fields = reader.fieldnames or []
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    cols = {}
    for name in fields:
        vals = []
        for r in rows:
            cell = (r.get(name) or "").strip()
            try:
                vals.append(float(cell) if cell else math.nan)
            except ValueError:
                vals.append(math.nan)
        cols[name] = np.array(vals)
    return cols


def cmd_plot(opts):
    if not opts.get("input") or not opts.get("x") or not opts.get("y"):
        raise UsageError("--input, --x and --y are required")
    cols = _read_columns(opts["input"])
    ys = [s.strip() for s in str(opts["y"]).split(",") if s.strip()]
    for name in [opts["x"]] + ys:
        if name not in cols:
            raise UsageError(f"unknown column {name!r}; available: {', '.join(cols)}")
    series = [(name, cols[opts["x"]], cols[name]) for name in ys]
    try:
        svg = line_chart(series, opts["x"], ", ".join(ys) if len(ys) == 1 else "value",
                         logx=bool(opts["logx"]), title=opts.get("title"))
    except InvalidInput as exc:
        raise UsageError(str(exc)) from None
    path = _write(opts["out"], svg)
    return f"wrote {path}"


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "edd": cmd_edd,
    "detect": cmd_detect,
    "swarm": cmd_swarm,
    "synth-swarm": cmd_synth_swarm,
    "plot": cmd_plot,
}


# ------------------------------------------------------------------ parser

def _add(p, *flags, **kw):
    kw.setdefault("default", None)
    p.add_argument(*flags, **kw)


def build_parser():
    parser = argparse.ArgumentParser(prog="subcusum", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        _add(p, "--config", help="JSON file with option values")
        _add(p, "--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
        return p

    def scenario_opts(p):
        _add(p, "--scenario", help=f"one of {', '.join(SCENARIOS)}")
        _add(p, "--k", type=int, help="dimension")
        _add(p, "--d", type=int, help="spike rank")
        _add(p, "--sigma2", type=float, help="noise variance")
        _add(p, "--lam", type=float, help="spike strength")
        _add(p, "--subspace-seed", type=int, help="seed of the random spike subspace")

    def detector_opts(p):
        _add(p, "--detector", help=f"one of {', '.join(DETECTOR_NAMES)}")
        _add(p, "--w", type=int, help="window length")
        _add(p, "--drift", type=float, help="Subspace-CUSUM drift (default from --rho-min)")
        _add(p, "--rho-min", type=float, help="smallest SNR the drift should cover")
        _add(p, "--solver", choices=("jacobi", "lapack"), help="eigen-solver for windowed detectors")

    def search_opts(p):
        _add(p, "--target-arl", type=float, help="target average run length")
        _add(p, "--reps", type=int, help="Monte-Carlo replicates")
        _add(p, "--rtol", type=float, help="accepted relative ARL miss")
        _add(p, "--b-lo", type=float, help="lower end of the initial search bracket")
        _add(p, "--b-hi", type=float, help="upper end of the initial search bracket")
        _add(p, "--jobs", type=int, help="worker threads")

    p = command("simulate", "write a simulated observation stream as CSV")
    scenario_opts(p)
    _add(p, "--tau", type=int, help="change-point (samples 1..tau are pre-change)")
    _add(p, "--n", type=int, help="number of observations")
    _add(p, "--out", help="output CSV; a JSON sidecar is written next to it")

    p = command("calibrate", "find the threshold with a given ARL")
    scenario_opts(p)
    detector_opts(p)
    search_opts(p)
    _add(p, "--grid", help="JSON file with lists for k, d, sigma2, w")
    _add(p, "--grid-out", help="CSV for grid results")
    _add(p, "--out", help="output JSON")

    p = command("edd", "estimate expected detection delays")
    scenario_opts(p)
    detector_opts(p)
    search_opts(p)
    _add(p, "--tau", type=int, help="change-point")
    _add(p, "--threshold", help="fixed threshold (or 'inf')")
    p.add_argument("--auto", action="store_true", default=None,
                   help="calibrate the threshold to --target-arl first")
    _add(p, "--out", help="output CSV; a JSON sidecar is written next to it")

    p = command("detect", "run a detector over a CSV stream")
    scenario_opts(p)
    detector_opts(p)
    _add(p, "--input", help="CSV with columns t, x_1..x_k")
    _add(p, "--threshold", help="alarm threshold (or 'inf')")
    _add(p, "--out-dir", help="directory for report.json and trajectory.csv")

    p = command("swarm", "run detectors over swarm trajectories")
    _add(p, "--input", help="swarm CSV (frame, agent, x, y, vx, vy)")
    _add(p, "--detectors", help="comma-separated detector names")
    _add(p, "--window", type=int, help="window length for windowed detectors")
    _add(p, "--d", type=int, help="subspace rank")
    _add(p, "--drift", type=float, help="Subspace-CUSUM drift")
    _add(p, "--rho-min", type=float, help="smallest SNR the drift should cover")
    _add(p, "--normalization", choices=NORMALIZATIONS, help="feature scaling")
    _add(p, "--thresholds", help="comma-separated name=value alarm thresholds "
         "(Subspace-CUSUM defaults to 60 times the estimated noise variance)")
    _add(p, "--out-dir", help="output directory")

    p = command("synth-swarm", "write a synthetic swarm with an alignment change")
    _add(p, "--agents", type=int, help="number of agents")
    _add(p, "--frames", type=int, help="number of frames")
    _add(p, "--change", type=int, help="last frame before the change")
    _add(p, "--alignment", type=float, help="post-change weight of the shared heading")
    _add(p, "--out", help="output CSV")

    p = command("plot", "draw CSV columns as an SVG line chart")
    _add(p, "--input", help="CSV file")
    _add(p, "--x", help="x column")
    _add(p, "--y", help="comma-separated y columns")
    p.add_argument("--logx", action="store_true", default=None, help="logarithmic x axis")
    _add(p, "--title", help="chart title")
    _add(p, "--out", help="output SVG")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _merge(args.command, args)
        message = COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"subcusum {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"subcusum {args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except SubcusumError as exc:
        print(f"subcusum {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
