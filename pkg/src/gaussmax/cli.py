"""Command-line front end: ``gaussmax <subcommand> [options]``.

Every subcommand prints a CSV table to stdout (floats with 9 significant
digits).  With ``--out-dir`` the table is also written to ``<subcommand>.csv``
next to a ``manifest.json`` echoing the resolved configuration.

Exit codes: 0 success, 1 validation error, 2 runtime error, 3 soft flag
(non-converged extrapolation, too few tail hits, failed acceptance criterion)
escalated by ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, limits
from .errors import ConfigError, GaussMaxError
from .model import CovarianceModel, GridSpec, Horizon

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_SOFT = 0, 1, 2, 3
GLOBAL_KEYS = ("seed", "threads", "out_dir", "work_cap", "strict")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ----------------------------------------------------------------------------
# value parsing


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) == 1:
        return vals[0], vals[0]
    if len(vals) != 2:
        raise ConfigError(f"expected one or two numbers, got {text!r}")
    return vals[0], vals[1]


def _points(text) -> list[tuple[float, float]]:
    if isinstance(text, list):
        return [tuple(float(v) for v in p) for p in text]
    out = []
    for item in str(text).split(","):
        try:
            x, y = item.split(":")
            out.append((float(x), float(y)))
        except ValueError:
            raise ConfigError(f"points must look like 'x:y,x:y', got {text!r}") from None
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.9g}"
    if v is None:
        return ""
    return str(v)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


# ----------------------------------------------------------------------------
# subcommands


def _model(o) -> CovarianceModel:
    return CovarianceModel(o["alpha1"], o["alpha2"], o.get("r", 0.0))


def cmd_simulate_field(o):
    from .fieldsim import simulate_strong_field

    model = _model(o)
    T1, T2 = _pair(o["T"])
    dx = o["dx"]
    dy = o.get("dy") or dx
    sample = simulate_strong_field(model, Horizon(T1, T2), dx, dy, o["seed"])
    if o.get("dump"):
        Path(o["dump"]).write_bytes(sample.to_bytes())
    v = sample.values
    row = {"nx": sample.nx, "ny": sample.ny, "dx": sample.dx, "dy": sample.dy, "seed": sample.seed,
           "common_shift": float(sample.common_shift), "max": float(v.max()),
           "min": float(v.min()), "mean": float(v.mean()), "variance": float(v.var())}
    return _csv(list(row), [row]), False


PICKANDS_COLUMNS = ("kind", "alpha1", "alpha2", "a1", "a2", "x", "y", "lambda1", "lambda2",
                    "dt", "reps", "value", "stderr", "converged")


def cmd_estimate_pickands(o):
    from .pickands import estimate_H_a_alpha, estimate_H_alpha, estimate_joint_constant, extrapolate

    kind, alpha, reps, seed = o["kind"], o["alpha"], o["reps"], o["seed"]
    common = {"threads": o["threads"], "work_cap": o["work_cap"], "method": o["method"]}
    lams = _floats(o["lambda"])
    dt = o.get("dt")
    rows, ests = [], []
    for lam in lams:
        if kind == "continuous":
            e = estimate_H_alpha(alpha, lam, dt if dt else 1 / 64, reps, seed, **common)
            row = {"alpha1": alpha, "lambda1": lam}
        elif kind == "discrete":
            if o.get("a") is None:
                raise ConfigError("--a is required for the discrete constant")
            e = estimate_H_a_alpha(alpha, o["a"], lam, reps, seed, dt=dt, **common)
            row = {"alpha1": alpha, "a1": o["a"], "lambda1": lam}
        elif kind == "joint":
            a1, a2 = o.get("a"), o.get("a2") or o.get("a")
            if a1 is None:
                raise ConfigError("--a is required for the joint constant")
            alpha2 = o.get("alpha2") or alpha
            lam2 = o.get("lambda2") or lam
            dt1 = dt if dt else a1 / 8
            dt2 = o.get("dt2") or (dt if dt else a2 / 8)
            e = estimate_joint_constant(alpha, alpha2, a1, a2, o["x"], o["y"], lam, lam2, dt1, dt2,
                                        reps, seed, **common)
            row = {"alpha1": alpha, "alpha2": alpha2, "a1": a1, "a2": a2, "x": o["x"], "y": o["y"],
                   "lambda1": lam, "lambda2": lam2}
        else:
            raise ConfigError(f"kind must be continuous, discrete or joint, got {kind!r}")
        row.update(kind=kind, dt=e.dt if isinstance(e.dt, float) else e.dt[0], reps=e.reps,
                   value=e.value, stderr=e.stderr)
        rows.append(row)
        ests.append(e)
    soft = False
    if len(ests) >= 3:
        ex = extrapolate(ests)
        rows[-1]["converged"] = ex.converged
        soft = not ex.converged
    return _csv(PICKANDS_COLUMNS, rows), soft


def cmd_eval_limit(o):
    rows = []
    regime, r = o["regime"], o["r"]
    joint = o.get("joint")
    for x in _floats(o["x"]):
        for y in _floats(o["y"]) if o.get("y") is not None else [math.inf]:
            if regime == "marginal":
                value, nodes = limits.limit_cdf_marginal_nodes(x, r)
            else:
                value, nodes = limits.evaluate_limit(limits.LimitQuery(x, y, r, regime, joint))
            rows.append({"regime": regime, "r": r, "x": x, "y": y, "value": value, "nodes_used": nodes})
    return _csv(limits.CDF_COLUMNS, rows), False


EXPERIMENT_COLUMNS = ("label", "T1", "T2", "x", "y", "empirical_joint", "theoretical", "abs_err",
                      "empirical_x", "empirical_y", "dependence", "dependence_se",
                      "ks_marginal_continuous", "ks_marginal_grid", "reps", "seed")


def _experiment_config(o):
    from .experiments import ExperimentConfig

    base = dict(o.get("experiment") or {})
    if o.get("alpha1") is not None:
        base["model"] = {"alpha1": o["alpha1"], "alpha2": o.get("alpha2") or o["alpha1"],
                         "r": o.get("r") or 0.0}
    if o.get("T") is not None:
        base["horizon"] = _floats(o["T"])
    if o.get("regime") is not None or o.get("p1") is not None or o.get("a1") is not None:
        grid = dict(base.get("grid") or {})
        for key in ("regime", "p1", "p2", "a1", "a2"):
            if o.get(key) is not None:
                grid[key] = o[key]
        if grid.get("p2") is None and grid.get("p1") is not None:
            grid["p2"] = grid["p1"]
        if grid.get("a2") is None and grid.get("a1") is not None:
            grid["a2"] = grid["a1"]
        base["grid"] = grid
    for key in ("fine_dx", "fine_dy", "reps", "max_proxy"):
        if o.get(key) is not None:
            base[key] = o[key]
    if o.get("points") is not None:
        base["eval_points"] = _points(o["points"])
    base["seed"] = o["seed"]
    base["work_cap"] = o["work_cap"]
    return ExperimentConfig.from_dict(base)


def cmd_run_experiment(o):
    from .experiments import run_joint_experiment

    cfg = _experiment_config(o)
    res = run_joint_experiment(cfg, threads=o["threads"])
    rows = [{**r, "label": res.label} for r in res.table()]
    return _csv(EXPERIMENT_COLUMNS, rows), False


TAIL_COLUMNS = ("u", "empirical_p", "predicted_p", "ratio", "ratio_low", "ratio_high", "hits",
                "too_few_hits", "grid_empirical_p", "grid_predicted_p", "grid_ratio")


def cmd_tail_check(o):
    from .experiments import tail_ratio_check

    grid = None
    if o.get("p1") is not None:
        grid = GridSpec(o["p1"], o.get("p2") or o["p1"], "sparse")
    dx = o["fine_dx"]
    rows = tail_ratio_check(_model(o), _pair(o["box"]), _floats(o["u"]), dx, o.get("fine_dy") or dx,
                            o["reps"], o["seed"], grid=grid, max_proxy=o["max_proxy"] or "lattice",
                            threads=o["threads"], work_cap=o["work_cap"])
    return _csv(TAIL_COLUMNS, [asdict(r) for r in rows]), any(r.too_few_hits for r in rows)


def cmd_dense_study(o):
    from .experiments import dense_difference_study

    study = dense_difference_study(_model(o), _pair(o["box"]), o["u"], _floats(o["a"]), o["fine_dx"],
                                   o["reps"], o["seed"], threads=o["threads"], work_cap=o["work_cap"])
    rows = [{**asdict(r), "monotone": study.monotone} for r in study.rows]
    return _csv(("a", "diff", "stderr", "stride", "monotone"), rows), False


def cmd_repro(o):
    from .acceptance import CRITERIA, run_criterion

    numbers = [int(v) for v in _floats(o["only"])] if o.get("only") else sorted(CRITERIA)
    unknown = set(numbers) - set(CRITERIA)
    if unknown:
        raise ConfigError(f"unknown criteria {sorted(unknown)}")
    rows = []
    for n in numbers:
        res = run_criterion(n, threads=o["threads"])
        print(res.line(), file=sys.stderr)
        rows.append({"criterion": n, "title": res.title, "passed": res.passed, "detail": res.detail})
    return _csv(("criterion", "title", "passed", "detail"), rows), not all(r["passed"] for r in rows)


# ----------------------------------------------------------------------------
# parser


def _add_model(p, r=True):
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    if r:
        p.add_argument("--r", type=float)


SUBCOMMANDS = {
    "simulate-field": cmd_simulate_field,
    "estimate-pickands": cmd_estimate_pickands,
    "eval-limit": cmd_eval_limit,
    "run-experiment": cmd_run_experiment,
    "tail-check": cmd_tail_check,
    "dense-study": cmd_dense_study,
    "repro": cmd_repro,
}

DEFAULTS = {
    "simulate-field": {"alpha1": 1.0, "alpha2": 1.0, "r": 0.0, "T": "16", "dx": 0.25},
    "estimate-pickands": {"kind": "continuous", "alpha": 1.0, "lambda": "128", "reps": 10000,
                          "method": "normalized", "x": 0.0, "y": 0.0},
    "eval-limit": {"regime": "sparse", "r": 0.0, "x": "0"},
    "run-experiment": {},
    "tail-check": {"alpha1": 2.0, "alpha2": 2.0, "r": 0.0, "box": "1,1", "u": "3",
                   "fine_dx": 0.1, "reps": 10000, "max_proxy": "lattice"},
    "dense-study": {"alpha1": 2.0, "alpha2": 2.0, "r": 0.0, "box": "4,4", "u": 3.0,
                    "a": "0.5,0.25,0.125,0.0625", "fine_dx": 0.015625, "reps": 2000},
    "repro": {},
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="JSON file with option values; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--out-dir")
    g.add_argument("--work-cap", type=float)
    g.add_argument("--strict", action="store_true", default=None)

    parser = _Parser(prog="gaussmax", description="Maxima of Gaussian random fields: "
                     "simulation, Pickands constants and limit laws.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-field", parents=[common], help="simulate one field and summarize it")
    _add_model(p)
    p.add_argument("--T", help="horizon edge, or T1,T2")
    p.add_argument("--dx", type=float)
    p.add_argument("--dy", type=float)
    p.add_argument("--dump", help="write the field as a GFLD binary dump")

    p = sub.add_parser("estimate-pickands", parents=[common], help="estimate a Pickands-type constant")
    p.add_argument("--kind", choices=("continuous", "discrete", "joint"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--a2", type=float)
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--lambda", help="window, or comma list of >= 3 windows for extrapolation")
    p.add_argument("--lambda2", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--dt2", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--method", choices=("normalized", "window"))

    p = sub.add_parser("eval-limit", parents=[common], help="evaluate a limit CDF")
    p.add_argument("--regime", choices=("sparse", "pickands", "dense", "marginal"))
    p.add_argument("--r", type=float)
    p.add_argument("--x", help="level or comma list")
    p.add_argument("--y", help="level or comma list")
    p.add_argument("--joint", type=float, help="joint constant at the shifted arguments")

    p = sub.add_parser("run-experiment", parents=[common], help="joint CDF experiment")
    _add_model(p)
    p.add_argument("--T", help="horizon or comma list of horizons (square boxes)")
    p.add_argument("--regime", choices=("sparse", "pickands", "dense"))
    for key in ("--p1", "--p2", "--a1", "--a2", "--fine-dx", "--fine-dy"):
        p.add_argument(key, type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--points", help="evaluation points 'x:y,x:y'")
    p.add_argument("--max-proxy", choices=("lattice", "quadratic"))

    p = sub.add_parser("tail-check", parents=[common], help="tail probability ratios on a small box")
    _add_model(p)
    p.add_argument("--box", help="h1,h2")
    p.add_argument("--u", help="comma list of levels")
    p.add_argument("--fine-dx", type=float)
    p.add_argument("--fine-dy", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--max-proxy", choices=("lattice", "quadratic"))

    p = sub.add_parser("dense-study", parents=[common], help="dense-grid difference study")
    _add_model(p)
    p.add_argument("--box", help="h1,h2")
    p.add_argument("--u", type=float)
    p.add_argument("--a", help="comma list of grid spacings")
    p.add_argument("--fine-dx", type=float)
    p.add_argument("--reps", type=int)

    p = sub.add_parser("repro", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", help="comma list of criterion numbers")
    return parser


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    cmd = args.command
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")}
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        file_cfg = {k.replace("-", "_"): v for k, v in file_cfg.items()}
    sub = parser._subparsers._group_actions[0].choices[cmd]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    if cmd == "run-experiment":
        from .experiments import ExperimentConfig

        exp = {k: file_cfg.pop(k) for k in list(file_cfg) if k in ExperimentConfig.KEYS and k not in known}
        if exp:
            file_cfg["experiment"] = exp
        known.add("experiment")
    unknown = set(file_cfg) - known
    if unknown:
        raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
    opts = {k: None for k in known}
    opts.update(DEFAULTS[cmd])
    opts.update({"seed": 0, "threads": os.cpu_count() or 1, "out_dir": None, "work_cap": None,
                 "strict": False})
    opts.update(file_cfg)
    opts.update(given)
    if opts["work_cap"] is not None:
        opts["work_cap"] = int(opts["work_cap"])
    return opts


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_help(sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    start = time.perf_counter()
    try:
        opts = _resolve(args, parser)
        text, soft = SUBCOMMANDS[args.command](opts)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"gaussmax: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GaussMaxError, ArithmeticError, MemoryError, OSError) as exc:
        print(f"gaussmax: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(text)
    if opts.get("out_dir"):
        out = Path(opts["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{args.command}.csv").write_text(text)
        config = {k: v for k, v in opts.items() if k not in ("out_dir",)}
        manifest = {"config": {"command": args.command, **config}, "seed": opts["seed"],
                    "version": __version__, "elapsed_s": time.perf_counter() - start}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if soft and opts.get("strict"):
        print("gaussmax: soft flag raised under --strict", file=sys.stderr)
        return EXIT_SOFT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
