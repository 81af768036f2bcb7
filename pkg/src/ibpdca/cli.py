"""Command line: ``ibpdca gen | solve | bench | plot``.

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
solve fails numerically.  Relative output paths are resolved against
``$IBPDCA_OUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import core
from .datagen import gen_instance
from .errors import IBPDCAError
from .instance_io import InstanceFormatError, load_csv_matrix, load_instance, save_instance
from .runner import METHODS, PROBLEMS, RunSpec, solve

log = logging.getLogger("ibpdca")

REPORT_VERSION = 1
CSV_HEADER = ["size", "method", "obj", "feas", "rec", "outer_iter", "ssn_iter",
              "time", "t0"]
OUT_DIR_ENV = "IBPDCA_OUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_path(path):
    path = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _clean(v):
    """JSON-safe scalar: NaN and infinities become null."""
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)
    _out_path(path).write_text(text + "\n")


# --------------------------------------------------------------------- gen

def cmd_gen(args):
    inst = gen_instance(args.m, args.n, args.s, args.seed)
    out = _out_path(args.out)
    save_instance(inst, out)
    print(out)
    return EXIT_OK


# ------------------------------------------------------------------- solve

def _trajectory_rows(report):
    return [{
        "k": r.k, "objective": r.objective_next, "elapsed": r.elapsed,
        "gamma": r.gamma, "criterion": r.criterion, "inner_iters": r.inner_iters,
        "cert_constructions": r.cert_constructions, "D_fwd": r.D_fwd,
        "sc_lhs": _clean(r.sc_lhs), "sc_rhs": _clean(r.sc_rhs),
        "delta_norm": r.delta_norm, "delta_scalar": r.delta_scalar,
        "violation": r.violation,
    } for r in report.trajectory]


def _report_dict(result, instance_label):
    spec = result.spec
    summary = {k: _clean(v) for k, v in result.summary().items()}
    return {
        "report_version": REPORT_VERSION,
        "instance": instance_label,
        "problem": spec.problem,
        "method": spec.method,
        "lambda": spec.lam if spec.problem == "l12reg" else None,
        "mu": spec.mu if spec.problem == "l12con" else None,
        "kappa": getattr(result.problem_obj, "kappa", None),
        "sigma": _clean(result.report.sigma),
        **summary,
        "trajectory": _trajectory_rows(result.report),
    }


def _load_config(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _spec_from(args, cfg):
    def pick(name, key=None):
        v = getattr(args, name, None)
        return cfg.get(key or name) if v is None else v
    method = pick("method")
    crit = pick("criterion")
    if method in (None, "ibpdca"):
        method = f"ibpdca-{(crit or 'sc1').lower()}"
    kw = {k: v for k, v in {
        "problem": pick("problem"), "method": method, "lam": pick("lam", "lambda"),
        "mu": pick("mu"), "nf": pick("nf"), "kappa_c": pick("kappa_c"),
        "sigma": pick("sigma"), "max_iter": pick("max_iter"),
    }.items() if v is not None}
    try:
        return RunSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _load_any(args):
    try:
        if args.instance:
            return load_instance(args.instance), str(args.instance)
        if args.csv_a and args.csv_b:
            return load_csv_matrix(args.csv_a, args.csv_b), str(args.csv_a)
    except (OSError, InstanceFormatError) as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError("give --instance or both --csv-a and --csv-b")


def cmd_solve(args):
    cfg = _load_config(args.config)
    spec = _spec_from(args, cfg)
    inst, label = _load_any(args)
    try:
        result = solve(inst, spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report = _report_dict(result, label)
    _dump_json(report, args.out)
    if args.trajectory:
        with open(_out_path(args.trajectory), "w", newline="") as fh:
            rows = report["trajectory"]
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
    print(f"{report['status']}: obj={report['objective']:.10g} "
          f"outer={report['outer_iter']} ssn={report['ssn_iter']}")
    return EXIT_OK


# ------------------------------------------------------------------- bench

def _parse_size(text):
    try:
        m, n, s = (int(t) for t in str(text).lower().split("x"))
    except ValueError:
        raise UsageError(f"size must look like MxNxS, got {text!r}") from None
    return m, n, s


def _bench_config(args):
    cfg = _load_config(args.config)
    problem = args.problem or cfg.get("problem", "l12reg")
    if problem not in PROBLEMS:
        raise UsageError(f"problem must be one of {PROBLEMS}")
    sizes = args.sizes or cfg.get("sizes") or []
    sizes = [tuple(s) if isinstance(s, (list, tuple)) else _parse_size(s) for s in sizes]
    if not sizes:
        raise UsageError("bench needs at least one size")
    default_methods = list(METHODS) if problem == "l12reg" else ["ibpdca-sc1", "ibpdca-sc2"]
    methods = args.methods or cfg.get("methods", default_methods)
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    if problem == "l12reg":
        params = [("lambda", v) for v in (args.lambdas or cfg.get("lambdas", [0.1]))]
    else:
        params = [("nf", v) for v in (args.nfs or cfg.get("nfs", [1.1]))]
    trials = args.trials if args.trials is not None else cfg.get("trials", 20)
    if trials < 1:
        raise UsageError("trials must be at least 1")
    return {
        "problem": problem, "sizes": sizes, "params": params, "methods": methods,
        "trials": int(trials),
        "base_seed": args.base_seed if args.base_seed is not None else cfg.get("base_seed", 0),
        "mu": cfg.get("mu", 0.95), "sigma": cfg.get("sigma"),
        "max_iter": args.max_iter or cfg.get("max_iter"),
    }


def _run_trial(problem, size, pname, pval, method, seed, cfg):
    inst = gen_instance(*size, seed)
    kw = {"lam": pval} if pname == "lambda" else {"nf": pval, "mu": cfg["mu"]}
    spec = RunSpec(problem=problem, method=method, sigma=cfg["sigma"],
                   max_iter=cfg["max_iter"], **kw)
    try:
        return solve(inst, spec), None
    except IBPDCAError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def cmd_bench(args):
    cfg = _bench_config(args)
    out_csv = _out_path(args.out)
    runs_dir = out_csv.parent / (out_csv.stem + "_runs")
    runs_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for size in cfg["sizes"]:
        for pname, pval in cfg["params"]:
            for method in cfg["methods"]:
                for t in range(cfg["trials"]):
                    jobs.append((size, pname, pval, method, cfg["base_seed"] + t))

    def work(job):
        size, pname, pval, method, seed = job
        return _run_trial(cfg["problem"], size, pname, pval, method, seed, cfg)

    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        outcomes = list(pool.map(work, jobs))

    cells = {}
    for job, (res, err) in zip(jobs, outcomes):
        size, pname, pval, method, seed = job
        key = (size, pname, pval, method)
        cells.setdefault(key, []).append((seed, res, err))
        tag = f"{'x'.join(map(str, size))}_{pname}{pval}_{method}_seed{seed}"
        if res is not None:
            _dump_json(_report_dict(res, f"gen:{size}:{seed}"), runs_dir / f"{tag}.json")
        else:
            _dump_json({"report_version": REPORT_VERSION, "status": "failed",
                        "error": err, "seed": seed}, runs_dir / f"{tag}.json")
            log.warning("run %s failed: %s", tag, err)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    any_ok = False
    for (size, pname, pval, method), runs in cells.items():
        ok = [r for _, r, e in runs if r is not None]
        failed = len(runs) - len(ok)
        any_ok = any_ok or bool(ok)
        label = method if not failed else f"{method}[failed {failed}/{len(runs)}]"

        def mean(f):
            vals = [f(r) for r in ok]
            vals = [v for v in vals if v is not None and math.isfinite(v)]
            return f"{sum(vals) / len(vals):.6e}" if vals else "nan"
        w.writerow([
            f"{'x'.join(map(str, size))}/{pname}={pval}", label,
            mean(lambda r: r.report.objective), mean(lambda r: r.feas),
            mean(lambda r: r.rec), mean(lambda r: r.report.outer_iters),
            mean(lambda r: r.report.inner_iters), mean(lambda r: r.report.wall_time),
            mean(lambda r: r.t0)])
    out_csv.write_text(buf.getvalue())
    print(buf.getvalue(), end="")
    return EXIT_OK if any_ok else EXIT_NUMERIC


# -------------------------------------------------------------------- plot

def _svg(curves, width=640, height=400, pad=50):
    """Static log-scale polyline chart of ``{label: [(t, value), ...]}``."""
    floor = 1e-16
    pts = [(t, max(v, floor)) for c in curves.values() for t, v in c]
    tmax = max((t for t, _ in pts), default=1.0) or 1.0
    lo = math.floor(math.log10(min(v for _, v in pts)))
    hi = max(math.ceil(math.log10(max(v for _, v in pts))), lo + 1)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    def sx(t):
        return pad + (width - 2 * pad) * t / tmax

    def sy(v):
        return height - pad - (height - 2 * pad) * (math.log10(max(v, floor)) - lo) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
           f'y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for e in range(lo, hi + 1):
        y = sy(10.0 ** e)
        out.append(f'<text x="{pad - 6}" y="{y:.1f}" font-size="10" '
                   f'text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" font-size="12" '
               f'text-anchor="middle">time (s)</text>')
    out.append(f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" '
               f'text-anchor="end">{tmax:.3g}</text>')
    for i, (label, c) in enumerate(curves.items()):
        color = colors[i % len(colors)]
        poly = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in c)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{poly}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 14 * i}" font-size="11" '
                   f'fill="{color}" text-anchor="end">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def normalized_curves(reports):
    """``(F - Fmin) / (F0 - Fmin)`` against time, with one shared ``Fmin``."""
    if not reports:
        raise UsageError("plot needs at least one report")
    fmin = min(r["objective"] for _, r in reports)
    curves = {}
    for label, r in reports:
        scale = r["objective0"] - fmin
        scale = scale if scale > 0 else 1.0
        c = [(0.0, (r["objective0"] - fmin) / scale)]
        c += [(row["elapsed"], (row["objective"] - fmin) / scale)
              for row in r["trajectory"]]
        curves[label] = c
    return curves


def cmd_plot(args):
    if not args.reports:
        raise UsageError("plot needs at least one report")
    reports = []
    for path in args.reports:
        try:
            r = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read report {path}: {exc}") from exc
        if r.get("report_version") != REPORT_VERSION:
            raise UsageError(f"{path}: unsupported report version")
        label = r.get("method", Path(path).stem)
        if any(label == lab for lab, _ in reports):
            label = f"{label} ({Path(path).stem})"
        reports.append((label, r))
    curves = normalized_curves(reports)
    out = _out_path(args.out)
    out.write_text(_svg(curves))
    csv_path = _out_path(args.csv) if args.csv else out.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["report", "k", "time", "normalized_objective"])
        for label, c in curves.items():
            for k, (t, v) in enumerate(c):
                w.writerow([label, k, f"{t:.6e}", f"{v:.17g}"])
    print(out)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser():
    p = _Parser(prog="ibpdca", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic instance")
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--s", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance")
    s.add_argument("--csv-a")
    s.add_argument("--csv-b")
    s.add_argument("--config")
    s.add_argument("--problem", choices=PROBLEMS)
    s.add_argument("--method", choices=("ibpdca",) + METHODS)
    s.add_argument("--criterion", type=str.lower, choices=("sc1", "sc2"))
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--nf", type=float)
    s.add_argument("--kappa-c", dest="kappa_c", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--max-iter", type=_positive_int)
    s.add_argument("--out", default="report.json")
    s.add_argument("--trajectory", help="also write the trajectory as CSV")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark grid")
    b.add_argument("--config")
    b.add_argument("--problem", choices=PROBLEMS)
    b.add_argument("--sizes", nargs="+", type=_parse_size_arg)
    b.add_argument("--lambdas", nargs="+", type=float)
    b.add_argument("--nfs", nargs="+", type=float)
    b.add_argument("--methods", nargs="+", choices=METHODS)
    b.add_argument("--trials", type=int)
    b.add_argument("--base-seed", type=int)
    b.add_argument("--max-iter", type=_positive_int)
    b.add_argument("--workers", type=_positive_int, default=1)
    b.add_argument("--out", default="bench.csv")
    b.set_defaults(func=cmd_bench)

    pl = sub.add_parser("plot", help="plot normalized objective against time")
    pl.add_argument("reports", nargs="*")
    pl.add_argument("--out", default="plot.svg")
    pl.add_argument("--csv")
    pl.set_defaults(func=cmd_plot)
    return p


def _parse_size_arg(text):
    try:
        return _parse_size(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ibpdca: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IBPDCAError as exc:
        print(f"ibpdca: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
