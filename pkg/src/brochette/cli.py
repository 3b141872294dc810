"""Command-line front end: ``brochette <command> [--config PATH] ...``.

Exit codes: 0 ok, 2 configuration or input error, 3 box cap exceeded,
4 a check failed (or a sweep row failed for another reason).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from typing import Optional, Sequence

from . import __version__
from .config import ConfigError, ExperimentConfig, header_lines, load_config, provenance
from .constructions import rho_trace
from .geodesic import BoxCapExceeded
from .sweep import (
    detour_instance,
    exponent_report,
    geodesic_document,
    parallel_map,
    read_records,
    resolve_threads,
    run_checks,
    run_sweep,
    weibull_check,
    write_records,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAP = 3
EXIT_CHECK = 4


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc, cfg: ExperimentConfig) -> str:
    body = {"provenance": provenance(cfg, __version__)}
    body.update(doc if isinstance(doc, dict) else {"rows": doc})
    return json.dumps(body, indent=2) + "\n"


def _csv_rows(rows: list[dict], cfg: ExperimentConfig, columns: Sequence[str]) -> str:
    buf = io.StringIO()
    for line in header_lines(cfg, __version__):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format(row[c], ".17g") if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    return cfg


def cmd_geodesic(args) -> int:
    cfg = _config(args)
    doc = geodesic_document(cfg, args.n, cfg.master_seed)
    if args.format == "csv":
        cols = ["n", "seed", "T", "H_max", "H_min", "dag_edge_count", "half_width", "touched_boundary", "retries"]
        _emit(_csv_rows([doc], cfg, cols), args.out)
    else:
        _emit(_json(doc, cfg), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.n_grid:
        cfg = cfg.replace(n_grid=tuple(args.n_grid))
    if args.replicates:
        cfg = cfg.replace(replicates=args.replicates)
    threads = resolve_threads(args.threads, cfg)
    records = run_sweep(cfg, threads)
    if args.format == "json":
        rows = [{k: getattr(r, k) for k in ("n", "replicate", "T", "H_max", "H_min", "half_width", "touched_boundary", "status")} for r in records]
        text = _json(rows, cfg)
    else:
        buf = io.StringIO()
        write_records(records, buf, cfg, timings=args.timings)
        text = buf.getvalue()
    _emit(text, args.out or cfg.out)
    failed = [r for r in records if not r.ok]
    if any(r.status == "cap_exceeded" for r in failed):
        return EXIT_CAP
    return EXIT_CHECK if failed else EXIT_OK


def cmd_exponent(args) -> int:
    header_cfg, records = read_records(args.csv)
    cfg = load_config(args.config) if args.config else header_cfg
    if cfg is None:
        raise ConfigError("CSV has no config header; pass --config")
    try:
        report = exponent_report(records, cfg, args.tolerance)
    except ValueError as exc:
        raise ConfigError(f"cannot fit {args.csv}: {exc}") from exc
    _emit(_json(report, cfg), args.out)
    return EXIT_CHECK if report["pass"] is False else EXIT_OK


def cmd_checks(args) -> int:
    cfg = _config(args)
    report = run_checks(cfg, resolve_threads(args.threads, cfg))
    _emit(_json(report, cfg), args.out)
    return EXIT_OK if report["pass"] else EXIT_CHECK


def cmd_rho_trace(args) -> int:
    cfg = _config(args)
    trace = rho_trace(cfg.environment(), args.R)
    if args.format == "csv":
        rows = [
            {"radius": int(r), "N": float(trace.N[i]), "boundary_T": float(trace.boundary_T[i]), "new_lines": trace.new_lines[i]}
            for i, r in enumerate(trace.radii)
        ]
        _emit(_csv_rows(rows, cfg, ["radius", "N", "boundary_T", "new_lines"]), args.out)
    else:
        _emit(_json(trace.as_dict(), cfg), args.out)
    return EXIT_OK


def cmd_detour(args) -> int:
    cfg = _config(args)
    grid = [args.n] if args.n is not None else sorted(cfg.n_grid)
    reps = args.replicates or cfg.replicates
    tasks = [(n, r) for n in grid for r in range(reps)]
    docs = parallel_map(lambda t: detour_instance(cfg, t[0], t[1], args.epsilon), tasks, resolve_threads(args.threads, cfg))
    summary = {
        "instances": len(docs),
        "events": sum(1 for d in docs if d.get("comparison_event")),
        "violations": sum(1 for d in docs if d.get("violation")),
        "degenerate": sum(1 for d in docs if d["status"] == "degenerate"),
    }
    if args.format == "csv":
        cols = ["n", "replicate", "status", "height_bound", "T_gamma1", "T_gamma2", "comparison_event", "H_max", "violation"]
        rows = [{c: d.get(c, "") for c in cols} for d in docs]
        _emit(_csv_rows(rows, cfg, cols), args.out)
    else:
        _emit(_json({"summary": summary, "rows": docs}, cfg), args.out)
    return EXIT_CHECK if summary["violations"] else EXIT_OK


def cmd_weibull(args) -> int:
    cfg = _config(args)
    changes = {}
    if args.m:
        changes["weibull_m"] = args.m
    if args.reps:
        changes["weibull_reps"] = args.reps
    if changes:
        cfg = cfg.replace(checks=dataclasses.replace(cfg.checks, **changes))
    report = weibull_check(cfg)
    _emit(_json(report, cfg), args.out)
    return EXIT_CHECK if report["pass"] is False else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config file (INI sections)")
    common.add_argument("--seed", type=int, metavar="U64", help="override the master seed")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads (default: $BROCHETTE_THREADS or all CPUs)")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), help="output format (default: csv for sweep, json otherwise)")

    p = argparse.ArgumentParser(prog="brochette", description="Brochette first-passage percolation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geodesic", parents=[common], help="T(0, n e_1), geodesic heights and one geodesic")
    g.add_argument("--n", type=int, required=True)
    g.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over n_grid x replicates")
    s.add_argument("--n-grid", type=int, nargs="+", help="override [sweep] n_grid")
    s.add_argument("--replicates", type=int, help="override [sweep] replicates")
    s.add_argument("--timings", action="store_true", help="add a wall_time column (not reproducible)")
    s.set_defaults(func=cmd_sweep, default_format="csv")

    e = sub.add_parser("exponent", parents=[common], help="fit the height exponent of a sweep CSV")
    e.add_argument("csv", metavar="CSV")
    e.add_argument("--tolerance", type=float, help="override [checks] exponent_tolerance")
    e.set_defaults(func=cmd_exponent)

    c = sub.add_parser("checks", parents=[common], help="time constant, Weibull, mean time and rho checks")
    c.set_defaults(func=cmd_checks)

    r = sub.add_parser("rho-trace", parents=[common], help="running line minima and T(0, boundary of B(r))")
    r.add_argument("--R", type=int, required=True)
    r.set_defaults(func=cmd_rho_trace)

    d = sub.add_parser("detour", parents=[common], help="detour constructions with an independent H_max")
    d.add_argument("--n", type=int, help="single n instead of n_grid")
    d.add_argument("--replicates", type=int)
    d.add_argument("--epsilon", type=float, help="override [checks] epsilon")
    d.set_defaults(func=cmd_detour)

    w = sub.add_parser("weibull", parents=[common], help="KS distance of scaled line minima to Weibull(beta, 1)")
    w.add_argument("--m", type=int, help="lines per minimum")
    w.add_argument("--reps", type=int, help="replicates")
    w.set_defaults(func=cmd_weibull)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = getattr(args, "default_format", "json")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"brochette: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BoxCapExceeded as exc:
        print(f"brochette: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
