"""Command-line runner: ``kahlerlab <subcommand> [--config PATH] [--out DIR] ...``.

Every suite writes ``<subcommand>_<run_id>.json`` and one CSV per table into the
output directory.  Exit status is 0 when every residual entry passes, 1 when
some entry fails and 2 on configuration errors or numerical rejections.

CSV columns:

* build-model, verify-identities: ``tau, Q, Y, r`` (Y over the base centre)
* biconf: ``tau, f, theta, H`` and ``s_hat`` when curvature is requested
* obstruction: ``t, tau, zeta, theta``
* u2-invariant: ``tau, f, chi``
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, validate
from .report import ResidualEntry, ResidualReport
from .suites import SUITES

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
SUMMARY_NAME = "summary.json"


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([f"{x:.17g}" for x in row])


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _apply_overrides(cfg: RunConfig, args) -> None:
    d = cfg.data
    if args.seed is not None:
        d["verify"]["seed"] = args.seed
    if args.points is not None:
        d["verify"]["points"] = args.points
    if args.tol_scale is not None:
        d["verify"]["tol_scale"] = args.tol_scale
    if args.out is not None:
        d["output"]["dir"] = args.out
    if getattr(args, "h_prime", None) is not None:
        d["obstruction"]["H_prime"] = _parse_floats(args.h_prime)
    if getattr(args, "c", None) is not None:
        d["obstruction"]["c"] = args.c if args.c.lower().startswith("inf") else _parse_floats(args.c)
    if getattr(args, "T", None) is not None:
        d["obstruction"]["T"] = args.T
    if getattr(args, "tau_min", None) is not None:
        d["interval"]["tau_min"] = args.tau_min
    if getattr(args, "tau_max", None) is not None:
        d["interval"]["tau_max"] = args.tau_max
    validate(d)


def run_suite(subcommand: str, cfg: RunConfig) -> tuple[ResidualReport, dict, Path]:
    """Run one suite and persist its artifacts; returns the report, tables and JSON path."""
    v = cfg["verify"]
    seed, points = int(v["seed"]), int(v["points"])
    start = time.perf_counter()
    rep, tables = SUITES[subcommand](cfg, seed, points)
    if v["tol_scale"] != 1.0:
        rep = rep.scaled(v["tol_scale"])
    rep.seed = seed
    rep.config_hash = cfg.config_hash
    rep.run_id = cfg.run_id(seed, subcommand)
    rep.extras["subcommand"] = subcommand
    rep.wall_time = time.perf_counter() - start

    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    formats = cfg["output"]["formats"]
    stem = f"{subcommand}_{rep.run_id}"
    json_path = out / f"{stem}.json"
    if "json" in formats:
        json_path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True, default=_jsonable))
    if "csv" in formats:
        for name, (header, rows) in tables.items():
            write_csv(out / f"{stem}_{name}.csv", header, rows)
    return rep, tables, json_path


def consolidate(directory: str | Path) -> ResidualReport:
    """Worst residual per check over every report in ``directory``, ordered by check name."""
    directory = Path(directory)
    paths = sorted(p for p in directory.glob("*.json") if p.name != SUMMARY_NAME) if directory.is_dir() else []
    if not paths:
        raise ValueError(f"no reports found in {directory}")
    worst: dict[str, ResidualEntry] = {}
    runs = []
    for path in paths:
        rep = ResidualReport.from_json(path.read_text())
        runs.append({"file": path.name, "run_id": rep.run_id, "pass": rep.passed})
        for e in rep.entries:
            cur = worst.get(e.check_name)
            # a failing entry outranks any passing one, then the larger residual wins
            if cur is None or (not e.passed, e.max_residual) > (not cur.passed, cur.max_residual):
                worst[e.check_name] = e
    out = ResidualReport(extras={"runs": runs})
    out.entries = [worst[name] for name in sorted(worst)]
    return out


def _report_command(args) -> int:
    directory = Path(args.directory or args.out or ".")
    summary = consolidate(directory)
    (directory / SUMMARY_NAME).write_text(json.dumps(summary.to_dict(include_wall_time=False), indent=2,
                                                      sort_keys=True, default=_jsonable))
    if not args.quiet:
        print(summary.table())
        print(f"overall: {'pass' if summary.passed else 'FAIL'} ({len(summary.extras['runs'])} runs)")
    return EXIT_PASS if summary.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides [output].dir)")
    common.add_argument("--seed", type=int, help="sampling seed (overrides [verify].seed)")
    common.add_argument("--tol-scale", type=float, help="multiply every tolerance by this factor")
    common.add_argument("--points", type=int, help="number of sample points")
    common.add_argument("--quiet", action="store_true", help="suppress the residual table")

    parser = argparse.ArgumentParser(prog="kahlerlab", description="Residual suites for Kaehler metrics with "
                                     "a Killing potential and their special biconformal changes.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("build-model", "verify-identities", "biconf", "u2-invariant"):
        sub.add_parser(name, parents=[common])
    obs = sub.add_parser("obstruction", parents=[common])
    obs.add_argument("--h-prime", help="monomial coefficients of H', comma separated, constant first; "
                     "write --h-prime=-0.5,1 when the list starts with a minus sign")
    obs.add_argument("--c", help="c as 'p,q' (e.g. --c=-1,1) or 'inf'")
    obs.add_argument("--tau-min", type=float)
    obs.add_argument("--tau-max", type=float)
    obs.add_argument("--T", type=float, help="half-length of the curve parameter window")
    rep = sub.add_parser("report", parents=[common])
    rep.add_argument("directory", nargs="?", help="directory holding JSON reports (default: --out or .)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "report":
            return _report_command(args)
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        rep, _, json_path = run_suite(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError, OSError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    if not args.quiet:
        print(rep.table())
        for key in ("obstruction", "bounded", "d", "r", "special_after_recentering"):
            if key in rep.extras:
                print(f"{key}: {rep.extras[key]}")
        print(f"{'pass' if rep.passed else 'FAIL'}  {json_path}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
