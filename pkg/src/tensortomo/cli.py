"""Command-line entry point.

Exit codes: 0 pass, 1 numerical failure, 2 usage error, 3 audit refusal.
The worker count for sweeps is read from ``TENSORTOMO_WORKERS``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import coeffs
from .experiments import (ConfigError, ExperimentConfig, coeff_table, run_pestov,
                          run_radon_sharp, run_stability_sweep, run_transport_check, run_xray)
from .geometry import AuditError
from .io import write_boundary_csv

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_AUDIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=float)


def _emit(report: dict, out: str | None) -> None:
    text = _dump(report) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


def _load_config(path: str, required=()) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return ExperimentConfig.from_json(text, required)


def cmd_coeff_table(args) -> int:
    if args.d < 2:
        raise ConfigError("dimension must be >= 2")
    rows, ok = coeff_table(args.d, args.l_max, args.m, args.k_max)
    stream = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        stream.write(f"# d={args.d} c_d={coeffs.c(args.d)!r} identities={'pass' if ok else 'fail'}\n")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["quantity", "d", "l", "m", "k", "value"])
        for q, d, l, m, k, v in rows:
            w.writerow([q, d, l, m, k, repr(float(v))])
    finally:
        if args.out:
            stream.close()
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_pestov_check(args) -> int:
    cfg = _load_config(args.config, required=("metric",))
    report = run_pestov(cfg)
    _emit(report, args.out or cfg.output)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_radon_sharp(args) -> int:
    cfg = _load_config(args.config)
    report = run_radon_sharp(cfg)
    _emit(report, args.out or cfg.output)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_xray(args) -> int:
    cfg = _load_config(args.config, required=("metric", "m"))
    report, sinos = run_xray(cfg)
    if args.sinogram_dir:
        out = Path(args.sinogram_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(sinos):
            write_boundary_csv(out / f"sinogram_{i:03d}.csv", s.extend_zero())
    _emit(report, args.out or cfg.output)
    return EXIT_PASS


def cmd_stability_sweep(args) -> int:
    cfg = _load_config(args.config, required=("metric", "m", "seed", "samples"))
    report, records = run_stability_sweep(cfg)
    if args.records:
        Path(args.records).parent.mkdir(parents=True, exist_ok=True)
        with open(args.records, "w") as fh:
            for r in records:
                fh.write(json.dumps({"config_hash": report["config_hash"], **r}, sort_keys=True) + "\n")
    if args.summary:
        keys = ["N", "count", "finite", "pure_potential", "min", "median", "q90", "max"]
        with open(args.summary, "w", newline="") as fh:
            fh.write(f"# config_hash={report['config_hash']}\n")
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for row in report["summary"]:
                w.writerow({k: row.get(k, "") for k in keys})
    _emit(report, args.out or cfg.output)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def cmd_transport_check(args) -> int:
    cfg = _load_config(args.config, required=("metric",))
    report = run_transport_check(cfg)
    _emit(report, args.out or cfg.output)
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tensortomo", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("coeff-table", help="coefficient tables and identity residuals (CSV)")
    c.add_argument("--d", type=int, required=True, help="dimension (>= 2)")
    c.add_argument("--l-max", type=int, default=10)
    c.add_argument("--m", type=int, default=1, help="tensor degree for the b sequence (>= 1)")
    c.add_argument("--k-max", type=int, default=20)
    c.add_argument("--out", help="CSV path (default stdout)")
    c.set_defaults(func=cmd_coeff_table)

    for name, func, helptext in [
        ("pestov-check", cmd_pestov_check, "Pestov identities over a refinement ladder"),
        ("radon-sharp", cmd_radon_sharp, "Fourier slice and sharp Radon identity"),
        ("xray", cmd_xray, "fan-beam sinograms of configured fields"),
        ("stability-sweep", cmd_stability_sweep, "stability ratios over seeded fields"),
        ("transport-check", cmd_transport_check, "transport solution versus X-ray transform"),
    ]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--out", help="JSON report path (also printed)")
        if name == "xray":
            s.add_argument("--sinogram-dir", help="directory for sinogram CSV files")
        if name == "stability-sweep":
            s.add_argument("--records", help="JSON-lines path for per-sample records")
            s.add_argument("--summary", help="CSV path for per-level summary")
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuditError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
