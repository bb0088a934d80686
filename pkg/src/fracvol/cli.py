"""Command-line entry point.

Exit codes:
  0  success
  2  usage error (bad flags)
  3  config parse error
  4  config validation error
  5  I/O error
  6  estimator error
  7  fbm self-test failed
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import (
    ConfigParseError,
    ConfigValidationError,
    apply_overrides,
    build_config,
    effective_document,
    load_document,
)
from .harness import RunError, rows_to_csv, run_convergence, run_table
from .pricers import METHODS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_IO = 5
EXIT_ESTIMATOR = 6
EXIT_SELFTEST = 7

log = logging.getLogger("fracvol")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fracvol",
        description="Option pricing under fractional Ornstein-Uhlenbeck volatility.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("\n", 2)[2],
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="JSON config file")
        sp.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key (repeatable; dotted keys such as vol.c)",
        )
        sp.add_argument("--out", type=Path, help="write CSV here instead of stdout")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument(
            "--timing", action="store_true",
            help="fill runtime_ms with wall-clock times (output is then not reproducible)",
        )
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("price", help="one estimate, one CSV row")
    common(sp)
    sp.add_argument("--method", choices=METHODS, help="defaults to the first config method")
    sp.add_argument("--n", type=int, help="grid size (defaults to the last n_list entry)")

    sp = sub.add_parser("table", help="every (method, n) cell of the config")
    common(sp)

    sp = sub.add_parser("converge", help="errors vs a fine shared reference and fitted rate")
    common(sp)
    sp.add_argument("--method", choices=METHODS)

    sp = sub.add_parser("fbm-selftest", help="statistical checks of the fBm sampler")
    sp.add_argument("--H", type=float, default=0.5, dest="hurst")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--paths", type=int, default=20_000)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _echo_config(doc, overrides):
    lines = ["# effective config:"]
    lines += ["#   " + ln for ln in json.dumps(doc, indent=2, sort_keys=True).splitlines()]
    lines += [f"# override {o}" for o in overrides]
    print("\n".join(lines), file=sys.stderr)


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        out.write_text(text, encoding="utf-8")


def _load(args):
    text = args.config.read_text(encoding="utf-8")
    doc = apply_overrides(load_document(text), args.override)
    config = build_config(doc)
    _echo_config(effective_document(doc), args.override)
    return config


def _run(args) -> int:
    if args.command == "fbm-selftest":
        from .selftest import run_selftest

        checks = run_selftest(args.hurst, args.n, args.paths, args.seed)
        for c in checks:
            print(c.line())
        ok = all(c.passed for c in checks)
        print("fbm-selftest:", "PASS" if ok else "FAIL")
        return EXIT_OK if ok else EXIT_SELFTEST

    config = _load(args)
    if args.command == "price":
        from dataclasses import replace

        method = args.method or config.methods[0]
        n = args.n or config.n_list[-1]
        config = replace(config, methods=(method,), n_list=(n,))
        rows = run_table(config, threads=args.threads)
        _write(rows_to_csv(rows, args.timing), args.out)
    elif args.command == "table":
        rows = run_table(config, threads=args.threads)
        _write(rows_to_csv(rows, args.timing), args.out)
    elif args.command == "converge":
        report = run_convergence(config, args.method, threads=args.threads)
        _write(report.to_csv(), args.out)
        print(
            f"# fitted_slope={report.fitted_slope:.4f} "
            f"predicted_slope={report.predicted_slope:.4f}",
            file=sys.stderr,
        )
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _run(args)
    except ConfigParseError as exc:
        print(f"error: config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigValidationError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except RunError as exc:
        if getattr(args, "out", None) is None:
            sys.stdout.write(rows_to_csv(exc.rows))
        print(f"error: estimator failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: estimator failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
