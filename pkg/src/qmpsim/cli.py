"""Command-line driver.

Exit codes: 0 success, 1 input error (unreadable or invalid protocol file),
2 usage error, 3 Monte Carlo leaf deviating by more than 5 standard errors
from its exact probability.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import dsl, montecarlo, reports
from .errors import QmpError

log = logging.getLogger("qmpsim")

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_STATISTICS = 0, 1, 2, 3
MC_SIGMA = 5.0
DEFAULT_TRIALS = 100_000


class InputError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmpsim", description="Weak-value and null-weak-value protocol simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log timings and warnings")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    for name, help_ in (("wv", "exact weak-value protocol report"), ("nwv", "exact null-weak-value protocol report")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("file")
        s.add_argument("-o", "--out", help="write JSON here instead of stdout")

    s = sub.add_parser("pointer", help="Gaussian pointer distributions and moments")
    s.add_argument("file")
    s.add_argument("--csv", dest="csv_out", help="write q, unconditioned, postselected densities")
    s.add_argument("-o", "--out", help="write the JSON summary here instead of stdout")

    s = sub.add_parser("mc", help="Monte Carlo estimate of the protocol tree")
    s.add_argument("file")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--shards", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("-o", "--out")

    s = sub.add_parser("sweep", help="exact vs weak-limit values over a parameter range")
    s.add_argument("file")
    s.add_argument("--param", required=True, choices=sorted(reports.SWEEP_PARAMS))
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("-o", "--out")

    s = sub.add_parser("validate", help="parse and check a protocol file")
    s.add_argument("file")
    return p


def _load(path: str) -> dsl.ProtocolSpec:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    spec, diags = dsl.check(data)
    for d in diags:
        print(f"{path}:{d}", file=sys.stderr)
    if spec is None:
        raise InputError(f"{path}: protocol has errors")
    return spec


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _json(obj: dict) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _seed(args, spec: dsl.ProtocolSpec) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QMP_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"QMP_SEED={env!r} is not an integer") from None
    return spec.run.seed if spec.run else 0


def _cmd_report(args) -> int:
    spec = _load(args.file)
    _emit(_json(reports.report_for(args.command, spec)), args.out)
    return EXIT_OK


def _cmd_pointer(args) -> int:
    spec = _load(args.file)
    report = reports.report_for("pointer", spec)
    if args.csv_out:
        _, uncond, post = reports.pointer_distributions(spec)
        text = _csv(["q", "unconditioned", "postselected"], zip(uncond.q, uncond.density, post.density))
        _emit(text, args.csv_out)
    _emit(_json(report), args.out)
    return EXIT_OK


def _cmd_mc(args) -> int:
    spec = _load(args.file)
    trials = args.trials if args.trials is not None else (spec.run.trials if spec.run else DEFAULT_TRIALS)
    shards = args.shards if args.shards is not None else (spec.run.shards if spec.run else 1)
    if trials < 1 or shards < 1 or args.workers < 1:
        raise InputError("trials, shards and workers must be >= 1")
    seed = _seed(args, spec)
    result = montecarlo.estimate(spec, trials, seed, shards, workers=args.workers)
    checks = montecarlo.leaf_checks(result, spec)
    payload = result.to_dict()
    payload["leaf_checks"] = [
        {"path": c.path, "frequency": c.frequency, "exact": c.exact, "stderr": c.stderr,
         "z": c.z if abs(c.z) != float("inf") else None}
        for c in checks
    ]
    _emit(_json(payload), args.out)
    worst = max(checks, key=lambda c: abs(c.z))
    if abs(worst.z) > MC_SIGMA:
        print(f"leaf {worst.path} deviates by {worst.z:.2f} standard errors", file=sys.stderr)
        return EXIT_STATISTICS
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = _load(args.file)
    try:
        values = reports.linspace(args.start, args.stop, args.steps)
        rows = reports.sweep_rows(spec, args.param, values)
    except (ValueError, QmpError) as exc:
        raise InputError(str(exc)) from None
    _emit(_csv(["param", "exact", "approx", "gap"], rows), args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {args.file}: {exc.strerror}") from None
    spec, diags = dsl.check(data)
    for d in diags:
        print(f"{args.file}:{d}", file=sys.stderr)
    if spec is None:
        return EXIT_INPUT
    print(f"{args.file}: ok ({spec.kind})")
    return EXIT_OK


COMMANDS = {
    "wv": _cmd_report,
    "nwv": _cmd_report,
    "pointer": _cmd_pointer,
    "mc": _cmd_mc,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QmpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    log.info("%s finished in %.3f s", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
