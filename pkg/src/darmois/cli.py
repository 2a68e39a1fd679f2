"""Command-line interface: ``darmois {verify,construct,solve,sample,decompose}``.

Exit codes: 0 pass, 1 usage or input error, 2 mathematical failure
(residual above tolerance, positivity violation, unexpected
classification). Logging verbosity comes from ``DARMOIS_LOG``
(``quiet``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from .charfn import CharFn, TabulatedCharFn
from .exceptions import (
    DecompositionError,
    InadmissibleParametersError,
    InvariantViolationError,
    NotPositiveDefiniteError,
)
from .finite import FiniteInstance, records_to_json, solve, write_csv
from .groups import DualTable, LcaGroup, dual_grid
from .sampling import Sampler, write_samples_csv
from .sd import SdInstance, lemma9_decompose, sd_residual
from .theorem3 import Theorem3Params, construct_pair

DEFAULT_SEED = 20240601
DEFAULT_RADIUS = 32

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2

logger = logging.getLogger("darmois")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class InputError(Exception):
    """Malformed or missing input."""


def _configure_logging() -> None:
    level = os.environ.get("DARMOIS_LOG", "quiet").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def _emit_json(data: dict, output: str | None) -> None:
    text = json.dumps(data, indent=2, default=_json_default)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _grid_for(Y: LcaGroup, spec: dict | None, radius: int) -> np.ndarray:
    if spec and "points" in spec:
        return np.asarray(spec["points"], dtype=float)
    spec = spec or {}
    return dual_grid(Y, radius=int(spec.get("radius", radius)),
                     real_points=int(spec.get("real_points", 33)),
                     real_extent=float(spec.get("real_extent", 8.0)))


# -- commands ---------------------------------------------------------------


def cmd_verify(args) -> int:
    data = _load_json(args.input)
    try:
        instance = SdInstance.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid instance: {exc}") from exc
    Y = instance.group.dual()
    grid = _grid_for(Y, data.get("grid"), args.grid_radius)
    report = sd_residual(instance, grid, tol=args.tolerance, keep_points=bool(args.emit_plot_data))
    if args.emit_plot_data:
        report.write_csv(args.emit_plot_data)
    _emit_json(report.to_json(), args.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_construct(args) -> int:
    data = _load_json(args.input)
    try:
        params = Theorem3Params.from_json(data)
    except InvariantViolationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid parameters: {exc}") from exc
    tol = 1e-9 if args.tolerance is None else args.tolerance
    try:
        (f1, f2), reports = construct_pair(params, tol=tol)
    except InadmissibleParametersError as exc:
        _emit_json({"error": str(exc), "pd_report": exc.report.to_json()}, args.output)
        return EXIT_FAIL
    except InvariantViolationError as exc:
        _emit_json({"error": str(exc)}, args.output)
        return EXIT_FAIL
    instance = SdInstance.two_forms(f1, f2, params.delta)
    out = instance.to_json()
    out["params"] = params.to_json()
    out["reports"] = {k: v.to_json() for k, v in reports.items()}
    _emit_json(out, args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    data = _load_json(args.input)
    data = {**data, "seed": args.seed if args.seed is not None else data.get("seed", DEFAULT_SEED)}
    if args.tolerance is not None:
        data = {**data, "tolerance": args.tolerance}
    try:
        instance = FiniteInstance.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid finite instance: {exc}") from exc
    records = solve(instance)
    out = args.output
    if out and out.endswith(".json"):
        _emit_json(records_to_json(instance, records), out)
    elif out:
        write_csv(out, instance, records)
    else:
        _emit_json(records_to_json(instance, records), None)
    ok = all(r.classification != "other" for r in records)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sample(args) -> int:
    data = _load_json(args.input)
    try:
        group = LcaGroup.from_json(data["group"])
        target = CharFn.from_json(data["target"], group)
        count = int(args.count if args.count is not None else data.get("count", 1000))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid sample request: {exc}") from exc
    seed = args.seed if args.seed is not None else int(data.get("seed", DEFAULT_SEED))
    try:
        sampler = Sampler(target, seed=seed, method=data.get("method", "auto"))
    except NotPositiveDefiniteError as exc:
        payload = {"error": str(exc)}
        if exc.report is not None:
            payload["pd_report"] = exc.report.to_json()
        print(json.dumps(payload), file=sys.stderr)
        return EXIT_FAIL
    samples = sampler.sample(count)
    if args.output:
        write_samples_csv(args.output, group, samples)
    else:
        w = csv.writer(sys.stdout)
        for row in samples:
            w.writerow([repr(float(v)) for v in row])
    logger.info("sampled %d draws, acceptance rate %.4f", count, sampler.acceptance_rate)
    return EXIT_OK


def _psi_table(data: dict, radius: int) -> DualTable:
    group = LcaGroup.from_json(data["group"])
    Y = group.dual()
    if "charfn" in data:
        f = CharFn.from_json(data["charfn"], group)
        pts = _grid_for(Y, data.get("grid"), radius)
        if isinstance(f, TabulatedCharFn):
            pts = f.points
        return DualTable(Y, pts, -f.log_modulus(pts))
    return DualTable(Y, np.asarray(data["grid"], dtype=float), np.asarray(data["values"], dtype=float))


def cmd_decompose(args) -> int:
    data = _load_json(args.input)
    try:
        table = _psi_table(data, args.grid_radius)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid decomposition input: {exc}") from exc
    tol = 1e-6 if args.tolerance is None else args.tolerance
    try:
        dec = lemma9_decompose(table, tol=tol)
    except DecompositionError as exc:
        _emit_json({"error": str(exc)}, args.output)
        return EXIT_FAIL
    _emit_json(dec.to_json(), args.output)
    return EXIT_OK


COMMANDS = {
    "verify": (cmd_verify, "check the functional equation for a serialized instance"),
    "construct": (cmd_construct, "build and verify a characterized pair from parameters"),
    "solve": (cmd_solve, "search a finite group for solution pairs"),
    "sample": (cmd_sample, "draw samples from a closed-form distribution"),
    "decompose": (cmd_decompose, "split -log|f| into a quadratic form and coset constants"),
}


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--tolerance", type=float, default=d, help="residual tolerance override")
    parser.add_argument("--seed", type=int, default=d,
                        help=f"random seed (default {DEFAULT_SEED})")
    parser.add_argument("--grid-radius", type=int, default=d if suppress else DEFAULT_RADIUS,
                        help=f"integer radius of the dual grid (default {DEFAULT_RADIUS})")
    parser.add_argument("--threads", type=int, default=d, help="cap on BLAS/OpenMP threads")
    parser.add_argument("--output", "-o", default=d, help="output path (default stdout)")
    parser.add_argument("--emit-plot-data", default=d, metavar="CSV",
                        help="write (grid point, residual) rows to CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darmois", description=__doc__.splitlines()[0])
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _global_options(p, suppress=True)
        p.add_argument("input", help="input JSON file")
        if name == "sample":
            p.add_argument("--count", "-n", type=int, default=None, help="number of draws")
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    limit = threadpool_limits(limits=args.threads) if args.threads else contextlib.nullcontext()
    fn = COMMANDS[args.command][0]
    try:
        with limit:
            return fn(args)
    except InputError as exc:
        print(f"darmois: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InadmissibleParametersError, InvariantViolationError) as exc:
        print(f"darmois: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
