"""Command-line driver: ``wassball {attack,verify,project,dykstra-bench,table1}``.

Exit codes: 0 success, 1 feasibility violations found, 2 usage error,
3 numerical failure, 4 malformed or incompatible input file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as wio
from .attack import METHODS, AttackConfig
from .errors import (
    InvalidInputError,
    InvalidParameterError,
    NumericalError,
    SchemaError,
    ShapeError,
    TrainingError,
    WassballError,
)
from .experiments import dykstra_bench, run_table1
from .grid import GridShape
from .lmo import DEFAULT_GAMMA
from .models import BlobSpec
from .runner import DatasetSpec, attack_batch, attack_document, project_images, synthetic_task, verify_document

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_SCHEMA = 4

log = logging.getLogger("wassball")


class UsageError(Exception):
    pass


def _configure_logging() -> None:
    level = os.environ.get("WASSBALL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _attack_flags(p: argparse.ArgumentParser, iterations: int = 30, epsilon: float = 0.1) -> None:
    p.add_argument("--method", choices=METHODS, default="pgd-dual-proj")
    p.add_argument("--epsilon", type=float, default=epsilon)
    p.add_argument("--iterations", type=int, default=iterations)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=None, help=f"entropic LMO parameter (default {DEFAULT_GAMMA})")
    p.add_argument("--k", type=int, default=5, help="odd neighbourhood width")
    p.add_argument("--tol", type=float, default=None, help="bisection tolerance")
    p.add_argument("--accelerate", action="store_true", help="momentum (PGD) or gradient averaging (FW)")
    p.add_argument("--post-process", action="store_true", help="capacity projection at the end")


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", type=Path, default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wassball", description="Wasserstein-ball attacks via dual projection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="attack a batch of images and write the results")
    _attack_flags(p)
    _common_flags(p)
    p.add_argument("--samples", type=int, default=100, help="synthetic samples to attack")
    p.add_argument("--input", type=Path, default=None, help="WADV array of images (N, n) or (N, c, h, w)")
    p.add_argument("--labels", type=Path, default=None, help="labels for --input (WADV or text)")
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--height", type=int, default=8)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: available cores)")
    p.add_argument("--trace", type=Path, default=None, help="write per-iteration loss and accuracy as CSV")
    p.add_argument("--no-couplings", action="store_true", help="do not store plans in the JSON output")

    p = sub.add_parser("verify", help="check a result file for budget and pixel violations")
    p.add_argument("results", type=Path)
    p.add_argument("--budget-tol", type=float, default=1e-6, help="relative to the image mass")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("project", help="project image b onto the ball around image a")
    _attack_flags(p, iterations=300, epsilon=0.5)
    _common_flags(p)
    p.add_argument("--input", type=Path, default=None, help="WADV array holding a and b as two rows")
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--height", type=int, default=20)

    p = sub.add_parser("dykstra-bench", help="Dykstra convergence log on a random instance")
    _common_flags(p)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--width", type=int, default=10)
    p.add_argument("--height", type=int, default=10)

    p = sub.add_parser("table1", help="projection sanity check against the exact distance")
    _common_flags(p)
    p.add_argument("--epsilon", type=float, action="append", default=None, help="radius (repeatable)")
    return parser


def attack_config(args) -> AttackConfig:
    if args.gamma is not None and args.method != "fw-dual-lmo":
        raise UsageError("--gamma only applies to --method fw-dual-lmo")
    kwargs = dict(
        method=args.method,
        epsilon=args.epsilon,
        iterations=args.iterations,
        step_size=args.step_size,
        gamma=DEFAULT_GAMMA if args.gamma is None else args.gamma,
        k=args.k,
        post_process=args.post_process,
        seed=args.seed,
        accelerate=args.accelerate,
    )
    if args.tol is not None:
        kwargs["tol"] = args.tol
    return AttackConfig(**kwargs)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _read_labels(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if data[:4] == wio.MAGIC:
        values = wio.decode_array(data).ravel()
    else:
        values = np.loadtxt(path, ndmin=1)
    labels = np.asarray(values, dtype=int)
    if not np.array_equal(labels, values):
        raise SchemaError("labels must be integers")
    return labels


def cmd_attack(args) -> int:
    config = attack_config(args)
    if args.input is not None:
        if args.labels is None:
            raise UsageError("--input needs --labels")
        images = wio.read_array(args.input)
        labels = _read_labels(args.labels)
        if images.ndim == 4:
            shape = GridShape(images.shape[3], images.shape[2], images.shape[1])
        else:
            shape = GridShape(args.width, args.height, args.channels)
        images = images.reshape(len(images), -1)
        if len(labels) != len(images):
            raise SchemaError(f"{len(images)} images but {len(labels)} labels")
        spec = DatasetSpec(seed=args.seed)
        if shape != spec.blobs.shape:
            raise UsageError("the built-in model is trained on 8x8 single-channel images")
        model, _, _ = synthetic_task(DatasetSpec(samples=0, seed=args.seed))
        dataset = {"kind": "file", "input": str(args.input), "labels": str(args.labels)}
    else:
        if args.samples < 1:
            raise UsageError("--samples must be positive")
        shape = GridShape(args.width, args.height, args.channels)
        spec = DatasetSpec(BlobSpec(shape=shape), samples=args.samples, seed=args.seed)
        model, images, labels = synthetic_task(spec)
        dataset = spec.to_dict()
    results = attack_batch(model, images, labels, shape, config, args.threads)
    doc = attack_document(results, config, shape, dataset, store_couplings=not args.no_couplings)
    if args.trace is not None:
        args.trace.write_text(wio.trace_csv(results))
    summary = doc["summary"]
    log.info("clean accuracy %.3f, adversarial accuracy %.3f", summary["clean_accuracy"], summary["adversarial_accuracy"])
    _emit(wio.samples_csv(doc["samples"]) if args.format == "csv" else wio.dumps(doc), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if not args.results.is_file():
        raise UsageError(f"no such file: {args.results}")
    doc = wio.load_results(args.results)
    report = verify_document(doc, budget_tol=args.budget_tol)
    for warning in report.warnings:
        log.warning("%s", warning)
    if args.format == "csv":
        rows = [(s.index, s.wasserstein, s.delta, s.max_pixel, s.mass_above_one, int(s.budget_ok),
                 int(s.hypercube_ok), int(s.coupling_checked)) for s in report.samples]
        text = wio.to_csv(rows, ("index", "wasserstein", "delta", "max_pixel", "mass_above_one",
                                 "budget_ok", "hypercube_ok", "coupling_checked"))
    else:
        text = json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_project(args) -> int:
    config = attack_config(args)
    shape = GridShape(args.width, args.height)
    if args.input is not None:
        pair = wio.read_array(args.input).reshape(2, -1)
        a, b = pair
    else:
        rng = np.random.default_rng(args.seed)
        a = rng.uniform(0.0, 1.0, shape.n)
        b = rng.uniform(0.0, 1.0, shape.n)
        a, b = a / a.sum(), b / b.sum()
    if a.size != shape.n:
        raise ShapeError(f"images have {a.size} pixels, --width/--height give {shape.n}")
    z, w_ab, w_az, result = project_images(a, b, shape, config)
    doc = {
        "schema": wio.SCHEMA_VERSION,
        "config": config.to_dict(),
        "shape": shape.to_dict(),
        "initial_distance": w_ab,
        "distance": w_az,
        "expected": min(config.epsilon, w_ab),
        "objective": -result.final_loss,
        "transport_cost": result.transport_cost,
        "z": [float(v) for v in z],
    }
    if args.format == "csv":
        text = wio.to_csv([(k, doc[k]) for k in ("initial_distance", "distance", "expected", "objective",
                                                 "transport_cost")], ("quantity", "value"))
    else:
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_dykstra(args) -> int:
    if args.iterations < 1:
        raise UsageError("--iterations must be positive")
    _, rows = dykstra_bench(args.seed, GridShape(args.width, args.height), args.k, args.epsilon,
                            max_iter=args.iterations)
    if args.format == "csv":
        text = wio.dykstra_csv(rows)
    else:
        text = json.dumps({"schema": wio.SCHEMA_VERSION, "log": [list(r) for r in rows]}, indent=1) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_table1(args) -> int:
    epsilons = tuple(args.epsilon) if args.epsilon else (0.5, 1.0)
    report = run_table1(args.seed, epsilons)
    if args.format == "csv":
        rows = [(r.epsilon, r.method, r.wasserstein, r.expected, r.error) for r in report.rows]
        text = wio.to_csv(rows, ("epsilon", "method", "wasserstein", "expected", "error"))
    else:
        text = json.dumps(report.to_dict(), indent=1, sort_keys=True) + "\n"
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "attack": cmd_attack,
    "verify": cmd_verify,
    "project": cmd_project,
    "dykstra-bench": cmd_dykstra,
    "table1": cmd_table1,
}


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"wassball: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"wassball: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NumericalError, TrainingError, FloatingPointError) as exc:
        print(f"wassball: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidInputError, ShapeError) as exc:
        print(f"wassball: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except WassballError as exc:
        print(f"wassball: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
