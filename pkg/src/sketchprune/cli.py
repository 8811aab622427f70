"""Batch command-line front end.

Subcommands: inspect, sketch, verify, stats, flops, bench. Exit codes:
0 success, 1 validation error, 2 numerical failure, 3 certificate
violation. Errors are emitted as JSON objects on stderr so CI can parse
them. Reports keep wall-clock fields under a separate ``timing`` key so
deterministic payloads can be diffed byte-for-byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import compare_models, count_flops_params, gram_certificate, weight_stats
from .architectures import ARCHITECTURES, load_manifest, random_archive
from .archive import ModelManifest, load_archive, save_archive
from .errors import (
    CertificateError,
    NumericalError,
    SketchPruneError,
    ValidationError,
)
from .oracle import load_golden_cases, matrix_checksum
from .planner import build_plan, random_subsample, sketch_model, svdtrunc_model
from .rng import standard_normal_matrix
from .sketch import fd_sketch

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_CERTIFICATE = 3


def worker_count() -> int:
    """Worker cap from SKETCHPRUNE_THREADS (0 or unset = auto)."""
    raw = os.environ.get("SKETCHPRUNE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"SKETCHPRUNE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValidationError("SKETCHPRUNE_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _parse_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ValidationError(f"override must look like layer=rate, got {pair!r}")
        name, _, val = pair.partition("=")
        try:
            overrides[name] = float(val)
        except ValueError:
            raise ValidationError(f"override rate for {name!r} is not a number: {val!r}")
    return overrides


def _emit(doc: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        _print_table(doc)


def _print_table(doc: dict, indent: int = 0) -> None:
    pad = "  " * indent
    for key, val in doc.items():
        if isinstance(val, dict):
            print(f"{pad}{key}:")
            _print_table(val, indent + 1)
        elif isinstance(val, list):
            print(f"{pad}{key}: [{len(val)} entries]")
        else:
            print(f"{pad}{key}: {val}")


def _manifest_from_args(args) -> ModelManifest:
    if getattr(args, "arch", None):
        return load_manifest(args.arch)
    if getattr(args, "model", None):
        path = Path(args.model)
        if path.is_dir():
            return load_archive(path).manifest
        return ModelManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
    raise ValidationError("either --arch or --model is required")


def cmd_inspect(args) -> int:
    archive = load_archive(args.model)
    comp = count_flops_params(archive.manifest)
    doc = {
        "layers": [
            {
                "name": l.name,
                "kind": l.kind,
                "out_channels": l.out_channels,
                "in_channels": l.in_channels,
                "kernel": [l.kernel_h, l.kernel_w],
                "prunable": l.prunable,
                "prune_group": l.prune_group,
            }
            for l in archive.manifest.layers
        ],
        "conv_layers": archive.manifest.conv_layer_count(),
        "total_macs": comp.total_macs,
        "total_params": comp.total_params,
    }
    _emit(doc, args.format)
    return EXIT_OK


def cmd_sketch(args) -> int:
    archive = load_archive(args.model)
    plan = build_plan(archive.manifest, args.rate, _parse_overrides(args.override))
    if args.baseline == "fd":
        pruned, report = sketch_model(archive, plan)
    elif args.baseline == "random":
        pruned, report = random_subsample(archive, plan, args.seed)
    else:
        pruned, report = svdtrunc_model(archive, plan)
    save_archive(pruned, args.out)
    doc = report.to_dict(include_timing=True)
    report_path = Path(args.report) if args.report else Path(args.out) / "report.json"
    report_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit(doc, args.format)
    if args.baseline == "fd" and not all(r.bound_satisfied for r in report.layers):
        raise CertificateError("a layer sketch violated the spectral bound certificate")
    return EXIT_OK


def cmd_verify(args) -> int:
    cases = load_golden_cases(args.cases)
    if args.limit:
        cases = cases[: args.limit]

    def check(case):
        W = standard_normal_matrix(case.seed, case.d, case.c)
        if matrix_checksum(W) != case.input_sha256:
            return case, "input checksum mismatch (generator drift)"
        result = fd_sketch(W, case.ell)
        if matrix_checksum(result.omega) != case.omega_sha256:
            return case, "sketch checksum mismatch vs golden reference"
        _fro, spec, eps, ok = gram_certificate(W, result.omega, case.ell)
        if not ok:
            return case, f"certificate violated: spec_err={spec:.6g} > eps={eps:.6g}"
        return case, None

    failures = []
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for case, err in pool.map(check, cases):
            if err:
                failures.append({"seed": case.seed, "d": case.d, "c": case.c, "ell": case.ell, "error": err})
    doc = {"cases": len(cases), "failures": failures}
    _emit(doc, args.format)
    if failures:
        raise CertificateError(f"{len(failures)} of {len(cases)} golden cases failed")
    return EXIT_OK


def cmd_stats(args) -> int:
    archive = load_archive(args.model)
    doc = weight_stats(archive).to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _emit(doc, args.format)
    return EXIT_OK


def cmd_flops(args) -> int:
    manifest = _manifest_from_args(args)
    comp = count_flops_params(manifest)
    if args.compare:
        base = load_archive(args.model)
        pruned = load_archive(args.compare)
        comp = compare_models(base, pruned)
    _emit(comp.to_dict(), args.format)
    return EXIT_OK


def cmd_bench(args) -> int:
    manifest = load_manifest(args.arch)
    archive = random_archive(manifest, args.seed)
    plan = build_plan(manifest, args.rate)
    t0 = time.perf_counter()
    pruned, report = sketch_model(archive, plan)
    wall = time.perf_counter() - t0
    doc = {
        "arch": args.arch,
        "rate": args.rate,
        "conv_layers": manifest.conv_layer_count(),
        "all_bounds_satisfied": all(r.bound_satisfied for r in report.layers),
        "timing": {
            "wall_seconds": wall,
            "sketch_seconds": report.elapsed_total,
        },
    }
    _emit(doc, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchprune", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("inspect", help="summarize an archive")
    p.add_argument("--model", required=True)
    add_format(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("sketch", help="prune an archive")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--override", action="append", metavar="LAYER=RATE")
    p.add_argument("--baseline", choices=("fd", "random", "svdtrunc"), default="fd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    add_format(p)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("verify", help="run the golden-case and certificate suites")
    p.add_argument("--cases", help="path to a golden_cases.json (default: shipped file)")
    p.add_argument("--limit", type=int, default=0)
    add_format(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stats", help="weight statistics of an archive")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    add_format(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("flops", help="complexity accounting")
    p.add_argument("--arch", choices=ARCHITECTURES)
    p.add_argument("--model", help="archive dir or manifest JSON")
    p.add_argument("--compare", help="pruned archive to diff against --model")
    add_format(p)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("bench", help="time sketch_model on a random archive")
    p.add_argument("--arch", required=True, choices=ARCHITECTURES)
    p.add_argument("--rate", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    add_format(p)
    p.set_defaults(func=cmd_bench)

    return parser


def _error_doc(kind: str, exc: Exception) -> str:
    return json.dumps({"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except CertificateError as exc:
        print(_error_doc("certificate", exc), file=sys.stderr)
        return EXIT_CERTIFICATE
    except NumericalError as exc:
        print(_error_doc("numerical", exc), file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, SketchPruneError, OSError, json.JSONDecodeError) as exc:
        print(_error_doc("validation", exc), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
