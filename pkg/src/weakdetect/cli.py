"""Command-line front end.

    weakdetect generate --config exp.json --out scene.csv
    weakdetect score    --config exp.json [--pixels scene.csv] --out scores.csv
    weakdetect roc|power|converge|sculpt|fig1 --config exp.json --out results.json

Exit status: 0 on success, 2 for validation errors, 3 for numeric failures.
Errors are also reported as a one-line JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .errors import ConfigError, ContractError, DomainError, NumericError
from .harness import (
    dump_json,
    format_matrix_csv,
    generate_scene,
    load_config,
    read_matrix_csv,
    run_experiment,
    score_scene,
    write_atomic,
)

log = logging.getLogger("weakdetect")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

SUBCOMMANDS = {
    "generate": "draw a synthetic scene and write it as CSV",
    "score": "score scene pixels with every configured detector",
    "roc": "empirical ROC curves on the generated scene",
    "power": "power-vs-abundance curves and pairwise dominance checks",
    "converge": "convergence of the finite-eps mixed detector to its limit",
    "sculpt": "optimize sculpting weights for worst-case power",
    "fig1": "mixed-prior density tables for several eps",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weakdetect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed (u64)")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--quiet", action="store_true", help="suppress progress messages")
        if name == "score":
            p.add_argument("--pixels", default=None,
                           help="score pixels from this CSV instead of generating a scene")
    return parser


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _run(args) -> None:
    config = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        config = config.with_seed(args.seed)

    if args.command == "generate":
        scene = generate_scene(config)
        _emit(scene.to_csv(), args.out)
        log.info("wrote %d pixels (%d rejected draws)", scene.pixels.shape[0],
                 scene.provenance["rejected_draws"])
        return
    if args.command == "score":
        if args.pixels:
            M, columns, d = read_matrix_csv(args.pixels)
            pixels = M[:, :d]
        else:
            pixels = generate_scene(config).pixels
        scores = score_scene(config, pixels)
        names = list(scores)
        matrix = np.column_stack([scores[n] for n in names]) if names else np.empty((0, 0))
        _emit(format_matrix_csv(matrix.reshape(pixels.shape[0], len(names)), names, len(names)), args.out)
        log.info("scored %d pixels with %d detectors", pixels.shape[0], len(names))
        return
    doc = run_experiment(config, stages=(args.command,))
    _emit(dump_json(doc), args.out)
    log.info("%s finished in %.2fs", args.command, sum(doc["timings"].values()))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        _run(args)
    except (ConfigError, ContractError, DomainError) as exc:
        _error_record(exc)
        return EXIT_VALIDATION
    except NumericError as exc:
        _error_record(exc)
        return EXIT_NUMERIC
    return EXIT_OK


def _error_record(exc: Exception) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
