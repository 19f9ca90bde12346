"""Command-line interface: run experiments, score probability files, generate
synthetic datasets."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

import numpy as np

from .core import RngStream
from .data import gen_blobs, gen_two_moons, save_csv
from .experiment import SAMPLERS, emit_reports, load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="almix",
        description="Pool-based active-learning simulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("--config", required=True, help="YAML or JSON experiment config")
    run_p.add_argument(
        "--out", default=None,
        help="output directory for reports (falls back to the config's output_dir)",
    )
    run_p.add_argument(
        "--dump-samples", action="store_true",
        help="also write per-sample records for every cycle",
    )
    run_p.add_argument(
        "--seed-override", default=None,
        help="comma-separated seeds replacing the config's list",
    )

    score_p = sub.add_parser("score", help="score a CSV of probability rows")
    score_p.add_argument(
        "--method", required=True,
        choices=[name for name in SAMPLERS if name != "random"],
    )
    score_p.add_argument("--probs", required=True, help="input CSV, one probability row per line")
    score_p.add_argument("--out", required=True, help="output CSV of row,score pairs")

    gen_p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    gen_p.add_argument("--generator", required=True, choices=["blobs", "two_moons"])
    gen_p.add_argument("--out", required=True)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--n-per-class", type=int, default=100, help="blobs only")
    gen_p.add_argument("--num-classes", type=int, default=2, help="blobs only")
    gen_p.add_argument("--dim", type=int, default=2, help="blobs only")
    gen_p.add_argument("--spread", type=float, default=1.0, help="blobs only")
    gen_p.add_argument("--n", type=int, default=1000, help="two_moons only")
    gen_p.add_argument("--noise", type=float, default=0.1, help="two_moons only")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    out_dir = args.out or config.output_dir
    if out_dir is None:
        raise ValueError("no output directory: pass --out or set output_dir in the config")
    if args.seed_override:
        seeds = tuple(int(s) for s in args.seed_override.split(","))
        config = dataclasses.replace(config, seeds=seeds)
    dumps = {} if args.dump_samples else None

    def sink(seed, cycle, records):
        dumps[(seed, cycle)] = records

    reports, summary = run_experiment(config, record_sink=sink if args.dump_samples else None)
    written = emit_reports(reports, summary, out_dir, sample_dumps=dumps)
    for row in summary["cycles"]:
        print(
            f"cycle {row['cycle']:3d}  labeled {row['labeled']:6d}  "
            f"accuracy {row['accuracy']['mean']:.4f} +- {row['accuracy']['std']:.4f}  "
            f"oe {row['oe']['mean']:.4f} +- {row['oe']['std']:.4f}"
        )
    print(f"wrote {len(written)} files under {out_dir}")
    return 0


def _cmd_score(args) -> int:
    scorer, _ = SAMPLERS[args.method]
    with open(args.probs, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{args.probs}: no probability rows")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]  # header row
    scores = []
    for k, row in enumerate(rows):
        try:
            probs = np.asarray([float(c) for c in row], dtype=np.float64)
            scores.append((k, scorer(probs)))
        except ValueError as exc:
            raise ValueError(f"{args.probs}: row {k}: {exc}") from None
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "score"])
        for k, s in scores:
            writer.writerow([k, repr(s)])
    print(f"scored {len(scores)} rows with {args.method} -> {args.out}")
    return 0


def _cmd_gen_data(args) -> int:
    rng = RngStream(args.seed, "data-gen")
    if args.generator == "blobs":
        dataset = gen_blobs(args.n_per_class, args.num_classes, args.dim, args.spread, rng)
    else:
        dataset = gen_two_moons(args.n, args.noise, rng)
    save_csv(dataset, args.out)
    print(f"wrote {dataset.n} rows ({dataset.num_classes} classes) -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "score":
            return _cmd_score(args)
        return _cmd_gen_data(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
