"""Command-line harness.

Subcommands: generate (synthetic corpus to stream + manifest files),
ingest (replay a stream into sketches and sanity-check it), deviation
(similarity-estimate deviation report), scurve (empirical banding curve),
timing (sketch vs exact all-pairs wall clock), and lsh (end-to-end
candidate generation with optional verification).  All reports are CSV
with a leading parameter echo line; exit status is 0 on success and 2 on
parse, data, or generation errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import IO, Iterator, Sequence
from contextlib import contextmanager

from .bench import (
    DEFAULT_GRID,
    DEFAULT_PLANTED_RANGES,
    deviation_report,
    generate,
    generate_distribution,
    ingest,
    read_manifest,
    scurve_report,
    timing_report,
    write_deviation_csv,
    write_manifest,
    write_scurve_csv,
    write_stream,
    write_timing_csv,
)
from .distance import DistanceEstimator
from .errors import GenerationError, StreamDataError, StreamParseError
from .lsh import LshConfig, LshIndex, write_candidates_csv
from .similarity import jaccard


def _seed_value(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError(f"seed must fit in 64 bits, got {text}")
    return value


def _parse_ranges(text: str) -> tuple[tuple[float, float], ...]:
    """Comma-separated low:high target intervals; 'none' for no planting."""
    if text.strip().lower() in ("", "none"):
        return ()
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _parse_deviation_grid(text: str) -> tuple[tuple[int, float], ...]:
    """Comma-separated buckets:alpha combinations, e.g. 128:0.05,256:0.025."""
    out = []
    for part in text.split(","):
        c2, _, alpha = part.partition(":")
        out.append((int(c2), float(alpha)))
    return tuple(out)


def _parse_scurve_grid(text: str) -> tuple[tuple[int, int, float, int], ...]:
    """Comma-separated r:l:alpha:buckets combinations."""
    out = []
    for part in text.split(","):
        fields = part.split(":")
        if len(fields) != 4:
            raise ValueError(f"expected r:l:alpha:buckets, got {part!r}")
        out.append((int(fields[0]), int(fields[1]), float(fields[2]), int(fields[3])))
    return tuple(out)


@contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="ascii", newline="") as fh:
            yield fh


_ALPHA_HELP = (
    "per-item sampling rate in (0, 1]; mapped to sketch level "
    "ceil(log2(1/alpha)) - 1 (clamped to the valid range), so the realized "
    "rate 2^-level is the nearest power of two at or above alpha; 1 means "
    "no subsampling"
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=_seed_value, default=0, help="64-bit master seed (default 0)")
    sub.add_argument("--out", default=None, help="output path (default: stdout for reports)")


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.out is None:
        raise GenerationError("generate requires --out PREFIX for the stream and manifest files")
    density = (args.density[0], args.density[1])
    if args.distribution:
        corpus = generate_distribution(args.pairs, args.cols, density, seed=args.seed)
    else:
        ranges = DEFAULT_PLANTED_RANGES if args.ranges is None else args.ranges
        corpus = generate(args.rows, args.cols, density, ranges, args.every, args.seed)
    stream_path = args.out + ".stream"
    manifest_path = args.out + ".manifest.csv"
    updates = write_stream(corpus, stream_path, churn=args.churn, seed=args.seed)
    write_manifest(corpus.manifest, manifest_path)
    print(
        f"wrote {updates} updates for {corpus.n} rows over universe {corpus.d} "
        f"to {stream_path}; {len(corpus.manifest)} labeled pairs in {manifest_path}"
    )
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    corpus = ingest(args.stream, args.buckets, args.seed)
    cards = [sk.cardinality for sk in corpus.sketches]
    lo = min(cards) if cards else 0
    hi = max(cards) if cards else 0
    print(f"ingested {corpus.n} rows over universe {corpus.d}; cardinality range [{lo}, {hi}]")
    if args.out is not None:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            fh.write(f"# stream={args.stream} buckets={args.buckets} seed={args.seed}\n")
            fh.write("row,cardinality\n")
            for j, c in enumerate(cards):
                fh.write(f"{j},{c}\n")
    return 0


def _cmd_deviation(args: argparse.Namespace) -> int:
    corpus = ingest(args.stream, args.buckets, args.seed)
    manifest = read_manifest(args.manifest)
    rows = deviation_report(
        corpus.sets,
        manifest,
        corpus.d,
        args.grid,
        trials=args.trials,
        split=args.split,
        low_sample=args.low_sample,
        master_seed=args.seed,
    )
    params = {
        "stream": args.stream,
        "manifest": args.manifest,
        "grid": ",".join(f"{c}:{a}" for c, a in args.grid),
        "trials": args.trials,
        "split": args.split,
        "low_sample": args.low_sample,
        "seed": args.seed,
    }
    with _open_out(args.out) as fh:
        write_deviation_csv(rows, fh, params)
    return 0


def _cmd_scurve(args: argparse.Namespace) -> int:
    corpus = ingest(args.stream, args.buckets, args.seed)
    manifest = read_manifest(args.manifest)
    rows = scurve_report(
        corpus.sets,
        manifest,
        corpus.d,
        args.grid,
        trials=args.trials,
        bin_width=args.bin_width,
        master_seed=args.seed,
    )
    params = {
        "stream": args.stream,
        "manifest": args.manifest,
        "grid": ",".join(f"{r}:{l}:{a}:{c}" for r, l, a, c in args.grid),
        "trials": args.trials,
        "bin_width": args.bin_width,
        "seed": args.seed,
    }
    with _open_out(args.out) as fh:
        write_scurve_csv(rows, fh, params)
    return 0


def _cmd_timing(args: argparse.Namespace) -> int:
    corpus = ingest(args.stream, args.buckets, args.seed)
    row = timing_report(corpus.sets, corpus.d, args.buckets, args.alpha, args.seed)
    params = {
        "stream": args.stream,
        "buckets": args.buckets,
        "alpha": args.alpha,
        "seed": args.seed,
    }
    with _open_out(args.out) as fh:
        write_timing_csv([row], fh, params)
    return 0


def _cmd_lsh(args: argparse.Namespace) -> int:
    corpus = ingest(args.stream, args.buckets, args.seed)
    cfg = LshConfig(
        r1=args.r1,
        r2=args.r2,
        epsilon=args.eps,
        delta=args.delta,
        bands_r=args.bands,
        repetitions_l=args.reps,
    )
    index = LshIndex(cfg, corpus.randomness)
    for j, sketch in enumerate(corpus.sketches):
        index.insert(j, sketch)
    pairs = index.candidates()
    if args.threshold is not None:
        estimator = DistanceEstimator(jaccard(corpus.d), corpus.randomness)
        pairs = index.verify(pairs, estimator, args.threshold)
    with _open_out(args.out) as fh:
        write_candidates_csv(pairs, fh)
    print(f"{len(pairs)} candidate pairs", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynlsh",
        description="Sketch-based set similarity over dynamic update streams.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("generate", help="write a synthetic corpus as stream + manifest files")
    p.add_argument("--rows", type=int, default=1000, help="base rows (default 1000)")
    p.add_argument("--cols", type=int, default=10_000, help="universe size d (default 10000)")
    p.add_argument(
        "--density",
        type=float,
        nargs=2,
        metavar=("LOW", "HIGH"),
        default=[0.01, 0.05],
        help="per-row density range (default 0.01 0.05)",
    )
    p.add_argument(
        "--ranges",
        type=_parse_ranges,
        default=None,
        help="planted similarity intervals low:high,... ('none' disables; "
        "default 0.35:0.45 through 0.85:0.95)",
    )
    p.add_argument("--every", type=int, default=100, help="plant a partner per EVERY base rows")
    p.add_argument(
        "--churn",
        type=float,
        default=0.0,
        help="extra cancelling updates per row as a fraction of row size (default 0)",
    )
    p.add_argument(
        "--distribution",
        action="store_true",
        help="plant --pairs pairs with targets drawn from the built-in similarity histogram",
    )
    p.add_argument("--pairs", type=int, default=500, help="pair count for --distribution mode")
    _add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = subs.add_parser("ingest", help="replay a stream, validate it, report cardinalities")
    p.add_argument("--stream", required=True, help="stream file path")
    p.add_argument("--buckets", type=int, default=256, help="sketch row width c^2 (default 256)")
    _add_common(p)
    p.set_defaults(func=_cmd_ingest)

    p = subs.add_parser("deviation", help="similarity-estimate deviation per (buckets, alpha)")
    p.add_argument("--stream", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--buckets", type=int, default=256, help="row width for the ingest pass")
    p.add_argument(
        "--grid",
        type=_parse_deviation_grid,
        default=DEFAULT_GRID,
        help="buckets:alpha combinations (default 128:0.05,256:0.025,512:0.01,1024:0.005)",
    )
    p.add_argument("--trials", type=int, default=10, help="seed repetitions (default 10)")
    p.add_argument(
        "--split",
        type=float,
        default=0.2,
        help="exact-similarity threshold separating the high and low sections (default 0.2)",
    )
    p.add_argument(
        "--low-sample",
        type=int,
        default=2000,
        help="random unlabeled pairs added to the low section (default 2000)",
    )
    _add_common(p)
    p.set_defaults(func=_cmd_deviation)

    p = subs.add_parser("scurve", help="empirical banding curve vs 1-(1-s^r)^l")
    p.add_argument("--stream", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--buckets", type=int, default=256, help="row width for the ingest pass")
    p.add_argument(
        "--grid",
        type=_parse_scurve_grid,
        default=((10, 40, 0.005, 1024),),
        help="r:l:alpha:buckets combinations (default 10:40:0.005:1024)",
    )
    p.add_argument("--trials", type=int, default=5, help="seed repetitions (default 5)")
    p.add_argument("--bin-width", type=float, default=0.05, help="similarity bin width")
    _add_common(p)
    p.set_defaults(func=_cmd_scurve)

    p = subs.add_parser("timing", help="sketch vs exact all-pairs similarity wall clock")
    p.add_argument("--stream", required=True)
    p.add_argument("--buckets", type=int, default=256, help="sketch row width c^2")
    p.add_argument("--alpha", type=float, default=0.01, help=_ALPHA_HELP)
    _add_common(p)
    p.set_defaults(func=_cmd_timing)

    p = subs.add_parser("lsh", help="index a stream and emit candidate pairs")
    p.add_argument("--stream", required=True)
    p.add_argument("--buckets", type=int, default=1024, help="sketch row width c^2")
    p.add_argument("--r1", type=float, default=0.5, help="target similarity to retrieve")
    p.add_argument("--r2", type=float, default=0.1, help="similarity to reject")
    p.add_argument("--eps", type=float, default=0.5, help="estimation accuracy knob in (0,1)")
    p.add_argument("--delta", type=float, default=0.1, help="failure probability knob in (0,1)")
    p.add_argument("--bands", type=int, default=1, help="signatures concatenated per repetition")
    p.add_argument("--reps", type=int, default=1, help="independent repetitions")
    p.add_argument(
        "--threshold",
        type=float,
        default=None,
        help="verify candidates and keep those with estimated distance <= THRESHOLD",
    )
    _add_common(p)
    p.set_defaults(func=_cmd_lsh)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (StreamParseError, StreamDataError, GenerationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
