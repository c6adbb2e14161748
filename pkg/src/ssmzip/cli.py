"""Command-line interface: compress, decompress, bench, ablate.

Exit codes: 0 success, 1 usage or I/O error, 2 corrupt or incompatible
archive, 3 numeric fault during coding.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .errors import CorruptArchiveError, IncompatibleTokenizerError, NumericFaultError, SsmzipError
from .pipeline import PipelineConfig, ProgressPoint, compress, decompress, variant_config
from .tokenizer import load_definition

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CORRUPT = 2
EXIT_NUMERIC = 3

DEFAULT_ASSET = Path(__file__).resolve().parent / "assets" / "tokenizer.json.gz"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tokenizer", type=Path, default=DEFAULT_ASSET,
                   help="tokenizer definition asset (gzipped JSON)")
    p.add_argument("--seed", type=int, default=0, help="model init seed")
    p.add_argument("--threads", type=int, default=1,
                   help="accepted for compatibility; coding is sequential")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssmzip", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compress", help="compress a file")
    c.add_argument("input", type=Path)
    c.add_argument("output", type=Path)
    c.add_argument("--stats", type=Path, default=None,
                   help="write a per-interval bits-per-token table here")
    c.add_argument("--stats-interval", type=int, default=1000)
    c.add_argument("--progress", action="store_true")
    _add_common(c)

    d = sub.add_parser("decompress", help="decompress an archive")
    d.add_argument("input", type=Path)
    d.add_argument("output", type=Path)
    _add_common(d)

    b = sub.add_parser("bench", help="compress files and report a table")
    b.add_argument("inputs", type=Path, nargs="+")
    _add_common(b)

    a = sub.add_parser("ablate", help="run one ablation variant")
    a.add_argument("input", type=Path)
    a.add_argument("--variant", required=True,
                   choices=["count-only", "ngram+count", "ssm+count", "full"])
    _add_common(a)
    return ap


def _write_stats(path: Path, trace: list[ProgressPoint]) -> None:
    with open(path, "w") as f:
        f.write("tokens\tcumulative_bits\tinterval_bpt\n")
        for pt in trace:
            f.write(f"{pt.tokens_seen}\t{pt.cumulative_bits}\t{pt.interval_bpt:.4f}\n")


def cli_main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        definition = load_definition(args.tokenizer)
    except (OSError, SsmzipError) as e:
        print(f"ssmzip: cannot load tokenizer: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "compress":
            data = args.input.read_bytes()
            cfg = PipelineConfig()
            cfg.model.rng_seed = args.seed
            trace: list[ProgressPoint] = []
            every = args.stats_interval if args.stats else 0
            t0 = time.time()
            archive = compress(data, definition, cfg, trace_every=every, trace=trace)
            args.output.write_bytes(archive)
            if args.stats:
                _write_stats(args.stats, trace)
            if args.progress:
                bpb = 8 * len(archive) / len(data) if data else 0.0
                print(f"{len(data)} -> {len(archive)} bytes "
                      f"({bpb:.3f} bpb, {time.time() - t0:.1f}s)")

        elif args.command == "decompress":
            archive = args.input.read_bytes()
            cfg = PipelineConfig()
            args.output.write_bytes(decompress(archive, definition, cfg))

        elif args.command == "bench":
            print(f"{'input':30s} {'bytes_in':>10s} {'bytes_out':>10s} "
                  f"{'bpb':>7s} {'raw_bpb':>7s} {'seconds':>8s}")
            for path in args.inputs:
                data = path.read_bytes()
                cfg = PipelineConfig()
                cfg.model.rng_seed = args.seed
                t0 = time.time()
                archive = compress(data, definition, cfg)
                dt = time.time() - t0
                bpb = 8 * len(archive) / len(data) if data else 0.0
                print(f"{path.name:30s} {len(data):10d} {len(archive):10d} "
                      f"{bpb:7.3f} {8.0:7.3f} {dt:8.1f}")

        elif args.command == "ablate":
            data = args.input.read_bytes()
            cfg = variant_config(args.variant, seed=args.seed)
            t0 = time.time()
            archive = compress(data, definition, cfg)
            bpb = 8 * len(archive) / len(data) if data else 0.0
            print(f"{args.variant}\t{len(data)}\t{len(archive)}\t{bpb:.3f}\t"
                  f"{time.time() - t0:.1f}s")

    except FileNotFoundError as e:
        print(f"ssmzip: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CorruptArchiveError, IncompatibleTokenizerError) as e:
        print(f"ssmzip: {e}", file=sys.stderr)
        return EXIT_CORRUPT
    except NumericFaultError as e:
        print(f"ssmzip: numeric fault: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    raise SystemExit(cli_main())
