#!/usr/bin/env python3
"""Build the English text corpus used for tokenizer training and benchmarks.

Sources, in deterministic order: package long-descriptions from installed
dist-info METADATA files, then module/class/function docstrings from installed
Python sources. Paragraphs are deduplicated by hash. Output:

    corpus/benchmark.txt   first BENCH_BYTES of the corpus (evaluation slice)
    corpus/train.txt       the remainder (tokenizer training slice)

The two slices are disjoint so the tokenizer is not fitted to the benchmark.
"""

from __future__ import annotations

import ast
import hashlib
import os
import random
import sys
import sysconfig
from pathlib import Path

BENCH_BYTES = 3 * 1024 * 1024
TRAIN_BYTES = 12 * 1024 * 1024
OUT_DIR = Path(__file__).resolve().parent.parent / "corpus"


def metadata_bodies(site: str):
    paths = []
    for root, dirs, files in os.walk(site):
        dirs.sort()
        if root.endswith(".dist-info") and "METADATA" in files:
            paths.append(os.path.join(root, "METADATA"))
    for path in sorted(paths):
        try:
            text = Path(path).read_text(encoding="utf-8", errors="ignore")
        except OSError:
            continue
        # body after the RFC-822 header block is the long description
        head, sep, body = text.partition("\n\n")
        if sep:
            yield body


def docstrings(site: str):
    paths = []
    for root, dirs, files in os.walk(site):
        dirs.sort()
        for f in files:
            if f.endswith(".py"):
                paths.append(os.path.join(root, f))
    for path in sorted(paths):
        try:
            src = Path(path).read_text(encoding="utf-8", errors="ignore")
            tree = ast.parse(src)
        except (OSError, SyntaxError, ValueError):
            continue
        for node in ast.walk(tree):
            if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef,
                                 ast.AsyncFunctionDef)):
                doc = ast.get_docstring(node)
                if doc and len(doc) > 80:
                    yield doc


def main() -> int:
    site = sysconfig.get_paths()["purelib"]
    seen: set[bytes] = set()
    pieces: list[str] = []
    total = 0
    budget = BENCH_BYTES + TRAIN_BYTES
    for source in (metadata_bodies(site), docstrings(site)):
        for text in source:
            for para in text.split("\n\n"):
                para = para.strip()
                if len(para) < 60:
                    continue
                # near-duplicate filter: license texts and templated
                # boilerplate differ only in names/years, so key on a
                # normalized prefix rather than the exact paragraph
                norm = " ".join(para.lower().split())[:120]
                digest = hashlib.sha256(norm.encode()).digest()[:16]
                if digest in seen:
                    continue
                seen.add(digest)
                pieces.append(para)
                total += len(para) + 2
            if total >= budget:
                break
        if total >= budget:
            break

    # fixed-seed shuffle: the site-packages walk is alphabetical, which puts
    # every package's paragraphs adjacent and makes early slices unusually
    # self-similar; shuffling mixes sources evenly across both outputs
    random.Random(0).shuffle(pieces)
    blob = "\n\n".join(pieces).encode("utf-8", errors="ignore")[:budget]
    # avoid splitting a UTF-8 sequence at the cut points
    def clean_cut(b: bytes) -> bytes:
        while b and b[-1] >= 0x80:
            b = b[:-1]
        return b

    OUT_DIR.mkdir(exist_ok=True)
    bench = clean_cut(blob[:BENCH_BYTES])
    train = clean_cut(blob[BENCH_BYTES:])
    (OUT_DIR / "benchmark.txt").write_bytes(bench)
    (OUT_DIR / "train.txt").write_bytes(train)
    print(f"benchmark: {len(bench)} bytes, train: {len(train)} bytes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
