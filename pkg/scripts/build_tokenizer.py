#!/usr/bin/env python3
"""Train the byte-level BPE tokenizer asset from the training corpus slice.

Pre-tokenization uses this package's own splitter; the HuggingFace tokenizers
trainer is only used to learn the merge list (bytes are round-tripped through
latin-1 so the trainer sees arbitrary bytes as characters). The result is
exported to the package's own asset format via save_definition.

Usage: build_tokenizer.py [corpus ...]  (defaults to corpus/train.txt)
"""

from __future__ import annotations

import sys
from pathlib import Path

from tokenizers import Tokenizer, models, trainers

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
from ssmzip.tokenizer import TokenizerDefinition, pretokenize, save_definition  # noqa: E402

VOCAB_SIZE = 49152
ASSET = Path(__file__).resolve().parent.parent / "src" / "ssmzip" / "assets" / "tokenizer.json.gz"


def main(argv: list[str]) -> int:
    paths = [Path(p) for p in argv[1:]] or [
        Path(__file__).resolve().parent.parent / "corpus" / "train.txt"
    ]

    def pretoken_stream():
        for path in paths:
            data = path.read_bytes()
            for piece in pretokenize(data):
                yield piece.decode("latin-1")

    tok = Tokenizer(models.BPE())
    trainer = trainers.BpeTrainer(
        vocab_size=VOCAB_SIZE,
        min_frequency=2,
        show_progress=True,
        initial_alphabet=[chr(i) for i in range(256)],
        limit_alphabet=256,
        special_tokens=[],
    )
    tok.train_from_iterator(pretoken_stream(), trainer=trainer)

    # Rebuild in this package's canonical layout: ids 0..255 are the single
    # bytes, merged tokens follow in merge order.
    vocabulary = [bytes([i]) for i in range(256)]
    ids: dict[bytes, int] = {v: i for i, v in enumerate(vocabulary)}
    merges: list[tuple[int, int, int]] = []
    raw_merges = tok.model.get_merges() if hasattr(tok.model, "get_merges") else None
    if raw_merges is None:
        # fall back to parsing the serialized model
        import json
        state = json.loads(tok.to_str())
        raw_merges = state["model"]["merges"]
    for merge in raw_merges:
        if isinstance(merge, str):
            l_str, r_str = merge.split(" ", 1)
        else:
            l_str, r_str = merge
        left = l_str.encode("latin-1")
        right = r_str.encode("latin-1")
        new = left + right
        if new in ids:
            continue
        new_id = len(vocabulary)
        vocabulary.append(new)
        ids[new] = new_id
        merges.append((ids[left], ids[right], new_id))

    definition = TokenizerDefinition(vocabulary=vocabulary, merges=merges)
    ASSET.parent.mkdir(exist_ok=True)
    save_definition(definition, ASSET)
    print(f"vocabulary: {len(vocabulary)} tokens, {len(merges)} merges -> {ASSET}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
