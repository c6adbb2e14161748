"""Byte-level BPE tokenizer driven by an external definition file.

The definition lists a vocabulary of byte sequences (the first 256 entries are
always the single bytes, so any binary input tokenizes) and an ordered list of
merge rules. Encoding splits the input into pretokens with a fixed regex and
applies merges greedily, lowest rank first. Decoding is concatenation.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import CorruptArchiveError, DefinitionLoadError

# Pretokens never span these boundaries, which keeps merge application local
# and cacheable. A single optional leading space attaches to the next word.
_PRETOKEN_RE = re.compile(
    rb" ?[A-Za-z]+| ?[0-9]+| ?[^A-Za-z0-9\s]+|\s+(?!\S)|\s+"
)

# Merge application is quadratic in piece length; long runs (binary blobs,
# repeated bytes) are chopped so cost stays bounded.
_MAX_PIECE = 64


def pretokenize(data: bytes) -> list[bytes]:
    """Split bytes into pretokens. The pieces always concatenate back to data."""
    pieces = []
    for piece in _PRETOKEN_RE.findall(data):
        if len(piece) <= _MAX_PIECE:
            pieces.append(piece)
        else:
            pieces.extend(
                piece[i : i + _MAX_PIECE] for i in range(0, len(piece), _MAX_PIECE)
            )
    return pieces


@dataclass
class TokenizerDefinition:
    """Vocabulary + ordered merge rules, as loaded from an asset file.

    vocabulary[i] is the byte sequence for global token id i. merges is an
    ordered list of (left_id, right_id, new_id); earlier rules have priority.
    """

    vocabulary: list[bytes]
    merges: list[tuple[int, int, int]]
    fingerprint: int = field(init=False)
    # (left, right) -> (rank, new_id); built once, shared by all encode calls
    _ranks: dict[tuple[int, int], tuple[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        self._validate()
        self.fingerprint = _fingerprint(self.vocabulary, self.merges)
        self._ranks = {
            (l, r): (rank, n) for rank, (l, r, n) in enumerate(self.merges)
        }

    def _validate(self):
        v = len(self.vocabulary)
        for b in range(256):
            if self.vocabulary[b] != bytes([b]):
                raise DefinitionLoadError(
                    f"vocabulary entry {b} is not the single byte 0x{b:02x}"
                )
        for l, r, n in self.merges:
            if not (0 <= l < v and 0 <= r < v and 0 <= n < v):
                raise DefinitionLoadError(f"merge rule ({l},{r},{n}) out of range")
            if self.vocabulary[n] != self.vocabulary[l] + self.vocabulary[r]:
                raise DefinitionLoadError(
                    f"merge rule ({l},{r},{n}) does not concatenate"
                )

    @property
    def size(self) -> int:
        return len(self.vocabulary)


def _fingerprint(vocabulary: list[bytes], merges) -> int:
    h = hashlib.sha256()
    for entry in vocabulary:
        h.update(len(entry).to_bytes(4, "little"))
        h.update(entry)
    for l, r, n in merges:
        h.update(l.to_bytes(4, "little"))
        h.update(r.to_bytes(4, "little"))
        h.update(n.to_bytes(4, "little"))
    return int.from_bytes(h.digest()[:8], "little")


def load_definition(path: str) -> TokenizerDefinition:
    """Load a definition from a JSON (optionally gzipped) asset file."""
    try:
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "rt", encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, ValueError, UnicodeDecodeError) as e:
        raise DefinitionLoadError(f"cannot load tokenizer asset {path}: {e}") from e
    try:
        vocabulary = [s.encode("latin-1") for s in raw["vocabulary"]]
        merges = [(int(l), int(r), int(n)) for l, r, n in raw["merges"]]
    except (KeyError, TypeError, ValueError, UnicodeEncodeError) as e:
        raise DefinitionLoadError(f"malformed tokenizer asset {path}: {e}") from e
    return TokenizerDefinition(vocabulary, merges)


def save_definition(definition: TokenizerDefinition, path: str) -> None:
    raw = {
        "vocabulary": [b.decode("latin-1") for b in definition.vocabulary],
        "merges": [list(m) for m in definition.merges],
    }
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="utf-8") as f:
        json.dump(raw, f, ensure_ascii=True)


def tokenizer_fingerprint(definition: TokenizerDefinition) -> int:
    """64-bit content hash of vocabulary + merges."""
    return definition.fingerprint


def _apply_merges(ids: list[int], ranks) -> list[int]:
    """Greedy BPE: repeatedly merge the lowest-ranked adjacent pair."""
    while len(ids) > 1:
        best_rank = None
        best_pos = -1
        best_new = -1
        for i in range(len(ids) - 1):
            hit = ranks.get((ids[i], ids[i + 1]))
            if hit is not None and (best_rank is None or hit[0] < best_rank):
                best_rank, best_new = hit
                best_pos = i
        if best_rank is None:
            break
        ids[best_pos : best_pos + 2] = [best_new]
    return ids


def bpe_encode(data: bytes, definition: TokenizerDefinition) -> list[int]:
    """Tokenize arbitrary bytes into global token ids."""
    ranks = definition._ranks
    cache: dict[bytes, list[int]] = {}
    out: list[int] = []
    for piece in pretokenize(data):
        toks = cache.get(piece)
        if toks is None:
            toks = _apply_merges(list(piece), ranks)
            cache[piece] = toks
        out.extend(toks)
    return out


def bpe_decode(tokens, definition: TokenizerDefinition) -> bytes:
    """Inverse of bpe_encode: concatenate vocabulary entries."""
    vocab = definition.vocabulary
    v = len(vocab)
    parts = []
    for t in tokens:
        if not 0 <= t < v:
            raise CorruptArchiveError(f"token id {t} out of range (V={v})")
        parts.append(vocab[t])
    return b"".join(parts)
