"""Count-based auxiliary predictors: n-gram tables, match model, recency, frequency.

Nine count tables feed sparse logit increments of the form lam * ln(1 + c/alpha):
a direct bigram array (context length 1) and eight hashed tables for context
lengths 2, 3, 4, 5, 6, 7, 15 and 31. Short contexts (2 and 3 tokens) use
exactly packed 64-bit keys; longer ones use a polynomial rolling hash. On top
of those sit a single-entry match table keyed by the last two tokens, a
64-token recency window, and global per-token frequency counts.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
SLOT_BITS = 24
LZ_SLOT_BITS = 22
PROBE_DEPTH = 8
LIST_CAP_MAX = 32
COUNT_MAX = 0xFFFF

# (context length, lam, alpha); length 1 is the direct bigram array
TABLE_PARAMS = [
    (1, 0.15, 0.10),
    (2, 0.10, 0.05),
    (3, 0.08, 0.03),
    (4, 0.06, 0.02),
    (5, 0.05, 0.015),
    (6, 0.04, 0.010),
    (7, 0.03, 0.008),
    (15, 0.50, 0.001),
    (31, 1.00, 0.001),
]
EXACT_LENGTHS = frozenset({2, 3})

LZ_BOOST = 1.5
LZ_RATE = 0.3
RECENCY_LAM = 0.05
RECENCY_LEN = 64
FREQ_LAM = 0.1


def mix64(x: int) -> int:
    """64-bit avalanche finalizer (splitmix64); bijective."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def context_key(ctx_len: int, recent: list[int]) -> int:
    """64-bit key for the last ctx_len tokens (recent[-1] is the newest).

    Exact mode packs 16 bits per token, newest in the lowest bits; rolling
    mode folds oldest to newest with multiplier 104729 from seed = ctx_len,
    then mixes. Zero is the empty-slot sentinel, so real keys avoid it.
    """
    if ctx_len in EXACT_LENGTHS:
        key = 0
        for t in recent[-ctx_len:]:
            key = (key << 16) | t
    else:
        key = ctx_len
        for t in recent[-ctx_len:]:
            key = (key * 104729 + t) & _MASK64
        key = mix64(key)
    return key if key != 0 else 1


def ngram_bias(counts: list[list[int]], lam: float, alpha: float) -> list[tuple[int, float]]:
    """Logit increments lam * ln(1 + c/alpha) for each (token, count) pair."""
    return [(tok, lam * math.log1p(c / alpha)) for tok, c in counts]


def _bump(entry: list[list[int]], token: int) -> None:
    """Increment token's count in a sparse list, growing 4 -> 8 -> 16 -> 32."""
    for pair in entry:
        if pair[0] == token:
            if pair[1] < COUNT_MAX:
                pair[1] += 1
            return
    if len(entry) >= LIST_CAP_MAX:
        victim = min(range(len(entry)), key=lambda i: entry[i][1])
        entry[victim] = [token, 1]
    else:
        entry.append([token, 1])


class NgramTable:
    """Open-addressed count table: 2^24 slots, linear probing, depth 8.

    Slots live in a dict keyed by slot index (the virtual array is far too
    sparse to materialize); each holds (context key, sparse count list).
    Inserts that exhaust the probe window are discarded.
    """

    def __init__(self, ctx_len: int, lam: float, alpha: float):
        self.ctx_len = ctx_len
        self.lam = lam
        self.alpha = alpha
        self._slots: dict[int, tuple[int, list[list[int]]]] = {}
        self.lookups = 0
        self.extra_probes = 0

    @property
    def occupied(self) -> int:
        return len(self._slots)

    def lookup(self, key: int) -> list[list[int]] | None:
        home = mix64(key) & ((1 << SLOT_BITS) - 1)
        for d in range(PROBE_DEPTH):
            slot = (home + d) & ((1 << SLOT_BITS) - 1)
            entry = self._slots.get(slot)
            if entry is None:
                return None
            if entry[0] == key:
                self.lookups += 1
                self.extra_probes += d
                return entry[1]
        return None

    def update(self, key: int, token: int) -> None:
        home = mix64(key) & ((1 << SLOT_BITS) - 1)
        for d in range(PROBE_DEPTH):
            slot = (home + d) & ((1 << SLOT_BITS) - 1)
            entry = self._slots.get(slot)
            if entry is None:
                self._slots[slot] = (key, [[token, 1]])
                return
            if entry[0] == key:
                _bump(entry[1], token)
                return
        # probe window full of other contexts: drop the observation


class BigramArray:
    """Per-previous-token sparse count lists, indexed directly by compact id."""

    def __init__(self, v_e: int):
        self._rows: list[list[list[int]] | None] = [None] * v_e

    def lookup(self, prev: int) -> list[list[int]] | None:
        return self._rows[prev]

    def update(self, prev: int, token: int) -> None:
        row = self._rows[prev]
        if row is None:
            self._rows[prev] = [[token, 1]]
        else:
            _bump(row, token)


class LzTable:
    """Single-entry match cache keyed by the last two tokens."""

    def __init__(self):
        self._slots: dict[int, list[int]] = {}  # slot -> [key, predicted, c]

    @staticmethod
    def _key(t2: int, t1: int) -> int:
        key = (t2 << 16) | t1
        return key if key != 0 else 1

    def predict(self, t2: int, t1: int) -> tuple[int, float] | None:
        key = self._key(t2, t1)
        slot = mix64(key) & ((1 << LZ_SLOT_BITS) - 1)
        entry = self._slots.get(slot)
        if entry is None or entry[0] != key:
            return None
        c = entry[2]
        return entry[1], LZ_BOOST * (1.0 - 1.0 / (1.0 + LZ_RATE * c))

    def update(self, t2: int, t1: int, actual: int) -> None:
        key = self._key(t2, t1)
        slot = mix64(key) & ((1 << LZ_SLOT_BITS) - 1)
        entry = self._slots.get(slot)
        if entry is not None and entry[0] == key and entry[1] == actual:
            if entry[2] < COUNT_MAX:
                entry[2] += 1
        else:
            self._slots[slot] = [key, actual, 1]


class RecencyWindow:
    """Ring of the last 64 ids; newer occurrences shadow older duplicates."""

    def __init__(self):
        self._ring: list[int] = []

    def push(self, token: int) -> None:
        self._ring.append(token)
        if len(self._ring) > RECENCY_LEN:
            del self._ring[0]

    def bias(self) -> list[tuple[int, float]]:
        out = []
        seen = set()
        for j, tok in enumerate(reversed(self._ring), start=1):
            if tok in seen:
                continue
            seen.add(tok)
            out.append((tok, RECENCY_LAM * math.exp(-3.0 * (j - 1) / RECENCY_LEN)))
        return out


class GlobalCounts:
    """Cumulative per-token counts with the frequency bias kept incrementally."""

    def __init__(self, v_e: int):
        self.counts = np.zeros(v_e, dtype=np.int64)
        self.bias = np.zeros(v_e, dtype=np.float64)

    def push(self, token: int) -> None:
        self.counts[token] += 1
        self.bias[token] = FREQ_LAM * math.log(self.counts[token] + 1)


class ContextState:
    """All auxiliary predictors plus the token history driving them.

    biases(s) must be called before update(token) for the same position; the
    update order (recency and counts, then count tables, then the match
    table) is fixed so that compression and decompression replay identically.
    """

    def __init__(self, v_e: int, use_ngram: bool = True, use_count: bool = True):
        self.v_e = v_e
        self.use_ngram = use_ngram
        self.use_count = use_count
        self.history: list[int] = []
        self.bigram = BigramArray(v_e)
        self.tables = [NgramTable(n, lam, a) for n, lam, a in TABLE_PARAMS if n != 1]
        self.lz = LzTable()
        self.recency = RecencyWindow()
        self.freq = GlobalCounts(v_e)

    def biases(self, s: float) -> tuple[list[tuple[int, float]], np.ndarray | None]:
        """Sparse (token, delta) increments and the dense frequency term.

        The scale s multiplies the n-gram and frequency terms only; match and
        recency bonuses are applied unscaled.
        """
        sparse: list[tuple[int, float]] = []
        h = self.history
        n_hist = len(h)
        if self.use_ngram:
            if n_hist >= 1:
                row = self.bigram.lookup(h[-1])
                if row is not None:
                    lam, alpha = TABLE_PARAMS[0][1], TABLE_PARAMS[0][2]
                    sparse.extend((t, s * d) for t, d in ngram_bias(row, lam, alpha))
            for table in self.tables:
                if n_hist < table.ctx_len:
                    continue
                counts = table.lookup(context_key(table.ctx_len, h))
                if counts is not None:
                    sparse.extend(
                        (t, s * d) for t, d in ngram_bias(counts, table.lam, table.alpha)
                    )
            if n_hist >= 2:
                hit = self.lz.predict(h[-2], h[-1])
                if hit is not None:
                    sparse.append(hit)
            sparse.extend(self.recency.bias())
        dense = s * self.freq.bias if self.use_count else None
        return sparse, dense

    def update(self, token: int) -> None:
        h = self.history
        n_hist = len(h)
        if self.use_count:
            self.freq.push(token)
        if self.use_ngram:
            self.recency.push(token)
            if n_hist >= 1:
                self.bigram.update(h[-1], token)
            for table in self.tables:
                if n_hist >= table.ctx_len:
                    table.update(context_key(table.ctx_len, h), token)
            if n_hist >= 2:
                self.lz.update(h[-2], h[-1], token)
        h.append(token)

    def probe_stats(self) -> tuple[float, float]:
        """(mean load factor, mean extra probes per successful lookup)."""
        lookups = sum(t.lookups for t in self.tables)
        extra = sum(t.extra_probes for t in self.tables)
        load = sum(t.occupied for t in self.tables) / (len(self.tables) * (1 << SLOT_BITS))
        return load, (extra / lookups if lookups else 0.0)
