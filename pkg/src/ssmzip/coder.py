"""32-bit range arithmetic coder over integer CDFs with total 2**16.

The encoder keeps a 64-bit low accumulator for carry propagation and emits the
top byte whenever the range narrows below 2**24 (big-endian emission). The
decoder mirrors the arithmetic exactly; both sides must be driven with
identical frequency tables at every step.
"""

from __future__ import annotations

import numpy as np

from .errors import CoderMisuseError, CorruptArchiveError, UnsupportedVocabularyError

TOTAL_BITS = 16
TOTAL = 1 << TOTAL_BITS  # 65,536
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


def quantize_cdf(p: np.ndarray) -> np.ndarray:
    """Turn a probability vector into integer frequencies, sum TOTAL, min 1.

    Frequencies are apportioned by largest remainder on p * TOTAL; entries
    that would round to zero are clamped to 1 and the excess is removed one
    unit at a time from the largest entries. Fully deterministic.
    """
    n = len(p)
    if n >= TOTAL:
        raise UnsupportedVocabularyError(f"v_e={n} >= coder total {TOTAL}")
    t = np.asarray(p, dtype=np.float64) * TOTAL
    forced = t < 1.0
    n_forced = int(forced.sum())
    freq = np.empty(n, dtype=np.int64)
    if n_forced == n:
        # degenerate near-uniform tail: everything forced, apportion evenly
        freq[:] = 1
        _distribute(freq, t, TOTAL - n)
        return freq
    freq[forced] = 1
    live = ~forced
    budget = TOTAL - n_forced
    scaled = t[live] * (budget / float(t[live].sum()))
    q = np.floor(scaled).astype(np.int64)
    rem = scaled - q
    short = budget - int(q.sum())
    if short > 0:
        _add_to_largest_remainders(q, rem, short)
    freq[live] = q
    # scaling can still floor a live entry to 0; bump and rebalance
    zeros = freq == 0
    n_zero = int(zeros.sum())
    if n_zero:
        freq[zeros] = 1
        _remove_units(freq, n_zero)
    return freq


def _add_to_largest_remainders(q: np.ndarray, rem: np.ndarray, units: int) -> None:
    """Give one unit each to the `units` largest remainders, ties to low index."""
    if units >= len(rem):
        q += 1
        return
    kth = np.partition(rem, len(rem) - units)[len(rem) - units]
    above = rem > kth
    q[above] += 1
    left = units - int(above.sum())
    if left > 0:
        ties = np.flatnonzero(rem == kth)[:left]
        q[ties] += 1


def _distribute(freq: np.ndarray, t: np.ndarray, units: int) -> None:
    """Spread `units` across freq by largest t, ties to low index."""
    if units <= 0:
        return
    order = np.lexsort((np.arange(len(t)), -t))
    whole, part = divmod(units, len(t))
    freq += whole
    freq[order[:part]] += 1


def _remove_units(freq: np.ndarray, units: int) -> None:
    """Take `units` back from the largest entries, one at a time, never below 1."""
    order = np.lexsort((np.arange(len(freq)), -freq))
    i = 0
    while units > 0:
        j = order[i % len(order)]
        if freq[j] > 1:
            freq[j] -= 1
            units -= 1
        i += 1


def cdf_from_freq(freq: np.ndarray) -> np.ndarray:
    """Cumulative array: cum[j] = sum of freq[:j]; length n+1, cum[n] = TOTAL."""
    cum = np.empty(len(freq) + 1, dtype=np.int64)
    cum[0] = 0
    np.cumsum(freq, out=cum[1:])
    return cum


class RangeEncoder:
    def __init__(self):
        self.low = 0  # 64-bit accumulator; bit 32 is the carry
        self.range = _MASK32
        self._cache = 0
        self._pending = 0
        self._out = bytearray()
        self._finished = False

    def encode(self, cum_lo: int, freq: int) -> None:
        r = self.range >> TOTAL_BITS
        self.low += r * cum_lo
        self.range = r * freq
        while self.range < _TOP:
            self._shift_low()
            self.range = (self.range << 8) & _MASK32

    def _shift_low(self) -> None:
        # Bytes equal to 0xFF are held back until a carry can no longer reach
        # them; the first stream byte is the initial zero cache (decoder skips
        # its value implicitly by keeping only 32 bits of code).
        if self.low < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            self._out.append((self._cache + carry) & 0xFF)
            for _ in range(self._pending):
                self._out.append((0xFF + carry) & 0xFF)
            self._pending = 0
            self._cache = (self.low >> 24) & 0xFF
        else:
            self._pending += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def finish(self) -> bytes:
        """Flush the accumulator; valid exactly once per stream."""
        if self._finished:
            raise CoderMisuseError("finish() called twice on one stream")
        self._finished = True
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)

    def bits_emitted(self) -> int:
        """Payload bits written so far (excluding unflushed accumulator)."""
        return 8 * len(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self.range = _MASK32
        self.code = 0
        # 5 init bytes; the first is the encoder's zero cache and shifts out
        for _ in range(5):
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32

    def _next_byte(self) -> int:
        if self._pos >= len(self._data):
            raise CorruptArchiveError("range coder payload exhausted")
        b = self._data[self._pos]
        self._pos += 1
        return b

    def decode_target(self) -> int:
        """Cumulative-frequency value identifying the next symbol."""
        self._r = self.range >> TOTAL_BITS
        return min(self.code // self._r, TOTAL - 1)

    def consume(self, cum_lo: int, freq: int) -> None:
        self.code -= self._r * cum_lo
        self.range = self._r * freq
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32
            self.range = (self.range << 8) & _MASK32


def encode_symbol(enc: RangeEncoder, cum: np.ndarray, sym: int) -> None:
    enc.encode(int(cum[sym]), int(cum[sym + 1] - cum[sym]))


def decode_symbol(dec: RangeDecoder, cum: np.ndarray) -> int:
    target = dec.decode_target()
    # cum is nondecreasing; find sym with cum[sym] <= target < cum[sym+1]
    sym = int(np.searchsorted(cum, target, side="right")) - 1
    dec.consume(int(cum[sym]), int(cum[sym + 1] - cum[sym]))
    return sym
