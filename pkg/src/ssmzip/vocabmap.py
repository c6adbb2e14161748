"""Compact vocabulary remapping and its Rice-coded header form.

Only token ids that actually occur in the file are modelled. Compact ids are
assigned in increasing global-id order, so the id list is strictly increasing
and Rice-codes well as first-id-absolute followed by (gap - 1) values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptArchiveError


class BitWriter:
    """MSB-first bit accumulator."""

    def __init__(self):
        self._out = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, nbits: int) -> None:
        for i in range(nbits - 1, -1, -1):
            self._acc = (self._acc << 1) | ((value >> i) & 1)
            self._nbits += 1
            if self._nbits == 8:
                self._out.append(self._acc)
                self._acc = 0
                self._nbits = 0

    def write_unary(self, q: int) -> None:
        for _ in range(q):
            self.write(1, 1)
        self.write(0, 1)

    def getvalue(self) -> bytes:
        out = bytes(self._out)
        if self._nbits:
            out += bytes([self._acc << (8 - self._nbits)])
        return out


class BitReader:
    """MSB-first bit cursor over a byte string."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0  # bit position

    def read_bit(self) -> int:
        byte_i, bit_i = divmod(self._pos, 8)
        if byte_i >= len(self._data):
            raise CorruptArchiveError("Rice payload truncated")
        self._pos += 1
        return (self._data[byte_i] >> (7 - bit_i)) & 1

    def read(self, nbits: int) -> int:
        v = 0
        for _ in range(nbits):
            v = (v << 1) | self.read_bit()
        return v

    def read_unary(self) -> int:
        q = 0
        while self.read_bit():
            q += 1
            if q > 64 + 8 * len(self._data):
                raise CorruptArchiveError("runaway unary code")
        return q


@dataclass
class VocabMap:
    """Bijection between the v_e file-present global ids and [0, v_e)."""

    compact_to_global: np.ndarray  # strictly increasing int64, length v_e
    global_to_compact: np.ndarray  # length V; absent ids map to v_e

    @property
    def v_e(self) -> int:
        return len(self.compact_to_global)

    @classmethod
    def from_ids(cls, present: np.ndarray, vocab_size: int) -> "VocabMap":
        c2g = np.asarray(present, dtype=np.int64)
        g2c = np.full(vocab_size, len(c2g), dtype=np.int64)
        g2c[c2g] = np.arange(len(c2g), dtype=np.int64)
        return cls(c2g, g2c)


def build_vocab_map(tokens, vocab_size: int) -> tuple[VocabMap, np.ndarray]:
    """Map a global-id sequence to compact ids; returns (map, remapped)."""
    arr = np.asarray(tokens, dtype=np.int64)
    present = np.unique(arr)  # sorted -> compact ids in increasing global order
    vmap = VocabMap.from_ids(present, vocab_size)
    remapped = vmap.global_to_compact[arr] if len(arr) else arr
    return vmap, remapped


@dataclass
class RiceCodedMap:
    rice_parameter: int
    payload: bytes


def _rice_parameter(values) -> int:
    if len(values) == 0:
        return 0
    mean_gap = float(np.mean(values))
    return max(0, int(np.floor(np.log2(max(1.0, mean_gap)))))


def rice_encode_map(vmap: VocabMap) -> RiceCodedMap:
    """Rice-code the increasing id list: first id absolute, then gaps - 1."""
    ids = vmap.compact_to_global
    if len(ids) == 0:
        return RiceCodedMap(0, b"")
    values = np.empty(len(ids), dtype=np.int64)
    values[0] = ids[0]
    values[1:] = np.diff(ids) - 1
    k = _rice_parameter(values)
    w = BitWriter()
    for v in values:
        v = int(v)
        w.write_unary(v >> k)
        if k:
            w.write(v & ((1 << k) - 1), k)
    return RiceCodedMap(k, w.getvalue())


def rice_decode_map(coded: RiceCodedMap, v_e: int, vocab_size: int) -> VocabMap:
    """Exact inverse of rice_encode_map."""
    k = coded.rice_parameter
    r = BitReader(coded.payload)
    ids = np.empty(v_e, dtype=np.int64)
    prev = -1
    for i in range(v_e):
        q = r.read_unary()
        v = (q << k) | (r.read(k) if k else 0)
        cur = v if i == 0 else prev + 1 + v
        if cur <= prev or cur >= vocab_size:
            raise CorruptArchiveError("decoded vocab map ids not increasing")
        ids[i] = cur
        prev = cur
    return VocabMap.from_ids(ids, vocab_size)
