"""Archive file format: fixed header, Rice-coded vocabulary map, payload.

Layout (all integers little-endian):

    magic            4 bytes  b"SMZ1"
    version          1 byte
    flags            1 byte
    original_length  8 bytes
    token_count      8 bytes
    v_e              4 bytes
    fingerprint      8 bytes   (tokenizer definition hash)
    rng_seed         8 bytes
    rice_parameter   1 byte
    map_length       4 bytes   (byte length of the Rice payload)
    rice payload     map_length bytes
    crc32            4 bytes   (of the original uncompressed bytes)
    payload_length   8 bytes
    payload          payload_length bytes (range coder stream)

The version byte pins everything a decoder needs to reproduce the encoder
bit-for-bit: PRNG, float semantics, and the format itself.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import BadMagicError, CorruptArchiveError, UnsupportedVersionError

MAGIC = b"SMZ1"
VERSION = 1

_FIXED = struct.Struct("<4sBBQQIQQBI")


@dataclass
class ArchiveHeader:
    original_length: int
    token_count: int
    v_e: int
    tokenizer_fingerprint: int
    rng_seed: int
    rice_parameter: int
    map_payload: bytes
    crc32: int
    payload_length: int
    version: int = VERSION
    flags: int = 0


def write_header(h: ArchiveHeader) -> bytes:
    fixed = _FIXED.pack(
        MAGIC,
        h.version,
        h.flags,
        h.original_length,
        h.token_count,
        h.v_e,
        h.tokenizer_fingerprint,
        h.rng_seed,
        h.rice_parameter,
        len(h.map_payload),
    )
    tail = struct.pack("<IQ", h.crc32, h.payload_length)
    return fixed + h.map_payload + tail


def read_header(data: bytes) -> tuple[ArchiveHeader, int]:
    """Parse a header from the front of data; returns (header, payload offset)."""
    if len(data) < _FIXED.size:
        raise CorruptArchiveError("archive shorter than fixed header")
    (magic, version, flags, original_length, token_count, v_e,
     fingerprint, rng_seed, rice_parameter, map_length) = _FIXED.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported archive version {version}")
    pos = _FIXED.size
    if len(data) < pos + map_length + 12:
        raise CorruptArchiveError("archive truncated inside header")
    map_payload = bytes(data[pos:pos + map_length])
    pos += map_length
    crc32, payload_length = struct.unpack_from("<IQ", data, pos)
    pos += 12
    h = ArchiveHeader(
        original_length=original_length,
        token_count=token_count,
        v_e=v_e,
        tokenizer_fingerprint=fingerprint,
        rng_seed=rng_seed,
        rice_parameter=rice_parameter,
        map_payload=map_payload,
        crc32=crc32,
        payload_length=payload_length,
        version=version,
        flags=flags,
    )
    return h, pos
