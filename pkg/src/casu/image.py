"""Software image record ``L || V || N || BIN || IVT`` and its byte encoding.

All integer fields are little-endian. ``L`` counts the whole record.
"""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass

HEADER_SIZE = 20  # L:2 + V:2 + N:16
NONCE_SIZE = 16
IVT_SIZE = 32
IVT_VECTORS = IVT_SIZE // 2
RESET_VECTOR_SLOT = IVT_VECTORS - 1
MIN_IMAGE_SIZE = HEADER_SIZE + IVT_SIZE
MAX_IMAGE_SIZE = 0xFFFF


class MalformedImage(ValueError):
    pass


@dataclass(frozen=True)
class SoftwareImage:
    version: int
    nonce: bytes
    bin: bytes
    ivt: bytes

    def __post_init__(self) -> None:
        if not 0 <= self.version <= 0xFFFF:
            raise MalformedImage(f"version {self.version} does not fit 16 bits")
        if len(self.nonce) != NONCE_SIZE:
            raise MalformedImage(f"nonce must be {NONCE_SIZE} bytes")
        if len(self.ivt) != IVT_SIZE:
            raise MalformedImage(f"IVT must be {IVT_SIZE} bytes")
        if self.length > MAX_IMAGE_SIZE:
            raise MalformedImage(f"image of {self.length} bytes overflows the length field")

    @property
    def length(self) -> int:
        return MIN_IMAGE_SIZE + len(self.bin)

    @property
    def vectors(self) -> tuple[int, ...]:
        return struct.unpack(f"<{IVT_VECTORS}H", self.ivt)

    def entry_offsets(self) -> tuple[int, int]:
        """Offsets of the download and acknowledge routines inside BIN."""
        if len(self.bin) < 4:
            return 0, 0
        return struct.unpack_from("<HH", self.bin)


def serialize(img: SoftwareImage) -> bytes:
    return (struct.pack("<HH", img.length, img.version) + img.nonce + img.bin + img.ivt)


def parse(data: bytes) -> SoftwareImage:
    data = bytes(data)
    if len(data) < MIN_IMAGE_SIZE:
        raise MalformedImage(f"truncated image: {len(data)} < {MIN_IMAGE_SIZE} bytes")
    length, version = struct.unpack_from("<HH", data)
    if length != len(data):
        raise MalformedImage(f"length field {length} != actual length {len(data)}")
    return SoftwareImage(version=version, nonce=data[4:HEADER_SIZE],
                         bin=data[HEADER_SIZE:-IVT_SIZE], ivt=data[-IVT_SIZE:])


def peek_header(data: bytes) -> tuple[int, int]:
    """(L, V) from the first four bytes without validating the rest."""
    if len(data) < 4:
        raise MalformedImage("truncated header")
    return struct.unpack_from("<HH", data)


def make_bin(size: int, seed: int = 0) -> bytes:
    """Deterministic stand-in binary whose first two words name its entry points."""
    if size < 0:
        raise ValueError("size must be non-negative")
    rng = random.Random(seed)
    body = bytearray(rng.getrandbits(8) for _ in range(size))
    if size >= 4:
        # download at offset 4, acknowledge half way through the code
        struct.pack_into("<HH", body, 0, 4, max(4, size // 2))
    return bytes(body)


def make_ivt(isr_base: int, reset_vector: int = 0) -> bytes:
    """IVT whose interrupt vectors point at ``isr_base`` + 2*i and reset at ``reset_vector``."""
    vecs = [(isr_base + 2 * i) & 0xFFFF for i in range(IVT_VECTORS)]
    vecs[RESET_VECTOR_SLOT] = reset_vector
    return struct.pack(f"<{IVT_VECTORS}H", *vecs)
