"""HMAC-SHA256 and the tags built on it.

The HMAC construction is written out here so that the underlying hash can be
swapped: hashlib's SHA-256 by default, or a pure-Python SHA-256 that counts
compression-function calls (see :func:`counting_compressions`).
"""
from __future__ import annotations

import contextlib
import hashlib
import hmac as _stdlib_hmac
import struct
from dataclasses import dataclass
from typing import Iterator, Union

BLOCK_SIZE = 64
TAG_SIZE = 32
KEY_SIZE = 32
NONCE_SIZE = 16
DIR_VRF_TO_PRV = b"\x00"
DIR_PRV_TO_VRF = b"\x01"


@dataclass(frozen=True)
class SecretKey:
    raw: bytes

    def __post_init__(self) -> None:
        if len(self.raw) != KEY_SIZE:
            raise ValueError(f"secret key must be {KEY_SIZE} bytes, got {len(self.raw)}")

    def __repr__(self) -> str:
        return "SecretKey(<redacted>)"

    __str__ = __repr__


KeyLike = Union[SecretKey, bytes, bytearray]


# --- instrumented SHA-256 -------------------------------------------------

_K = (
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
)
_H0 = (0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19)
_MASK = 0xFFFFFFFF


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & _MASK


class CompressionCounter:
    def __init__(self) -> None:
        self.count = 0


class CountingSha256:
    """SHA-256 in pure Python, incrementing ``counter.count`` per compression."""

    digest_size = 32
    block_size = BLOCK_SIZE

    def __init__(self, data: bytes = b"", counter: CompressionCounter | None = None):
        self._h = list(_H0)
        self._buf = b""
        self._len = 0
        self.counter = counter or CompressionCounter()
        self.update(data)

    def _compress(self, block: bytes) -> None:
        self.counter.count += 1
        w = list(struct.unpack(">16I", block))
        for i in range(16, 64):
            s0 = _rotr(w[i - 15], 7) ^ _rotr(w[i - 15], 18) ^ (w[i - 15] >> 3)
            s1 = _rotr(w[i - 2], 17) ^ _rotr(w[i - 2], 19) ^ (w[i - 2] >> 10)
            w.append((w[i - 16] + s0 + w[i - 7] + s1) & _MASK)
        a, b, c, d, e, f, g, h = self._h
        for i in range(64):
            t1 = (h + (_rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)) + ((e & f) ^ (~e & g))
                  + _K[i] + w[i]) & _MASK
            t2 = ((_rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)) + ((a & b) ^ (a & c) ^ (b & c))) & _MASK
            a, b, c, d, e, f, g, h = (t1 + t2) & _MASK, a, b, c, (d + t1) & _MASK, e, f, g
        self._h = [(x + y) & _MASK for x, y in zip(self._h, (a, b, c, d, e, f, g, h))]

    def update(self, data: bytes) -> None:
        self._len += len(data)
        buf = self._buf + bytes(data)
        n = len(buf) - len(buf) % BLOCK_SIZE
        for i in range(0, n, BLOCK_SIZE):
            self._compress(buf[i:i + BLOCK_SIZE])
        self._buf = buf[n:]

    def digest(self) -> bytes:
        # Finalise on a copy so digest() can be called repeatedly.
        saved = (list(self._h), self._buf, self._len)
        bitlen = self._len * 8
        pad = b"\x80" + b"\x00" * ((55 - self._len) % BLOCK_SIZE) + struct.pack(">Q", bitlen)
        self.update(pad)
        out = struct.pack(">8I", *self._h)
        self._h, self._buf, self._len = saved
        return out

    def hexdigest(self) -> str:
        return self.digest().hex()


_active_counter: CompressionCounter | None = None


@contextlib.contextmanager
def counting_compressions() -> Iterator[CompressionCounter]:
    """Route every hash computed in this module through :class:`CountingSha256`."""
    global _active_counter
    prev = _active_counter
    counter = CompressionCounter()
    _active_counter = counter
    try:
        yield counter
    finally:
        _active_counter = prev


def _sha256(data: bytes) -> bytes:
    if _active_counter is None:
        return hashlib.sha256(data).digest()
    return CountingSha256(data, _active_counter).digest()


# --- HMAC and protocol tags -----------------------------------------------

def _key_bytes(key: KeyLike) -> bytes:
    return key.raw if isinstance(key, SecretKey) else bytes(key)


def hmac(key: KeyLike, msg: bytes) -> bytes:
    """HMAC-SHA256 (RFC 2104) over ``msg``."""
    k = _key_bytes(key)
    if len(k) > BLOCK_SIZE:
        k = _sha256(k)
    k = k.ljust(BLOCK_SIZE, b"\x00")
    inner = _sha256(bytes(b ^ 0x36 for b in k) + bytes(msg))
    return _sha256(bytes(b ^ 0x5C for b in k) + inner)


def kdf(key: KeyLike, chal: bytes) -> SecretKey:
    """One-time key derived from the master key and a challenge."""
    if not chal:
        raise ValueError("challenge must be non-empty")
    return SecretKey(hmac(key, chal))


def attest(key: KeyLike, chal: bytes, region_bytes: bytes) -> bytes:
    """Authenticated measurement of ``region_bytes`` under a challenge-derived key."""
    return hmac(kdf(key, chal), region_bytes)


def tag_request(key: KeyLike, snew: bytes) -> bytes:
    """Token authorizing a serialized image (verifier to prover)."""
    return hmac(key, DIR_VRF_TO_PRV + bytes(snew))


def tag_ack(key: KeyLike, version: int, nonce: bytes) -> bytes:
    """Acknowledgment binding an installed (version, nonce) (prover to verifier)."""
    if len(nonce) != NONCE_SIZE:
        raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
    return hmac(key, DIR_PRV_TO_VRF + struct.pack("<H", version) + bytes(nonce))


def tags_equal(a: bytes, b: bytes) -> bool:
    return _stdlib_hmac.compare_digest(bytes(a), bytes(b))

