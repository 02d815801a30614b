import hashlib
import hmac as std_hmac
import math
import struct

import pytest
from hypothesis import given, settings, strategies as st

from casu import crypto

# RFC 4231 test cases 1-7: (key, data, expected HMAC-SHA256 hex, truncate-to bytes)
RFC4231 = [
    (b"\x0b" * 20, b"Hi There",
     "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7", 32),
    (b"Jefe", b"what do ya want for nothing?",
     "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843", 32),
    (b"\xaa" * 20, b"\xdd" * 50,
     "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe", 32),
    (bytes(range(1, 26)), b"\xcd" * 50,
     "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b", 32),
    (b"\x0c" * 20, b"Test With Truncation", "a3b6167473100ee06e0c796c2955552b", 16),
    (b"\xaa" * 131, b"Test Using Larger Than Block-Size Key - Hash Key First",
     "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54", 32),
    (b"\xaa" * 131,
     b"This is a test using a larger than block-size key and a larger than block-size data. "
     b"The key needs to be hashed before being used by the HMAC algorithm.",
     "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2", 32),
]


@pytest.mark.parametrize("key,data,expected,n", RFC4231, ids=[f"tc{i}" for i in range(1, 8)])
def test_rfc4231(key, data, expected, n):
    assert crypto.hmac(key, data)[:n].hex() == expected


@pytest.mark.parametrize("key,data,expected,n", RFC4231, ids=[f"tc{i}" for i in range(1, 8)])
def test_rfc4231_instrumented_hash(key, data, expected, n):
    with crypto.counting_compressions() as c:
        assert crypto.hmac(key, data)[:n].hex() == expected
    assert c.count > 0


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=300))
def test_counting_sha_matches_hashlib(data):
    assert crypto.CountingSha256(data).digest() == hashlib.sha256(data).digest()


def test_counting_sha_incremental():
    h = crypto.CountingSha256()
    for chunk in (b"a" * 10, b"b" * 100, b"c" * 63):
        h.update(chunk)
    assert h.hexdigest() == hashlib.sha256(b"a" * 10 + b"b" * 100 + b"c" * 63).hexdigest()
    assert h.digest() == h.digest()


@pytest.mark.parametrize("m", [0, 1, 55, 56, 63, 64, 119, 120, 1000])
def test_compression_count_formula(m):
    # inner hash: key block + message + padding; outer hash: key block + digest = 2 blocks
    expected = math.ceil((64 + m + 9) / 64) + 2
    with crypto.counting_compressions() as c:
        crypto.hmac(bytes(32), bytes(m))
    assert c.count == expected


def test_counting_off_by_default():
    with crypto.counting_compressions() as c:
        pass
    crypto.hmac(bytes(32), b"x")
    assert c.count == 0


def _oracle(key, msg):
    return std_hmac.new(key, msg, hashlib.sha256).digest()


def test_tag_ack_layout():
    key, nonce = bytes(range(32)), bytes(range(100, 116))
    assert crypto.tag_ack(key, 3, nonce) == _oracle(key, b"\x01" + struct.pack("<H", 3) + nonce)


def test_tag_request_layout():
    key = bytes(32)
    assert crypto.tag_request(key, b"image") == _oracle(key, b"\x00image")


def test_directions_are_separated():
    # a request body that mimics an ack message must not yield the ack tag
    key, nonce = bytes(32), bytes(16)
    fake = b"\x01" + struct.pack("<H", 3) + nonce
    assert crypto.tag_request(key, fake[1:]) != crypto.tag_ack(key, 3, nonce)


def test_attest_is_keyed_by_challenge():
    key = bytes(range(32))
    chal, region = b"c" * 16, b"region bytes"
    assert crypto.attest(key, chal, region) == _oracle(_oracle(key, chal), region)
    assert crypto.attest(key, b"d" * 16, region) != crypto.attest(key, chal, region)


def test_kdf_rejects_empty_challenge():
    with pytest.raises(ValueError):
        crypto.kdf(bytes(32), b"")


def test_secret_key_redacted():
    k = crypto.SecretKey(bytes(range(32)))
    assert "redacted" in repr(k) and "redacted" in str(k)
    assert bytes(range(32)).hex() not in repr(k)
    with pytest.raises(ValueError):
        crypto.SecretKey(b"short")


def test_tags_equal():
    assert crypto.tags_equal(b"a" * 32, b"a" * 32)
    assert not crypto.tags_equal(b"a" * 32, b"b" + b"a" * 31)


def test_nonce_size_checked():
    with pytest.raises(ValueError):
        crypto.tag_ack(bytes(32), 1, b"short")
