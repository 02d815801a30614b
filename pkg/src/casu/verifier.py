"""Verifier side: issue update requests, check acknowledgments, retry on timeout."""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from . import crypto
from .channel import CHAL_SIZE, UpdateRequest
from .image import NONCE_SIZE, SoftwareImage, serialize

DEFAULT_TIMEOUT_TICKS = 1000
DEFAULT_MAX_RETRIES = 4


class NoPending(RuntimeError):
    pass


class PendingExists(RuntimeError):
    pass


class VerifyOutcome(str, enum.Enum):
    CONFIRMED = "Confirmed"
    INVALID = "Invalid"


class NextAction(str, enum.Enum):
    RESEND_SAME = "ResendSame"
    ESCALATE_NEW_VERSION = "EscalateNewVersion"
    GIVE_UP = "GiveUp"


@dataclass
class Pending:
    request: UpdateRequest
    retries: int = 0      # timeouts since the update was first issued
    unanswered: int = 0   # timeouts for the current request bytes


@dataclass
class SessionState:
    key: crypto.SecretKey
    confirmed_version: int
    rng_seed: int = 0
    pending: Pending | None = None
    max_retries: int = DEFAULT_MAX_RETRIES
    timeout_ticks: int = DEFAULT_TIMEOUT_TICKS
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.rng = random.Random(self.rng_seed)

    def fresh_nonce(self) -> bytes:
        return self.rng.randbytes(NONCE_SIZE)


def _issue(sess: SessionState, version: int, bin_: bytes, ivt: bytes) -> UpdateRequest:
    image = SoftwareImage(version=version, nonce=sess.fresh_nonce(), bin=bytes(bin_), ivt=bytes(ivt))
    return UpdateRequest(image, crypto.tag_request(sess.key, serialize(image)))


def build_update(sess: SessionState, bin_: bytes, ivt: bytes, supersede: bool = False) -> UpdateRequest:
    """New request one version past the last confirmed one, with a fresh nonce.

    Reinstalling an old binary goes through here too; it just gets a new version.
    """
    if sess.pending is not None and not supersede:
        raise PendingExists(f"request for v{sess.pending.request.version} still outstanding")
    req = _issue(sess, sess.confirmed_version + 1, bin_, ivt)
    sess.pending = Pending(req)
    return req


def verify_ack(sess: SessionState, ack: bytes) -> VerifyOutcome:
    if sess.pending is None:
        raise NoPending("no outstanding update")
    img = sess.pending.request.image
    gamma = crypto.tag_ack(sess.key, img.version, img.nonce)
    if len(ack) != crypto.TAG_SIZE or not crypto.tags_equal(gamma, ack):
        return VerifyOutcome.INVALID
    sess.confirmed_version = max(sess.confirmed_version, img.version)
    sess.pending = None
    return VerifyOutcome.CONFIRMED


def on_timeout(sess: SessionState) -> NextAction:
    """Retransmission policy after no valid acknowledgment arrived in time.

    A first silence may be a lost AAck, so the identical request is resent
    (the prover answers a duplicate from ATR). A second silence means the AAck
    was wiped by a reset after install, so the same software is reissued
    under the next version number.
    """
    p = sess.pending
    if p is None:
        raise NoPending("no outstanding update")
    p.retries += 1
    if p.retries > sess.max_retries:
        sess.pending = None
        return NextAction.GIVE_UP
    p.unanswered += 1
    if p.unanswered == 1:
        return NextAction.RESEND_SAME
    old = p.request.image
    p.request = _issue(sess, old.version + 1, old.bin, old.ivt)
    p.unanswered = 0
    return NextAction.ESCALATE_NEW_VERSION


def liveness_challenge(sess: SessionState, ar_bytes: bytes) -> tuple[bytes, bytes]:
    """Fresh challenge and the token a prover running ``ar_bytes`` must return."""
    chal = sess.rng.randbytes(CHAL_SIZE)
    return chal, crypto.attest(sess.key, chal, ar_bytes)
