"""Wire framing and a scripted Dolev-Yao channel between verifier and prover.

A frame is one type octet followed by the payload. The channel applies one
directive per transmission; once the script runs out it delivers everything.
Every frame that passes through is kept, so later directives can replay it.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .crypto import TAG_SIZE
from .image import MIN_IMAGE_SIZE, MalformedImage, SoftwareImage, parse, peek_header, serialize

CHAL_SIZE = 16


class FrameError(ValueError):
    pass


class MsgType(enum.IntEnum):
    UPDATE = 0x01
    AACK = 0x02
    LIVENESS_CHAL = 0x03
    LIVENESS_RESP = 0x04


@dataclass(frozen=True)
class WireMessage:
    msg_type: MsgType
    payload: bytes

    def __post_init__(self) -> None:
        size = len(self.payload)
        if self.msg_type is MsgType.UPDATE:
            if size < MIN_IMAGE_SIZE + TAG_SIZE:
                raise FrameError(f"Update payload truncated ({size} bytes)")
            length, _ = peek_header(self.payload)
            if length != size - TAG_SIZE:
                raise FrameError(f"Update length field {length} != image size {size - TAG_SIZE}")
        elif self.msg_type in (MsgType.AACK, MsgType.LIVENESS_RESP) and size != TAG_SIZE:
            raise FrameError(f"{self.msg_type.name} payload must be {TAG_SIZE} bytes")
        elif self.msg_type is MsgType.LIVENESS_CHAL and size != CHAL_SIZE:
            raise FrameError(f"challenge payload must be {CHAL_SIZE} bytes")

    @property
    def version(self) -> int | None:
        """Version carried by an Update, else None."""
        if self.msg_type is MsgType.UPDATE:
            return peek_header(self.payload)[1]
        return None


def frame(msg: WireMessage) -> bytes:
    return bytes([msg.msg_type]) + msg.payload


def unframe(data: bytes) -> WireMessage:
    if len(data) < 1:
        raise FrameError("empty frame")
    try:
        msg_type = MsgType(data[0])
    except ValueError:
        raise FrameError(f"unknown message type 0x{data[0]:02X}") from None
    try:
        return WireMessage(msg_type, bytes(data[1:]))
    except MalformedImage as exc:
        raise FrameError(str(exc)) from exc


@dataclass(frozen=True)
class UpdateRequest:
    image: SoftwareImage
    atok: bytes

    @property
    def version(self) -> int:
        return self.image.version

    @property
    def image_bytes(self) -> bytes:
        return serialize(self.image)

    def to_message(self) -> WireMessage:
        return WireMessage(MsgType.UPDATE, self.image_bytes + self.atok)

    @classmethod
    def from_message(cls, msg: WireMessage) -> UpdateRequest:
        if msg.msg_type is not MsgType.UPDATE:
            raise FrameError("not an Update message")
        try:
            image = parse(msg.payload[:-TAG_SIZE])
        except MalformedImage as exc:
            raise FrameError(str(exc)) from exc
        return cls(image, msg.payload[-TAG_SIZE:])


# --- directives -----------------------------------------------------------

@dataclass(frozen=True)
class DeliverNext:
    pass


@dataclass(frozen=True)
class DropNext:
    pass


@dataclass(frozen=True)
class ReplayStored:
    index: int


@dataclass(frozen=True)
class TamperByte:
    offset: int
    xor: int


@dataclass(frozen=True)
class InjectRaw:
    data: bytes


Directive = Union[DeliverNext, DropNext, ReplayStored, TamperByte, InjectRaw]


def directive_from_json(doc: dict) -> Directive:
    op = doc["op"]
    if op == "deliver":
        return DeliverNext()
    if op == "drop":
        return DropNext()
    if op == "replay":
        return ReplayStored(int(doc["index"]))
    if op == "tamper":
        return TamperByte(int(doc["offset"]), int(doc.get("xor", 1)))
    if op == "inject":
        return InjectRaw(bytes.fromhex(doc["hex"]))
    raise ValueError(f"unknown channel directive {op!r}")


def directive_to_json(d: Directive) -> dict:
    if isinstance(d, DeliverNext):
        return {"op": "deliver"}
    if isinstance(d, DropNext):
        return {"op": "drop"}
    if isinstance(d, ReplayStored):
        return {"op": "replay", "index": d.index}
    if isinstance(d, TamperByte):
        return {"op": "tamper", "offset": d.offset, "xor": d.xor}
    return {"op": "inject", "hex": d.data.hex()}


@dataclass
class Channel:
    script: list[Directive] = field(default_factory=list)
    stored: list[bytes] = field(default_factory=list)
    # (directive name, whether the receiver observed a message) per transmission
    history: list[tuple[str, bool]] = field(default_factory=list)
    frame_errors: int = 0
    # test hook: frames for which this returns True are silently lost
    suppress: Optional[Callable[[bytes], bool]] = None

    def next_directive(self) -> Directive:
        return self.script.pop(0) if self.script else DeliverNext()

    def transmit(self, msg: WireMessage | None) -> WireMessage | None:
        """Carry ``msg`` (None = an idle slot) and return what the receiver sees."""
        raw = frame(msg) if msg is not None else None
        if raw is not None:
            self.stored.append(raw)
        d = self.next_directive()
        out: bytes | None
        if isinstance(d, DeliverNext):
            out = raw
        elif isinstance(d, DropNext):
            out = None
        elif isinstance(d, ReplayStored):
            out = self.stored[d.index % len(self.stored)] if self.stored else None
        elif isinstance(d, TamperByte):
            if raw is None or len(raw) < 2:
                out = raw
            else:
                buf = bytearray(raw)
                # offset addresses the payload; the type octet is left alone
                buf[1 + d.offset % (len(raw) - 1)] ^= (d.xor & 0xFF) or 1
                out = bytes(buf)
        else:
            out = d.data
        if out is not None and self.suppress is not None and self.suppress(out):
            out = None
        delivered = None
        if out is not None:
            try:
                delivered = unframe(out)
            except FrameError:
                self.frame_errors += 1
        self.history.append((type(d).__name__, delivered is not None))
        return delivered


def transmit(ch: Channel, msg: WireMessage | None) -> WireMessage | None:
    return ch.transmit(msg)


def random_script(rng: random.Random, observed: Sequence[bytes], length: int) -> list[Directive]:
    """Adversarial script whose forged bytes derive only from ``observed`` frames."""
    script: list[Directive] = []
    for _ in range(length):
        roll = rng.random()
        if roll < 0.2:
            script.append(DropNext())
        elif roll < 0.4:
            script.append(ReplayStored(rng.randrange(64)))
        elif roll < 0.65:
            script.append(TamperByte(rng.randrange(1024), rng.randrange(1, 256)))
        elif roll < 0.9:
            script.append(InjectRaw(forge_frame(rng, observed)))
        else:
            script.append(DeliverNext())
    return script


def forge_frame(rng: random.Random, observed: Sequence[bytes]) -> bytes:
    """A frame built from observed traffic: spliced, re-versioned, or random."""
    choice = rng.randrange(5)
    if choice == 0 or not observed:
        return bytes([MsgType.AACK]) + rng.randbytes(TAG_SIZE)
    base = bytearray(rng.choice(observed))
    if choice == 1 and base[0] == MsgType.UPDATE and len(base) > 5:
        # bump the version field of an old update, keep its token
        v = int.from_bytes(base[3:5], "little") + rng.randrange(1, 4)
        base[3:5] = (v & 0xFFFF).to_bytes(2, "little")
        return bytes(base)
    if choice == 2:
        # an observed tag re-labelled as an acknowledgment
        return bytes([MsgType.AACK]) + bytes(base[-TAG_SIZE:]).rjust(TAG_SIZE, b"\x00")
    if choice == 3 and len(base) > 1:
        base[1 + rng.randrange(len(base) - 1)] ^= rng.randrange(1, 256)
        return bytes(base)
    return bytes(base)
