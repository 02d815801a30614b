"""Lock-step driver wiring a verifier session, a device and a channel together.

One adversarial channel carries traffic in both directions. Whatever it
delivers is routed by message type, so a frame the adversary injects or
replays reaches whichever party would accept that type.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import crypto
from .app import App, Device
from .channel import Channel, Directive, MsgType, ReplayStored, WireMessage, frame
from .image import SoftwareImage, make_bin, make_ivt, serialize
from .layout import LayoutConfig, default_layout
from .sim import hard_reset, new_machine
from .verifier import (NextAction, SessionState, VerifyOutcome, build_update, liveness_challenge,
                       on_timeout, verify_ack)

REDACT = 4  # tag bytes kept in transcripts
MAX_RELAY_DEPTH = 8
ROM_IMAGE = bytes(range(64))

_TO_DEVICE = (MsgType.UPDATE, MsgType.LIVENESS_CHAL)


def redact(tag: bytes) -> str:
    return tag[:REDACT].hex()


@dataclass
class Simulation:
    session: SessionState
    device: Device
    channel: Channel = field(default_factory=Channel)
    tick: int = 0
    transcript: list[dict] = field(default_factory=list)
    # give the adversary a slot to act while the verifier waits for an answer
    idle_slots: bool = True
    # Vrf's copy of the software it believes the device runs
    expected_er: bytes = b""
    # every frame the verifier sent, mapped to the version it carried
    honest: dict[bytes, int] = field(default_factory=dict, repr=False)
    _liveness: list[bytes] = field(default_factory=list, repr=False)

    # -- bookkeeping ---------------------------------------------------------

    def _event(self, direction: str, msg_type: str, v: int | None, outcome: str, **extra) -> None:
        ev = {"tick": self.tick, "direction": direction, "msg_type": msg_type, "v": v,
              "outcome": outcome}
        ev.update(extra)
        self.transcript.append(ev)

    def record_device_events(self, start: int) -> None:
        for entry in self.device.log[start:]:
            what, *rest = entry
            if what == "install":
                self._event("prv", what, rest[0], "ok")
            elif what == "attack":
                self._event("prv", what, None, f"{rest[0]}:{rest[1]}")
            elif what == "boot":
                self._event("prv", what, None, ",".join(rest[0]))
            else:
                self._event("prv", what, rest[1] if len(rest) > 1 else None, str(rest[0]))

    # -- message movement ----------------------------------------------------

    def _send(self, direction: str, msg: WireMessage | None, depth: int = 0) -> None:
        self.tick += 1
        if direction == "vrf->prv" and msg is not None and msg.msg_type is MsgType.UPDATE:
            self.honest[frame(msg)] = msg.version
        delivered = self.channel.transmit(msg)
        directive, _ = self.channel.history[-1]
        if msg is not None:
            if delivered is None:
                outcome = "dropped"
            elif frame(delivered) == frame(msg):
                outcome = "delivered"
            else:
                outcome = "substituted"
            self._event(direction, msg.msg_type.name, msg.version, outcome,
                        tag=redact(msg.payload[-crypto.TAG_SIZE:]))
        if delivered is None:
            return
        if msg is None or frame(delivered) != frame(msg):
            to = "prv" if delivered.msg_type in _TO_DEVICE else "vrf"
            self._event(f"adv->{to}", delivered.msg_type.name, delivered.version, directive,
                        tag=redact(delivered.payload[-crypto.TAG_SIZE:]))
        self._route(delivered, depth)

    def _route(self, msg: WireMessage, depth: int) -> None:
        if msg.msg_type in _TO_DEVICE:
            start = len(self.device.log)
            replies = self.device.receive(msg)
            self.record_device_events(start)
            if depth >= MAX_RELAY_DEPTH:
                return
            for reply in replies:
                self._send("prv->vrf", reply, depth + 1)
        elif msg.msg_type is MsgType.AACK:
            if self.session.pending is None:
                self._event("vrf", "verify", None, "NoPending")
                return
            v = self.session.pending.request.version
            self._event("vrf", "verify", v, verify_ack(self.session, msg.payload).value)
        else:
            self._liveness.append(msg.payload)

    def reboot_device(self) -> None:
        """Power-cycle the device; anything it sends on the way up goes out on the channel."""
        start = len(self.device.log)
        hard_reset(self.device.machine)
        replies = self.device.restart()
        self.record_device_events(start)
        for reply in replies:
            self._send("prv->vrf", reply)

    def idle(self) -> None:
        """Let the adversary use one channel slot with nothing honest in flight."""
        self._send("adv", None)

    # -- verifier-level operations ------------------------------------------

    def update(self, bin_: bytes, ivt: bytes) -> VerifyOutcome | NextAction:
        """Run one update to completion: Confirmed, or GiveUp after the retry budget."""
        sess = self.session
        req = build_update(sess, bin_, ivt, supersede=True)
        msg = req.to_message()
        while True:
            self._send("vrf->prv", msg)
            if self.idle_slots and self.channel.script and sess.pending is not None:
                self.idle()
            if sess.pending is None:
                # only a valid AAck clears the pending request
                self.expected_er = serialize(req.image)
                return VerifyOutcome.CONFIRMED
            self.tick += sess.timeout_ticks
            action = on_timeout(sess)
            self._event("vrf", "timeout", req.version, action.value)
            if action is NextAction.GIVE_UP:
                return action
            if action is NextAction.ESCALATE_NEW_VERSION:
                req = sess.pending.request
                msg = req.to_message()

    def liveness(self, ar_bytes: bytes | None = None) -> bool:
        """Challenge the device; True iff it proves it runs ``ar_bytes`` (default: Vrf's copy)."""
        if ar_bytes is None:
            ar_bytes = self.expected_er
        chal, expected = liveness_challenge(self.session, ar_bytes)
        self._liveness.clear()
        self._send("vrf->prv", WireMessage(MsgType.LIVENESS_CHAL, chal))
        ok = any(crypto.tags_equal(expected, r) for r in self._liveness)
        self._event("vrf", "liveness", None, "Match" if ok else "Mismatch")
        return ok

    def replay_update(self, which: int) -> None:
        """Adversary replays the ``which``-th Update frame seen so far straight to the device."""
        idx = [i for i, raw in enumerate(self.channel.stored) if raw[0] == MsgType.UPDATE]
        if not idx:
            return
        self.channel.script.insert(0, ReplayStored(idx[which % len(idx)]))
        self.idle()

    def push_directives(self, directives: list[Directive]) -> None:
        self.channel.script[0:0] = directives


def provision(layout: LayoutConfig | None = None, *, bin_size: int = 250, version: int = 1,
              seed: int = 0, app: App | None = None) -> Simulation:
    """Device with a freshly installed application plus the matching verifier session."""
    layout = layout or default_layout()
    rng = random.Random(seed)
    key = rng.randbytes(crypto.KEY_SIZE)
    start = layout.app_area.min
    image = SoftwareImage(version=version, nonce=rng.randbytes(16),
                          bin=make_bin(bin_size, seed), ivt=make_ivt(start))
    machine = new_machine(layout, ROM_IMAGE, image, key)
    device = Device(machine, app or App())
    device.boot()
    sess = SessionState(crypto.SecretKey(key), confirmed_version=version, rng_seed=rng.getrandbits(64))
    sim = Simulation(sess, device)
    sim.expected_er = machine.region_bytes(machine.er_region())
    return sim
