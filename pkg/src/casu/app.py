"""Untrusted ER-resident software: download/acknowledge and adversarial hooks.

Everything here runs with PC inside ER and therefore gets no privileges from
the monitor. Subclass :class:`App` to model compromised application logic.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from .channel import FrameError, MsgType, UpdateRequest, WireMessage
from .image import HEADER_SIZE, MalformedImage
from .layout import Region
from .sim import (BusEvent, DeviceReset, EventKind, Machine, StepOutcome, cycle, hard_reset,
                  must, signals_for, step)
from . import trusted


class DownloadOutcome(str, enum.Enum):
    INVOKED_TCB = "InvokedTCB"
    REPLIED_STORED_ACK = "RepliedStoredAck"
    IGNORED = "Ignored"


class NoSpace(Exception):
    pass


@dataclass(frozen=True)
class AppContext:
    er: Region
    er_version: int
    er_length: int
    free_slot: Region
    stored_ack_present: bool


def slot_halves(machine: Machine) -> tuple[Region, Region]:
    area = machine.layout.app_area
    mid = (area.min + area.max) // 2
    return Region(area.min, mid), Region(mid + 1, area.max)


def app_context(machine: Machine) -> AppContext:
    er = machine.er_region()
    length, version = struct.unpack_from("<HH", machine.mem, er.min)
    a, b = slot_halves(machine)
    free = b if er.min in a else a
    return AppContext(er=er, er_version=version, er_length=length, free_slot=free,
                      stored_ack_present=any(machine.atr))


def _routine_pc(machine: Machine, which: int) -> int:
    """Address in ER of the download (0) or acknowledge (1) routine."""
    er = machine.er_region()
    code = er.min + HEADER_SIZE
    off = struct.unpack_from("<HH", machine.mem, code)[which]
    pc = code + off
    return pc if pc in er else er.min


def download(machine: Machine, request: UpdateRequest) -> DownloadOutcome:
    """Stage an incoming update and hand it to the trusted code.

    Duplicates of the running version are answered from ATR, older versions
    are dropped. Raises :class:`NoSpace` when the image does not fit the slot.
    """
    pc = _routine_pc(machine, 0)
    ctx = app_context(machine)
    version = request.version
    if version == ctx.er_version and ctx.stored_ack_present:
        return DownloadOutcome.REPLIED_STORED_ACK
    if version < ctx.er_version:
        return DownloadOutcome.IGNORED
    data = request.image_bytes
    if len(data) > len(ctx.free_slot):
        raise NoSpace(f"{len(data)}-byte image does not fit {ctx.free_slot}")
    slot = Region.sized(ctx.free_slot.min, len(data))
    for i, b in enumerate(data):
        must(cycle(machine, EventKind.CORE_WRITE, slot.min + i, b, pc=pc))
    for i, b in enumerate(struct.pack("<HH", slot.min, slot.max)):
        must(cycle(machine, EventKind.CORE_WRITE, machine.layout.bep.min + i, b, pc=pc))
    for i, b in enumerate(request.atok):
        must(cycle(machine, EventKind.CORE_WRITE, machine.layout.atr.min + i, b, pc=pc))
    return DownloadOutcome.INVOKED_TCB


def acknowledge(machine: Machine) -> WireMessage | None:
    """Send whatever ATR holds; nothing if it was wiped."""
    pc = _routine_pc(machine, 1)
    atr = machine.layout.atr
    out = bytearray()
    for addr in atr:
        must(cycle(machine, EventKind.CORE_READ, addr, pc=pc))
        out.append(machine.data_bus)
    if not any(out):
        return None
    return WireMessage(MsgType.AACK, bytes(out))


# --- adversary ------------------------------------------------------------

class ActionKind(str, enum.Enum):
    CORE_WRITE = "core_write"
    DMA_WRITE = "dma_write"
    JUMP = "jump"
    IRQ = "irq"
    READ = "read"
    DMA_READ = "dma_read"


@dataclass(frozen=True)
class AdversaryAction:
    kind: ActionKind
    addr: int = 0
    value: int = 0
    context: str = "er"  # "er": untrusted code; "tcr": after a legal TCR entry

    @classmethod
    def from_json(cls, doc: dict) -> AdversaryAction:
        return cls(ActionKind(doc["kind"]), int(doc.get("addr", 0)), int(doc.get("value", 0)),
                   doc.get("context", "er"))


_ACTION_EVENTS = {
    ActionKind.CORE_WRITE: EventKind.CORE_WRITE,
    ActionKind.DMA_WRITE: EventKind.DMA_WRITE,
    ActionKind.JUMP: EventKind.CORE_EXEC,
    ActionKind.IRQ: EventKind.INTERRUPT,
    ActionKind.READ: EventKind.CORE_READ,
    ActionKind.DMA_READ: EventKind.DMA_READ,
}


def inject(machine: Machine, action: AdversaryAction) -> StepOutcome:
    """Execute one attacker-chosen bus action and report the monitor's verdict."""
    if action.context == "tcr":
        tcr = machine.layout.tcr
        entry = cycle(machine, EventKind.CORE_EXEC, tcr.min)
        if entry is StepOutcome.RESET:
            return entry
        pc = tcr.min + 1 if len(tcr) > 1 else tcr.min
    else:
        er = machine.er_region()
        pc = machine.pc if er is not None and machine.pc in er else _routine_pc(machine, 0)
    event = BusEvent(_ACTION_EVENTS[action.kind], action.addr & 0xFFFF, action.value)
    return step(machine, signals_for(event, pc), event)


# --- device main loop -----------------------------------------------------

@dataclass
class App:
    """Honest application behaviour; override hooks to model compromise."""

    invoke_tcb: bool = True
    send_ack: bool = True

    def on_update(self, machine: Machine, request: UpdateRequest, log: list) -> list[WireMessage]:
        try:
            outcome = download(machine, request)
        except NoSpace:
            log.append(("download", DownloadOutcome.IGNORED.value, request.version))
            return []
        log.append(("download", outcome.value, request.version))
        if outcome is DownloadOutcome.REPLIED_STORED_ACK:
            return self._ack(machine)
        if outcome is DownloadOutcome.IGNORED or not self.invoke_tcb:
            return []
        auth = trusted.invoke_update(machine)
        log.append(("auth", auth.value, request.version))
        if auth is not trusted.AuthOutcome.ACCEPT:
            return []
        log.append(("install", machine.install_log[-1][0]))
        return self._ack(machine)

    def _ack(self, machine: Machine) -> list[WireMessage]:
        if not self.send_ack:
            return []
        msg = acknowledge(machine)
        return [msg] if msg is not None else []


@dataclass
class Device:
    machine: Machine
    app: App = field(default_factory=App)
    log: list = field(default_factory=list)
    # set to make the next successful install be followed by a reset before acknowledge
    reset_after_install: bool = False

    def boot(self) -> None:
        paths = trusted.reboot(self.machine)
        self.log.append(("boot", [p.value for p in paths]))

    def receive(self, msg: WireMessage) -> list[WireMessage]:
        """React to one delivered message; returns messages sent back."""
        try:
            if msg.msg_type is MsgType.UPDATE:
                try:
                    request = UpdateRequest.from_message(msg)
                except (FrameError, MalformedImage):
                    self.log.append(("download", DownloadOutcome.IGNORED.value))
                    return []
                if self.reset_after_install:
                    return self._update_then_reset(request)
                return self.app.on_update(self.machine, request, self.log)
            if msg.msg_type is MsgType.LIVENESS_CHAL:
                token = trusted.casu_attest(self.machine, msg.payload)
                return [WireMessage(MsgType.LIVENESS_RESP, token)]
            return []
        except DeviceReset:
            self.log.append(("reset", self.machine.reset_count))
            return self.restart()

    def restart(self) -> list[WireMessage]:
        """Boot after a reset; an install finished by the boot path is acknowledged."""
        self.boot()
        if any(self.machine.atr):
            return self.app._ack(self.machine)
        return []

    def _update_then_reset(self, request: UpdateRequest) -> list[WireMessage]:
        quiet = App(invoke_tcb=self.app.invoke_tcb, send_ack=False)
        installs = len(self.machine.install_log)
        quiet.on_update(self.machine, request, self.log)
        if len(self.machine.install_log) > installs:
            self.reset_after_install = False
            hard_reset(self.machine)
            raise DeviceReset()
        return []

    def attack(self, action: AdversaryAction) -> StepOutcome:
        outcome = inject(self.machine, action)
        self.log.append(("attack", action.kind.value, outcome.value))
        if outcome is StepOutcome.RESET:
            self.boot()
        elif self.machine.pc in self.machine.layout.tcr:
            try:
                trusted.casu_exit(self.machine)
            except DeviceReset:
                self.boot()
        return outcome
