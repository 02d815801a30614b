"""Trusted update routines resident in TCR.

The routines are native Python, but every memory access they make is issued as
a bus cycle with PC inside TCR, so the monitor judges them exactly as it would
judge ROM code. Each routine owns a slice of TCR for its PC values; entering
TCR is only legal at its first address.
"""
from __future__ import annotations

import enum
import struct

from . import crypto
from .image import (HEADER_SIZE, IVT_SIZE, MIN_IMAGE_SIZE, RESET_VECTOR_SLOT, MalformedImage,
                    peek_header)
from .layout import Region
from .sim import DeviceReset, EventKind, Machine, cycle, must

MAX_BOOT_ATTEMPTS = 16


class ControlTransfer(str, enum.Enum):
    TO_ER = "ToER"
    INTO_AUTHENTICATE = "IntoAuthenticate"
    INTO_INSTALL = "IntoInstall"


class AuthOutcome(str, enum.Enum):
    ACCEPT = "Accept"
    REJECT_VERSION = "RejectVersion"
    REJECT_TAG = "RejectTag"


ROUTINES = ("casu_entry", "casu_authenticate", "casu_install", "casu_exit", "casu_attest")


def routine_scope(machine: Machine, name: str) -> Region:
    """PC range used by trusted routine ``name`` (entry owns TCR_min)."""
    tcr = machine.layout.tcr
    width = max(1, len(tcr) // 8)
    start = tcr.min + ROUTINES.index(name) * width
    return Region(start, min(tcr.max, start + width - 1))


class _Cpu:
    """Issues bus cycles on behalf of one routine, advancing PC inside its slice."""

    def __init__(self, machine: Machine, routine: str, first: int = 0):
        self.m = machine
        self.scope = routine_scope(machine, routine)
        self.n = first

    def _pc(self) -> int:
        pc = self.scope.min + self.n % len(self.scope)
        self.n += 1
        return pc

    def exec(self) -> None:
        must(cycle(self.m, EventKind.CORE_EXEC, self._pc()))

    def read(self, addr: int) -> int:
        must(cycle(self.m, EventKind.CORE_READ, addr, pc=self._pc()))
        return self.m.data_bus

    def read_block(self, start: int, size: int) -> bytes:
        return bytes(self.read(start + i) for i in range(size))

    def read_word(self, addr: int) -> int:
        return self.read(addr) | (self.read(addr + 1) << 8)

    def write(self, addr: int, value: int) -> None:
        must(cycle(self.m, EventKind.CORE_WRITE, addr, value, pc=self._pc()))

    def write_block(self, start: int, data: bytes) -> None:
        for i, b in enumerate(data):
            self.write(start + i, b)

    def load_key(self) -> bytes:
        key = self.read_block(self.m.layout.kr.min, crypto.KEY_SIZE)
        # R4..R15 hold key words while the MAC runs; casu_exit scrubs them.
        self.m.regs[4:16] = list(struct.unpack("<12H", key[:24]))
        return key


def _pointer(cpu: _Cpu, region: Region) -> Region | None:
    lo, hi = cpu.read_word(region.min), cpu.read_word(region.min + 2)
    return Region(lo, hi) if lo <= hi else None


def casu_entry(machine: Machine, at_boot: bool) -> ControlTransfer:
    """Single entry point, at TCR_min. Decides between resume, update and plain exit."""
    cpu = _Cpu(machine, "casu_entry")
    if at_boot:
        cpu.n = 1  # boot already fetched TCR_min from the reset vector
        if cpu.read(machine.layout.sf.min) == 1:
            return ControlTransfer.INTO_INSTALL
        return ControlTransfer.TO_ER
    cpu.exec()
    return ControlTransfer.INTO_AUTHENTICATE


def _staged_image(cpu: _Cpu) -> tuple[Region, bytes]:
    """Bounds and bytes of the image staged at bEP, validated for placement."""
    ly = cpu.m.layout
    staged = _pointer(cpu, ly.bep)
    if staged is None or not staged.within(ly.app_area) or len(staged) < MIN_IMAGE_SIZE:
        raise MalformedImage("bEP does not describe an image slot in PMEM")
    length, _ = peek_header(cpu.read_block(staged.min, 4))
    if length != len(staged):
        raise MalformedImage("length field disagrees with bEP bounds")
    return staged, cpu.read_block(staged.min, len(staged))


def casu_authenticate(machine: Machine) -> AuthOutcome:
    """Check version and token of the staged image.

    On acceptance control stays in TCR for :func:`casu_install`; on rejection
    the routine exits to the old ER without producing any response.
    """
    cpu = _Cpu(machine, "casu_authenticate")
    ly = machine.layout
    try:
        staged = _pointer(cpu, ly.bep)
        if staged is None or not staged.within(ly.app_area):
            raise MalformedImage("bEP out of range")
        _, v_new = peek_header(cpu.read_block(staged.min, 4))
        er = _pointer(cpu, ly.ep)
        v_er = cpu.read_word(er.min + 2)
        if v_new <= v_er:
            outcome = AuthOutcome.REJECT_VERSION
        else:
            _, snew = _staged_image(cpu)
            key = cpu.load_key()
            sigma = crypto.tag_request(key, snew)
            atok = cpu.read_block(ly.atr.min, crypto.TAG_SIZE)
            ok = crypto.tags_equal(sigma, atok)
            outcome = AuthOutcome.ACCEPT if ok else AuthOutcome.REJECT_TAG
    except MalformedImage:
        outcome = AuthOutcome.REJECT_TAG
    if outcome is not AuthOutcome.ACCEPT:
        casu_exit(machine)
    return outcome


def casu_install(machine: Machine) -> bytes:
    """Switch ER to the staged image, copy its IVT, store AAck, then exit to it.

    SF brackets all three steps so a reset anywhere in between makes the boot
    path run this routine again from the start. Every step is idempotent.
    """
    cpu = _Cpu(machine, "casu_install")
    ly = machine.layout
    staged = _pointer(cpu, ly.bep)
    bep_words = cpu.read_block(ly.bep.min, 4)

    cpu.write(ly.sf.min, 1)
    cpu.write_block(ly.ep.min, bep_words)

    ivt = cpu.read_block(staged.max - IVT_SIZE + 1, IVT_SIZE)
    reset_off = 2 * RESET_VECTOR_SLOT
    for i in range(IVT_SIZE):
        if i not in (reset_off, reset_off + 1):
            cpu.write(ly.ivtr.min + i, ivt[i])

    header = cpu.read_block(staged.min, HEADER_SIZE)
    version = struct.unpack_from("<H", header, 2)[0]
    nonce = header[4:HEADER_SIZE]
    key = cpu.load_key()
    aack = crypto.tag_ack(key, version, nonce)
    cpu.write_block(ly.atr.min, aack)

    cpu.write(ly.sf.min, 0)
    machine.install_log.append((version, nonce))
    casu_exit(machine)
    return aack


def casu_exit(machine: Machine) -> None:
    """Clear the register file and jump to ER_min."""
    cpu = _Cpu(machine, "casu_exit")
    er = _pointer(cpu, machine.layout.ep)
    machine.regs[:] = [0] * len(machine.regs)
    must(cycle(machine, EventKind.CORE_EXEC, er.min))


def casu_attest(machine: Machine, chal: bytes) -> bytes:
    """Challenge-keyed measurement of the current ER, computed inside TCR."""
    must(cycle(machine, EventKind.CORE_EXEC, machine.layout.tcr.min))
    cpu = _Cpu(machine, "casu_attest")
    er = _pointer(cpu, machine.layout.ep)
    region = cpu.read_block(er.min, len(er))
    key = cpu.load_key()
    token = crypto.attest(key, chal, region)
    casu_exit(machine)
    return token


def boot(machine: Machine) -> ControlTransfer:
    """Reset-vector path: fetch TCR entry, resume a pending install or exit to ER."""
    must(cycle(machine, EventKind.CORE_EXEC, machine.reset_vector))
    transfer = casu_entry(machine, at_boot=True)
    if transfer is ControlTransfer.INTO_INSTALL:
        casu_install(machine)
    else:
        casu_exit(machine)
    return transfer


def reboot(machine: Machine) -> list[ControlTransfer]:
    """Boot until a boot completes without being reset; returns each attempt's path."""
    paths = []
    for _ in range(MAX_BOOT_ATTEMPTS):
        try:
            paths.append(boot(machine))
            return paths
        except DeviceReset:
            continue
    raise RuntimeError("device failed to boot")


def invoke_update(machine: Machine) -> AuthOutcome:
    """What ER does to hand a staged image to the trusted code."""
    casu_entry(machine, at_boot=False)
    outcome = casu_authenticate(machine)
    if outcome is AuthOutcome.ACCEPT:
        casu_install(machine)
    return outcome
