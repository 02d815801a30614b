"""MCU model: 64 KiB address space whose every bus cycle passes the monitor first."""
from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

from .image import RESET_VECTOR_SLOT, SoftwareImage, parse, serialize
from .layout import KEY_SIZE, LayoutConfig, LayoutError, Region
from .monitor import RESET, BusSignals, MonitorConfig, MonitorState, monitor_step

MEM_SIZE = 0x10000
NUM_REGS = 16


class EventKind(str, enum.Enum):
    CORE_WRITE = "CoreWrite"
    CORE_READ = "CoreRead"
    CORE_EXEC = "CoreExec"
    DMA_WRITE = "DmaWrite"
    DMA_READ = "DmaRead"
    INTERRUPT = "Interrupt"


class BusEvent(NamedTuple):
    kind: EventKind
    addr: int
    data: int = 0


class StepOutcome(str, enum.Enum):
    APPLIED = "Applied"
    RESET = "Reset"


class DeviceReset(Exception):
    """The core was reset mid-routine; control restarts at the reset vector."""


@dataclass
class ArmedFault:
    """Hard reset that preempts the write with index ``at_write`` issued from ``scope``."""

    at_write: int
    scope: Region | None = None
    seen: int = 0


@dataclass
class Machine:
    layout: LayoutConfig
    monitor_cfg: MonitorConfig
    mem: bytearray = field(default_factory=lambda: bytearray(MEM_SIZE))
    monitor: MonitorState = field(default_factory=MonitorState)
    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * NUM_REGS)
    data_bus: int = 0
    cycles: int = 0
    reset_count: int = 0
    fault: ArmedFault | None = None
    # (version, nonce) of every completed install, newest last
    install_log: list[tuple[int, bytes]] = field(default_factory=list)

    def word(self, addr: int) -> int:
        return self.mem[addr] | (self.mem[(addr + 1) & 0xFFFF] << 8)

    def er_region(self) -> Region | None:
        """ER as currently encoded by the EP words; None if they are inconsistent."""
        lo, hi = struct.unpack_from("<HH", self.mem, self.layout.ep.min)
        return Region(lo, hi) if lo <= hi else None

    def bep_region(self) -> Region | None:
        lo, hi = struct.unpack_from("<HH", self.mem, self.layout.bep.min)
        return Region(lo, hi) if lo <= hi else None

    def region_bytes(self, region: Region | None) -> bytes:
        if region is None:
            return b""
        return bytes(self.mem[region.min:region.max + 1])

    def er_image(self) -> SoftwareImage:
        return parse(self.region_bytes(self.er_region()))

    @property
    def sf(self) -> int:
        return self.mem[self.layout.sf.min]

    @property
    def atr(self) -> bytes:
        return self.region_bytes(self.layout.atr)

    @property
    def reset_vector(self) -> int:
        return self.word(self.layout.ivtr.min + 2 * RESET_VECTOR_SLOT)

    def digests(self) -> dict[str, str]:
        out = {"ER": hashlib.sha256(self.region_bytes(self.er_region())).hexdigest()}
        for name in ("ep", "sf", "ivtr"):
            out[name.upper()] = hashlib.sha256(self.region_bytes(getattr(self.layout, name))).hexdigest()
        return out

    def protected_snapshot(self) -> dict[str, bytes]:
        ly = self.layout
        return {"ER": self.region_bytes(self.er_region()), "EP": self.region_bytes(ly.ep),
                "SF": self.region_bytes(ly.sf), "IVTR": self.region_bytes(ly.ivtr),
                "KR": self.region_bytes(ly.kr), "TCR": self.region_bytes(ly.tcr)}

    def arm_reset(self, at_write: int, scope: Region | None = None) -> None:
        self.fault = ArmedFault(at_write, scope)


def new_machine(config: LayoutConfig, rom: bytes, app: SoftwareImage, key: bytes,
                app_addr: int | None = None) -> Machine:
    """Machine with ``rom`` in TCR, ``key`` in KR and ``app`` installed as ER."""
    if len(key) != KEY_SIZE:
        raise ValueError(f"key must be {KEY_SIZE} bytes")
    if len(rom) > len(config.tcr):
        raise LayoutError(f"ROM of {len(rom)} bytes exceeds TCR {config.tcr}")
    if not app.bin:
        raise LayoutError("application binary is empty")
    start = config.app_area.min if app_addr is None else app_addr
    er = Region.sized(start, app.length)
    for name, r in config.protected().items():
        if er.overlaps(r):
            raise LayoutError(f"application {er} overlaps {name.upper()} {r}")
    if not er.within(config.app_area):
        raise LayoutError(f"application {er} outside PMEM application area {config.app_area}")

    m = Machine(layout=config, monitor_cfg=MonitorConfig.from_layout(config))
    mem = m.mem
    mem[config.tcr.min:config.tcr.min + len(rom)] = rom
    mem[config.kr.min:config.kr.max + 1] = key
    mem[er.min:er.max + 1] = serialize(app)
    struct.pack_into("<HH", mem, config.ep.min, er.min, er.max)
    struct.pack_into("<HH", mem, config.bep.min, er.min, er.max)
    mem[config.sf.min] = 0
    mem[config.ivtr.min:config.ivtr.max + 1] = app.ivt
    struct.pack_into("<H", mem, config.ivtr.min + 2 * RESET_VECTOR_SLOT, config.pc_init)
    m.pc = config.pc_init
    return m


def hard_reset(machine: Machine) -> None:
    """Reboot: volatile memory and registers cleared, persistent memory kept."""
    ly = machine.layout
    for r in (ly.dmem, ly.atr):
        machine.mem[r.min:r.max + 1] = bytes(len(r))
    machine.regs[:] = [0] * NUM_REGS
    machine.data_bus = 0
    machine.monitor = MonitorState(RESET, True, None)
    machine.pc = ly.pc_init
    machine.reset_count += 1


def signals_for(event: BusEvent, pc: int) -> BusSignals:
    kind = event.kind
    if kind is EventKind.CORE_WRITE:
        return BusSignals(pc, wen=True, daddr=event.addr)
    if kind is EventKind.CORE_READ:
        return BusSignals(pc, ren=True, daddr=event.addr)
    if kind is EventKind.CORE_EXEC:
        return BusSignals(event.addr)
    if kind is EventKind.DMA_WRITE:
        return BusSignals(pc, dmaen=True, dmaaddr=event.addr, dma_wen=True)
    if kind is EventKind.DMA_READ:
        return BusSignals(pc, dmaen=True, dmaaddr=event.addr)
    return BusSignals(pc, irq=True)


def step(machine: Machine, signals: BusSignals, event: BusEvent | None = None) -> StepOutcome:
    """Run one bus cycle: the monitor sees ``signals`` before ``event`` may touch memory."""
    machine.cycles += 1
    new = monitor_step(machine.monitor, machine.monitor_cfg, machine.er_region(), signals)
    if new.reset_out:
        hard_reset(machine)
        return StepOutcome.RESET
    machine.monitor = new
    machine.pc = signals.pc
    if event is None:
        return StepOutcome.APPLIED
    kind = event.kind
    if kind is EventKind.CORE_WRITE or kind is EventKind.DMA_WRITE:
        fault = machine.fault
        if fault is not None and (fault.scope is None or signals.pc in fault.scope):
            if fault.seen == fault.at_write:
                machine.fault = None
                hard_reset(machine)
                return StepOutcome.RESET
            fault.seen += 1
        ly = machine.layout
        if event.addr not in ly.tcr and event.addr not in ly.kr:  # ROM ignores writes
            machine.mem[event.addr] = event.data & 0xFF
    elif kind is EventKind.CORE_READ or kind is EventKind.DMA_READ:
        machine.data_bus = machine.mem[event.addr]
    elif kind is EventKind.INTERRUPT:
        machine.pc = machine.word(machine.layout.ivtr.min + 2 * (event.addr % 16))
    return StepOutcome.APPLIED


def cycle(machine: Machine, kind: EventKind, addr: int, data: int = 0,
          pc: int | None = None) -> StepOutcome:
    """Convenience wrapper: build the event and its signals, then :func:`step`."""
    event = BusEvent(kind, addr, data)
    return step(machine, signals_for(event, machine.pc if pc is None else pc), event)


def must(outcome: StepOutcome) -> None:
    """Abort the running routine if the cycle ended in a reset."""
    if outcome is StepOutcome.RESET:
        raise DeviceReset()
