"""Hardware security monitor: a two-state Mealy machine driving the MCU reset line.

Rules checked every cycle while in EXEC (any one firing moves to RESET):

    V1  write to ER, EP, SF or IVTR by core or DMA while PC is outside TCR
    V2  PC outside both ER and TCR
    V3  interrupt or DMA activity while PC is inside TCR
    V4  core or DMA read of the key region while PC is outside TCR
    V5  entering TCR anywhere but its first address
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .layout import LayoutConfig, Region

RESET = "RESET"
EXEC = "EXEC"
RULES = ("V1", "V2", "V3", "V4", "V5")


class BusSignals(NamedTuple):
    """Monitor inputs sampled in one cycle."""

    pc: int
    wen: bool = False
    daddr: int = 0
    ren: bool = False
    dmaen: bool = False
    dmaaddr: int = 0
    dma_wen: bool = False
    irq: bool = False

    def to_json(self) -> dict:
        return self._asdict()


class MonitorState(NamedTuple):
    state: str = RESET
    reset_out: bool = True
    # PC of the previous cycle; only its TCR membership is observed (V5).
    prev_pc: int | None = None

    def to_json(self) -> dict:
        return self._asdict()


@dataclass(frozen=True)
class MonitorConfig:
    tcr: Region
    ivtr: Region
    ep_region: Region
    bep_region: Region
    sf_region: Region
    kr: Region
    pc_init: int = 0

    @classmethod
    def from_layout(cls, layout: LayoutConfig) -> MonitorConfig:
        return cls(tcr=layout.tcr, ivtr=layout.ivtr, ep_region=layout.ep,
                   bep_region=layout.bep, sf_region=layout.sf, kr=layout.kr,
                   pc_init=layout.pc_init)


def mod_mem(signals: BusSignals, region: Region | None) -> bool:
    """True iff the core or the DMA controller writes inside ``region`` this cycle."""
    if region is None:
        return False
    lo, hi = region.min, region.max
    return (signals.wen and lo <= signals.daddr <= hi) or (
        signals.dmaen and signals.dma_wen and lo <= signals.dmaaddr <= hi)


def violations(cfg: MonitorConfig, er: Region | None, sig: BusSignals,
               prev_pc: int | None) -> list[str]:
    """Names of the rules that fire for ``sig`` (evaluated as if in EXEC)."""
    pc = sig.pc
    tcr = cfg.tcr
    in_tcr = tcr.min <= pc <= tcr.max
    in_er = er is not None and er.min <= pc <= er.max
    fired = []
    if not in_tcr and (mod_mem(sig, er) or mod_mem(sig, cfg.ep_region)
                       or mod_mem(sig, cfg.sf_region) or mod_mem(sig, cfg.ivtr)):
        fired.append("V1")
    if not in_tcr and not in_er:
        fired.append("V2")
    if in_tcr and (sig.irq or sig.dmaen):
        fired.append("V3")
    kr = cfg.kr
    if not in_tcr and ((sig.ren and kr.min <= sig.daddr <= kr.max) or (
            sig.dmaen and not sig.dma_wen and kr.min <= sig.dmaaddr <= kr.max)):
        fired.append("V4")
    if in_tcr and pc != tcr.min and prev_pc is not None and not (tcr.min <= prev_pc <= tcr.max):
        fired.append("V5")
    return fired


def monitor_step(st: MonitorState, cfg: MonitorConfig, er: Region | None, sig: BusSignals,
                 disabled: frozenset[str] = frozenset()) -> MonitorState:
    """One clock edge of the monitor.

    ``er`` is the executable region decoded from the EP words this cycle, or
    None when those words do not describe a valid range. ``disabled`` removes
    rules by name and exists only to build mutants for the property checker.
    """
    if st.state == RESET:
        if sig.pc == cfg.pc_init:
            return MonitorState(EXEC, False, sig.pc)
        return MonitorState(RESET, True, sig.pc)
    fired = violations(cfg, er, sig, st.prev_pc)
    if disabled:
        fired = [r for r in fired if r not in disabled]
    if fired:
        return MonitorState(RESET, True, sig.pc)
    return MonitorState(EXEC, False, sig.pc)
