import pytest

from casu.layout import Region, default_layout
from casu.monitor import EXEC, RESET, BusSignals, MonitorConfig, MonitorState, mod_mem, monitor_step, violations

LY = default_layout()
CFG = MonitorConfig.from_layout(LY)
ER = Region(0x4000, 0x412D)
IN_ER = 0x4010
RUNNING = MonitorState(EXEC, False, IN_ER)


def step(sig, st=RUNNING, er=ER):
    return monitor_step(st, CFG, er, sig)


def test_reset_leaves_only_at_pc_init():
    st = MonitorState()
    assert st.state == RESET and st.reset_out
    assert step(BusSignals(IN_ER), st).state == RESET
    nxt = step(BusSignals(LY.pc_init), st)
    assert nxt.state == EXEC and not nxt.reset_out


def test_benign_er_execution():
    sig = BusSignals(IN_ER, wen=True, daddr=LY.dmem.min + 100)
    assert not step(sig).reset_out
    assert not step(BusSignals(IN_ER, ren=True, daddr=IN_ER)).reset_out


@pytest.mark.parametrize("sig,rule", [
    (BusSignals(IN_ER, wen=True, daddr=ER.min), "V1"),
    (BusSignals(IN_ER, dmaen=True, dma_wen=True, dmaaddr=LY.ep.min), "V1"),
    (BusSignals(IN_ER, wen=True, daddr=LY.sf.min), "V1"),
    (BusSignals(IN_ER, wen=True, daddr=LY.ivtr.max), "V1"),
    (BusSignals(LY.dmem.min), "V2"),
    (BusSignals(ER.max + 1), "V2"),
    (BusSignals(IN_ER, ren=True, daddr=LY.kr.min), "V4"),
    (BusSignals(IN_ER, dmaen=True, dmaaddr=LY.kr.max), "V4"),
    (BusSignals(LY.tcr.min + 2), "V5"),
])
def test_rules_from_er(sig, rule):
    assert rule in violations(CFG, ER, sig, IN_ER)
    out = step(sig)
    assert out.reset_out and out.state == RESET


@pytest.mark.parametrize("sig", [
    BusSignals(LY.tcr.min + 4, irq=True),
    BusSignals(LY.tcr.min + 4, dmaen=True, dmaaddr=LY.dmem.min),
])
def test_v3_inside_tcr(sig):
    st = MonitorState(EXEC, False, LY.tcr.min)
    assert violations(CFG, ER, sig, LY.tcr.min) == ["V3"]
    assert step(sig, st).reset_out


def test_trusted_code_may_write_protected():
    st = MonitorState(EXEC, False, LY.tcr.min)
    for addr in (ER.min, LY.ep.min, LY.sf.min, LY.ivtr.min, LY.atr.min):
        assert not step(BusSignals(LY.tcr.min + 1, wen=True, daddr=addr), st).reset_out
    assert not step(BusSignals(LY.tcr.min + 1, ren=True, daddr=LY.kr.min), st).reset_out


def test_tcr_entry_at_first_address_only():
    assert not step(BusSignals(LY.tcr.min)).reset_out
    st = MonitorState(EXEC, False, LY.tcr.min + 3)
    assert not step(BusSignals(LY.tcr.min + 4), st).reset_out


def test_writes_outside_protected_are_free():
    assert not step(BusSignals(IN_ER, dmaen=True, dma_wen=True, dmaaddr=LY.dmem.max)).reset_out
    # bEP is a staging pointer, writable by untrusted code
    assert not step(BusSignals(IN_ER, wen=True, daddr=LY.bep.min)).reset_out


def test_undecodable_er_means_only_tcr_executes():
    assert step(BusSignals(IN_ER), er=None).reset_out
    st = MonitorState(EXEC, False, LY.tcr.min)
    assert not step(BusSignals(LY.tcr.min + 1), st, er=None).reset_out


def test_disabled_rules():
    sig = BusSignals(IN_ER, wen=True, daddr=ER.min)
    assert not monitor_step(RUNNING, CFG, ER, sig, disabled=frozenset({"V1"})).reset_out


def test_mod_mem():
    r = Region(10, 20)
    assert mod_mem(BusSignals(0, wen=True, daddr=10), r)
    assert not mod_mem(BusSignals(0, ren=True, daddr=10), r)
    assert mod_mem(BusSignals(0, dmaen=True, dma_wen=True, dmaaddr=20), r)
    assert not mod_mem(BusSignals(0, dmaen=True, dmaaddr=20), r)
    assert not mod_mem(BusSignals(0, wen=True, daddr=10), None)
