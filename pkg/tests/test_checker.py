import pytest

from casu.checker import (CheckFailure, check_properties, default_er_samples, miniature_config,
                          probe_addresses)
from casu.layout import Region, default_layout
from casu.monitor import RULES, MonitorConfig, monitor_step

MINI, MINI_ERS = miniature_config()
MINI_EXTRA = (Region(8, 15),)


def mutant(rule):
    disabled = frozenset({rule})
    return lambda st, cfg, er, sig: monitor_step(st, cfg, er, sig, disabled=disabled)


def test_probe_addresses_cover_boundaries():
    probes = probe_addresses([Region(10, 20)])
    assert {9, 10, 15, 20, 21} <= set(probes)
    assert any(p not in range(10, 21) and p not in (9, 21) for p in probes)


def test_default_samples():
    samples = default_er_samples(default_layout().app_area)
    assert len(samples) >= 8
    assert any(len(r) == 734 for r in samples)


def test_miniature_probes_clean():
    report = check_properties(MINI, MINI_ERS, MINI_EXTRA)
    assert report.ok and report.cases > 0
    assert all(n > 0 for n in report.property_cases.values())


def test_miniature_full_enumeration_clean():
    report = check_properties(MINI, MINI_ERS[1:], MINI_EXTRA, full_enumeration=True)
    assert report.ok and report.counterexamples == []


CAUGHT_BY = {"V1": "P1", "V2": "P2", "V3": "P4", "V4": "P4", "V5": "P4"}


@pytest.mark.parametrize("rule", RULES)
def test_probe_enumeration_catches_each_mutant(rule):
    report = check_properties(MINI, MINI_ERS, MINI_EXTRA, step=mutant(rule), raise_on_failure=False)
    assert report.violations > 0
    assert {c["property"] for c in report.counterexamples} == {CAUGHT_BY[rule]}


@pytest.mark.parametrize("rule", ["V1", "V4"])
def test_full_enumeration_agrees_on_mutants(rule):
    report = check_properties(MINI, MINI_ERS[1:], MINI_EXTRA, step=mutant(rule),
                              full_enumeration=True, raise_on_failure=False)
    assert report.violations > 0


def test_failure_carries_counterexample():
    with pytest.raises(CheckFailure) as exc:
        check_properties(MINI, MINI_ERS, MINI_EXTRA, step=mutant("V2"))
    cx = exc.value.counterexample
    assert cx["property"] == "P2"
    assert cx["expected"] == {"reset_out": True} and cx["got"]["reset_out"] is False
    assert set(cx) >= {"er", "state", "signals"}


def test_always_reset_monitor_violates_no_false_reset():
    from casu.monitor import MonitorState, RESET
    paranoid = lambda st, cfg, er, sig: MonitorState(RESET, True, sig.pc)
    report = check_properties(MINI, MINI_ERS, MINI_EXTRA, step=paranoid, raise_on_failure=False)
    assert {c["property"] for c in report.counterexamples} >= {"P3", "P5"}


def test_full_enumeration_refuses_large_layouts():
    cfg = MonitorConfig.from_layout(default_layout())
    with pytest.raises(ValueError, match="full enumeration"):
        check_properties(cfg, [Region(0x4000, 0x4100)], full_enumeration=True)


def test_requires_samples():
    with pytest.raises(ValueError):
        check_properties(MINI, [])
