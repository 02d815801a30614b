"""Bounded exhaustive check of the monitor against its safety properties.

Each address-valued signal ranges over a set of equivalence-class probes:
every region's endpoints, their outside neighbours, a midpoint, and one
address belonging to no region. The monitor's predicates are all interval
membership tests, so these probes reach every branch. Addresses on an idle
bus (no strobe) are pinned to a protected address so that a monitor which
ignores the strobe is still caught.

Properties, each evaluated against an antecedent computed here and not by
the monitor:

    P1  write to ER/EP/SF/IVTR from outside TCR          => reset
    P2  PC outside ER and TCR                            => reset
    P3  in EXEC with no antecedent true                  => no reset
    P4  interrupt/DMA in TCR, key read outside TCR,
        TCR entered past its first address (from EXEC)   => reset
    P5  in RESET, PC = pc_init                           => EXEC without reset
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .layout import ADDR_MAX, Region
from .monitor import EXEC, RESET, BusSignals, MonitorConfig, MonitorState, monitor_step

StepFn = Callable[[MonitorState, MonitorConfig, "Region | None", BusSignals], MonitorState]

PROPERTIES = ("P1", "P2", "P3", "P4", "P5")
FULL_ENUMERATION_LIMIT = 48
MAX_STORED_COUNTEREXAMPLES = 64


@dataclass
class CheckReport:
    cases: int = 0
    property_cases: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PROPERTIES, 0))
    counterexamples: list[dict] = field(default_factory=list)
    violations: int = 0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"cases": self.cases, "counterexamples": self.counterexamples,
                "violations": self.violations, "property_cases": self.property_cases}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


class CheckFailure(AssertionError):
    def __init__(self, counterexample: dict, report: CheckReport):
        super().__init__(f"{counterexample['property']} violated: {counterexample}")
        self.counterexample = counterexample
        self.report = report


def _inside(addr: int, region: Region | None) -> bool:
    return region is not None and addr in range(region.min, region.max + 1)


def probe_addresses(regions: Iterable[Region]) -> list[int]:
    regions = list(regions)
    probes: set[int] = set()
    for r in regions:
        probes.update((r.min, r.max, (r.min + r.max) // 2))
        if r.min > 0:
            probes.add(r.min - 1)
        if r.max < ADDR_MAX:
            probes.add(r.max + 1)
    free = next((a for a in range(ADDR_MAX + 1)
                 if not any(_inside(a, r) for r in regions)), None)
    if free is not None:
        probes.add(free)
    return sorted(probes)


def _signal_space(pcs: Sequence[int], addrs: Sequence[int], idle_daddr: int,
                  idle_dmaaddr: int) -> Iterable[BusSignals]:
    core = [(False, False, idle_daddr)]
    core += [(True, False, a) for a in addrs]
    core += [(False, True, a) for a in addrs]
    dma = [(False, False, idle_dmaaddr), (False, True, idle_dmaaddr)]
    dma += [(True, w, a) for w in (False, True) for a in addrs]
    for pc in pcs:
        for wen, ren, daddr in core:
            for dmaen, dma_wen, dmaaddr in dma:
                for irq in (False, True):
                    yield BusSignals(pc, wen, daddr, ren, dmaen, dmaaddr, dma_wen, irq)


def check_properties(cfg: MonitorConfig, er_samples: Sequence[Region],
                     extra_regions: Iterable[Region] = (), *,
                     step: StepFn = monitor_step, full_enumeration: bool = False,
                     raise_on_failure: bool = True) -> CheckReport:
    """Enumerate (state, input) pairs for every ER sample and check P1-P5.

    With ``full_enumeration`` every address below the highest region bound is
    used instead of the probes; this is only feasible for toy layouts.
    """
    if not er_samples:
        raise ValueError("er_samples must be non-empty")
    extra_regions = list(extra_regions)
    report = CheckReport()
    tcr = cfg.tcr
    for er in er_samples:
        regions = [tcr, cfg.ivtr, cfg.ep_region, cfg.bep_region, cfg.sf_region, cfg.kr, er,
                   *extra_regions]
        if full_enumeration:
            top = max(r.max for r in regions) + 2
            if top > FULL_ENUMERATION_LIMIT:
                raise ValueError(f"full enumeration needs an address space of at most "
                                 f"{FULL_ENUMERATION_LIMIT} bytes, layout spans {top}")
            addrs = list(range(top))
        else:
            addrs = probe_addresses(regions)
        protected = (er, cfg.ep_region, cfg.sf_region, cfg.ivtr)
        is_prot = {a: any(_inside(a, r) for r in protected) for a in addrs}
        is_kr = {a: _inside(a, cfg.kr) for a in addrs}
        is_tcr = {a: _inside(a, tcr) for a in addrs}
        is_er = {a: _inside(a, er) for a in addrs}
        idle_d, idle_m = er.min, cfg.ep_region.min
        for a in (idle_d, idle_m):
            is_prot.setdefault(a, True)
            is_kr.setdefault(a, _inside(a, cfg.kr))
        states = [MonitorState(RESET, True, None),
                  MonitorState(EXEC, False, tcr.min),
                  MonitorState(EXEC, False, er.min)]
        for sig in _signal_space(addrs, addrs, idle_d, idle_m):
            pc = sig.pc
            pc_tcr = is_tcr[pc]
            eq2 = not pc_tcr and ((sig.wen and is_prot[sig.daddr]) or (
                sig.dmaen and sig.dma_wen and is_prot[sig.dmaaddr]))
            eq3 = not pc_tcr and not is_er[pc]
            inherited_now = (pc_tcr and (sig.irq or sig.dmaen)) or (not pc_tcr and (
                (sig.ren and is_kr[sig.daddr]) or (sig.dmaen and not sig.dma_wen and is_kr[sig.dmaaddr])))
            for st in states:
                got = step(st, cfg, er, sig)
                report.cases += 1
                checks = []
                if eq2:
                    checks.append(("P1", True))
                if eq3:
                    checks.append(("P2", True))
                if st.state == EXEC:
                    bad_entry = pc_tcr and pc != tcr.min and not _inside(st.prev_pc, tcr)
                    if inherited_now or bad_entry:
                        checks.append(("P4", True))
                    elif not (eq2 or eq3):
                        checks.append(("P3", False))
                elif pc == cfg.pc_init and not (eq2 or eq3):
                    checks.append(("P5", False))
                for prop, expected in checks:
                    report.property_cases[prop] += 1
                    ok = got.reset_out == expected
                    if prop == "P5":
                        ok = ok and got.state == EXEC
                    if ok:
                        continue
                    report.violations += 1
                    if len(report.counterexamples) < MAX_STORED_COUNTEREXAMPLES:
                        report.counterexamples.append({
                            "property": prop, "er": er.to_json(), "state": st.to_json(),
                            "signals": sig.to_json(), "expected": {"reset_out": expected},
                            "got": got.to_json()})
    if raise_on_failure and report.counterexamples:
        raise CheckFailure(report.counterexamples[0], report)
    return report


def default_er_samples(pmem_app: Region) -> list[Region]:
    """Eight ER placements inside the application area, incl. both edges."""
    lo, hi = pmem_app.min, pmem_app.max
    mid = (lo + hi) // 2
    return [
        Region.sized(lo, 734),
        Region.sized(lo, 302),
        Region.sized(lo, 1),
        Region(hi - 785, hi),
        Region(hi, hi),
        Region.sized(mid, 474),
        Region.sized(mid + 1, 2048),
        Region(lo, hi),
    ]


def miniature_config() -> tuple[MonitorConfig, list[Region]]:
    """A monitor over a 41-byte address space, small enough to enumerate every address.

    Region sizes are not those of a real device; the rules only compare
    addresses against bounds, so a shrunken map exercises the same logic.
    """
    cfg = MonitorConfig(tcr=Region(0, 3), kr=Region(4, 7), sf_region=Region(32, 32),
                        ep_region=Region(33, 34), bep_region=Region(35, 36),
                        ivtr=Region(37, 40), pc_init=0)
    return cfg, [Region(16, 31), Region(20, 20)]
