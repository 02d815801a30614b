"""Batch experiments: install fault sweep and randomized forgery campaign."""
from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

from .channel import random_script
from .image import make_bin, make_ivt
from .protocol import Simulation, provision
from .trusted import routine_scope
from .verifier import VerifyOutcome


def _final_state(sim: Simulation) -> dict[str, bytes | str]:
    m = sim.device.machine
    return {"EP": m.region_bytes(m.layout.ep), "IVTR": m.region_bytes(m.layout.ivtr),
            "SF": m.region_bytes(m.layout.sf), "ER": m.digests()["ER"]}


@dataclass
class SweepPoint:
    write_index: int
    outcome: str
    retries: int
    matches: bool


@dataclass
class SweepReport:
    install_writes: int
    points: list[SweepPoint] = field(default_factory=list)

    @property
    def passed(self) -> int:
        return sum(p.matches and p.outcome == VerifyOutcome.CONFIRMED.value for p in self.points)

    @property
    def ok(self) -> bool:
        return self.passed == len(self.points) == self.install_writes


def _update_with_fault(seed: int, bin_size: int, at_write: int | None) -> tuple[Simulation, object, int]:
    sim = provision(bin_size=bin_size, seed=seed)
    m = sim.device.machine
    # a fault index past the end still counts the writes issued from install
    m.arm_reset(10**9 if at_write is None else at_write, scope=routine_scope(m, "casu_install"))
    fault = m.fault
    outcome = sim.update(make_bin(bin_size, seed + 1), make_ivt(m.layout.app_area.min + 0x100))
    return sim, outcome, fault.seen


def fault_sweep(seed: int = 0, bin_size: int = 250) -> SweepReport:
    """Reset before each install write in turn; every run must end where a clean run does."""
    clean, outcome, writes = _update_with_fault(seed, bin_size, None)
    if outcome is not VerifyOutcome.CONFIRMED:
        raise RuntimeError("uninterrupted update did not confirm")
    reference = _final_state(clean)
    report = SweepReport(install_writes=writes)
    for i in range(writes):
        sim, outcome, _ = _update_with_fault(seed, bin_size, i)
        timeouts = sum(e["msg_type"] == "timeout" for e in sim.transcript)
        report.points.append(SweepPoint(i, outcome.value, timeouts,
                                        _final_state(sim) == reference
                                        and timeouts <= sim.session.max_retries))
    return report


@dataclass
class ForgeryReport:
    runs: int
    target_version: int
    forgeries: int = 0
    forged_installs: int = 0
    confirmed_histogram: dict[int, int] = field(default_factory=dict)
    failing_seeds: list[int] = field(default_factory=list)


def forgery_template(seed: int = 0, bin_size: int = 16) -> Simulation:
    """Provisioned device after one honest update, so the channel has traffic to reuse."""
    sim = provision(bin_size=bin_size, seed=seed)
    sim.update(make_bin(bin_size, seed + 1), make_ivt(0x4000))
    return sim


def forgery_run(template: Simulation, seed: int, max_script: int = 16) -> tuple[Simulation, int]:
    """One randomized adversary run against an update the channel never delivers honestly.

    Returns the finished simulation and the version that must not be confirmed.
    """
    sim = copy.deepcopy(template)
    rng = random.Random(seed)
    sim.session.rng.seed(rng.getrandbits(64))
    target = sim.session.confirmed_version + 1
    ch = sim.channel
    ch.script = random_script(rng, list(ch.stored), rng.randint(1, max_script))
    ch.suppress = lambda raw: sim.honest.get(raw) == target
    bin_size = len(sim.device.machine.er_image().bin)
    sim.update(make_bin(bin_size, seed), make_ivt(0x4000))
    while ch.script:
        sim.idle()
    return sim, target


def forgery_campaign(runs: int = 10_000, seed: int = 0, bin_size: int = 16) -> ForgeryReport:
    template = forgery_template(seed, bin_size)
    report = ForgeryReport(runs=runs, target_version=template.session.confirmed_version + 1)
    for i in range(runs):
        sim, target = forgery_run(template, seed * 1_000_003 + i)
        v = sim.session.confirmed_version
        report.confirmed_histogram[v] = report.confirmed_histogram.get(v, 0) + 1
        installed = {ver for ver, _ in sim.device.machine.install_log}
        if v == target or target in installed:
            report.forgeries += v == target
            report.forged_installs += target in installed
            report.failing_seeds.append(seed * 1_000_003 + i)
    return report
