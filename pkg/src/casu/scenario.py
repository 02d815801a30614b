"""Scenario files: load, run deterministically, evaluate expectations, report.

See ``scenarios/SCHEMA.md`` for the file format.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .app import ActionKind, AdversaryAction
from .channel import directive_from_json
from .image import make_bin, make_ivt
from .layout import LayoutConfig, Region, default_layout, load_layout
from .protocol import Simulation, provision
from .sim import StepOutcome
from .trusted import ROUTINES, routine_scope


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    layout: LayoutConfig
    initial_app: dict
    steps: list[dict]
    expectations: list[dict]
    seed: int = 0
    channel: list[dict] = field(default_factory=list)
    verifier: dict = field(default_factory=dict)
    description: str = ""

    @classmethod
    def from_json(cls, doc: dict, base: Path | None = None) -> Scenario:
        try:
            lay = doc.get("layout")
            if lay is None:
                layout = default_layout()
            elif isinstance(lay, str):
                layout = load_layout((base or Path(".")) / lay)
            else:
                layout = LayoutConfig.from_json(lay)
            return cls(name=doc.get("name", "scenario"), layout=layout,
                       initial_app=dict(doc.get("initial_app", {})),
                       steps=list(doc["steps"]), expectations=list(doc.get("expectations", [])),
                       seed=int(doc.get("seed", 0)), channel=list(doc.get("channel", [])),
                       verifier=dict(doc.get("verifier", {})),
                       description=doc.get("description", ""))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"bad scenario: missing or malformed {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return Scenario.from_json(doc, path.parent)


_ADDR = re.compile(r"^(\w+)(?:\.(min|max|mid))?(?:([+-])(\d+|0x[0-9a-fA-F]+))?$")


def resolve_address(sim: Simulation, spec: int | str) -> int:
    """Integer, or a symbolic ``region[.min|.max|.mid][+/-offset]``; ``er`` is the live ER."""
    if isinstance(spec, int):
        return spec & 0xFFFF
    s = spec.strip()
    if re.fullmatch(r"0x[0-9a-fA-F]+|\d+", s):
        return int(s, 0) & 0xFFFF
    m = _ADDR.match(s)
    if not m:
        raise ScenarioError(f"cannot parse address {spec!r}")
    name, end, sign, off = m.groups()
    machine = sim.device.machine
    region: Region | None = machine.er_region() if name == "er" else getattr(machine.layout, name, None)
    if not isinstance(region, Region):
        raise ScenarioError(f"unknown region {name!r}")
    base = {"min": region.min, "max": region.max, "mid": (region.min + region.max) // 2,
            None: region.min}[end]
    delta = int(off, 0) if off else 0
    return (base - delta if sign == "-" else base + delta) & 0xFFFF


class Runner:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.sc = scenario
        self.seed = scenario.seed if seed is None else seed
        app = scenario.initial_app
        self.sim = provision(scenario.layout, bin_size=int(app.get("bin_size", 250)),
                             version=int(app.get("version", 1)), seed=self.seed)
        sess = self.sim.session
        sess.max_retries = int(scenario.verifier.get("max_retries", sess.max_retries))
        sess.timeout_ticks = int(scenario.verifier.get("timeout_ticks", sess.timeout_ticks))
        self.sim.push_directives([directive_from_json(d) for d in scenario.channel])
        m = self.sim.device.machine
        self.initial = {"confirmed_version": sess.confirmed_version,
                        "er_version": m.er_image().version, "digests": m.digests()}
        self.results: list[dict] = []

    # -- steps -----------------------------------------------------------

    def run(self) -> dict:
        for i, st in enumerate(self.sc.steps):
            mark = len(self.sim.transcript)
            res = self._step(st)
            obs = self._observed()
            res.update(index=i, events=len(self.sim.transcript) - mark,
                       versions=[obs["confirmed_version"], obs["er_version"]])
            self.results.append(res)
        return self.report()

    def _step(self, st: dict) -> dict:
        sim = self.sim
        if "vrf" in st:
            op = st["vrf"]
            if op == "update":
                bin_ = make_bin(int(st.get("bin_size", 250)), int(st.get("bin_seed", self.seed + 1)))
                ivt = make_ivt(int(st.get("isr_base", sim.device.machine.layout.app_area.min)))
                return {"kind": "vrf.update", "outcome": sim.update(bin_, ivt).value}
            if op == "liveness":
                return {"kind": "vrf.liveness", "outcome": "Match" if sim.liveness() else "Mismatch"}
            raise ScenarioError(f"unknown verifier action {op!r}")
        if "adversary" in st:
            adv = st["adversary"]
            if adv == "replay_update":
                before = len(sim.transcript)
                sim.replay_update(int(st.get("index", 0)))
                outs = [e["outcome"] for e in sim.transcript[before:]
                        if e["direction"] == "prv" and e["msg_type"] in ("download", "auth")]
                return {"kind": "adversary.replay_update",
                        "outcome": ",".join(outs) if outs else "NotDelivered"}
            action = AdversaryAction(ActionKind(adv["kind"]), resolve_address(sim, adv.get("addr", 0)),
                                     int(adv.get("value", 0)), adv.get("context", "er"))
            mark = len(sim.device.log)
            outcome = sim.device.attack(action)
            sim.record_device_events(mark)
            return {"kind": f"adversary.{action.kind.value}", "addr": action.addr,
                    "outcome": outcome.value}
        if "channel" in st:
            sim.push_directives([directive_from_json(d) for d in st["channel"]])
            return {"kind": "channel", "outcome": "queued"}
        if "device" in st:
            op = st["device"]
            if op == "reset_after_install":
                sim.device.reset_after_install = True
            elif op == "reboot":
                sim.reboot_device()
            else:
                raise ScenarioError(f"unknown device action {op!r}")
            return {"kind": f"device.{op}", "outcome": "ok"}
        if "fault" in st:
            f = st["fault"]
            routine = f.get("routine", "casu_install")
            if routine not in ROUTINES:
                raise ScenarioError(f"unknown routine {routine!r}")
            m = sim.device.machine
            m.arm_reset(int(f["reset_at_write"]), scope=routine_scope(m, routine))
            return {"kind": "fault", "outcome": "armed"}
        raise ScenarioError(f"unrecognised step {st!r}")

    # -- expectations --------------------------------------------------------

    def _observed(self) -> dict[str, Any]:
        m = self.sim.device.machine
        tr = self.sim.transcript
        return {
            "confirmed_version": self.sim.session.confirmed_version,
            "er_version": m.er_image().version,
            "reset_count": m.reset_count,
            "installs": len(m.install_log),
            "aacks_sent": sum(e["direction"] == "prv->vrf" and e["msg_type"] == "AACK" for e in tr),
        }

    def _check(self, exp: dict) -> tuple[Any, bool]:
        name = exp["check"]
        obs = self._observed()
        tr = self.sim.transcript
        if name in obs:
            actual = obs[name]
            if "equals" in exp:
                return actual, actual == exp["equals"]
            return actual, actual >= exp["at_least"]
        if name == "confirmed_version_delta":
            actual = obs["confirmed_version"] - self.initial["confirmed_version"]
            return actual, actual == exp["equals"]
        if name == "version_unchanged":
            actual = [obs["confirmed_version"], obs["er_version"]]
            if "after_step" in exp:
                return actual, actual == self.results[int(exp["after_step"])]["versions"]
            return actual, actual == [self.initial["confirmed_version"], self.initial["er_version"]]
        if name == "protected_unchanged":
            regions = exp.get("regions", ["ER", "EP", "SF", "IVTR"])
            now = self.sim.device.machine.digests()
            changed = [r for r in regions if now[r] != self.initial["digests"][r]]
            return changed, not changed
        if name == "step_outcome":
            actual = self.results[int(exp["step"])]["outcome"]
            return actual, actual == exp["equals"]
        if name == "all_attacks_reset":
            actual = [r["outcome"] for r in self.results if r["kind"].startswith("adversary.")
                      and r["kind"] != "adversary.replay_update"]
            return actual, bool(actual) and all(o == StepOutcome.RESET.value for o in actual)
        if name == "transcript_contains":
            pat = exp["event"]
            n = sum(all(e.get(k) == v for k, v in pat.items()) for e in tr)
            if "count" in exp:
                return n, n == exp["count"]
            return n, n >= 1
        if name == "transcript_matches":
            keys = ("direction", "msg_type", "v", "outcome")
            actual = [[e[k] for k in keys] for e in tr[self._transcript_start(exp):]
                      if e["direction"] not in exp.get("ignore_directions", [])]
            return actual, actual == exp["sequence"]
        raise ScenarioError(f"unknown expectation {name!r}")

    def _transcript_start(self, exp: dict) -> int:
        if "from_step" not in exp:
            return 0
        k = int(exp["from_step"])
        return sum(r["events"] for r in self.results[:k])

    def report(self) -> dict:
        checks = []
        for exp in self.sc.expectations:
            actual, ok = self._check(exp)
            checks.append({"expectation": exp, "actual": actual, "pass": bool(ok)})
        m = self.sim.device.machine
        return {
            "scenario": self.sc.name,
            "seed": self.seed,
            "steps": self.results,
            "transcript": self.sim.transcript,
            "final": {**self._observed(), "digests": m.digests(),
                      "frame_errors": self.sim.channel.frame_errors},
            "initial": self.initial,
            "expectations": checks,
            "pass": all(c["pass"] for c in checks),
        }


def run_scenario(path: str | Path, seed: int | None = None) -> dict:
    return Runner(load_scenario(path), seed).run()


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
