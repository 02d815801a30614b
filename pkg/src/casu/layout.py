"""Memory layout of the simulated MCU: address ranges and their JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator

ADDR_MAX = 0xFFFF
ATR_SIZE = 32
POINTER_SIZE = 4
SF_SIZE = 1
KEY_SIZE = 32


class LayoutError(ValueError):
    """Raised when regions overlap or an image does not fit its region."""


@dataclass(frozen=True)
class Region:
    """Inclusive byte range ``[min, max]``."""

    min: int
    max: int

    def __post_init__(self) -> None:
        if not (0 <= self.min <= ADDR_MAX and 0 <= self.max <= ADDR_MAX):
            raise LayoutError(f"region bounds out of 16-bit range: {self}")
        if self.min > self.max:
            raise LayoutError(f"region min > max: {self}")

    def __contains__(self, addr: int) -> bool:
        return self.min <= addr <= self.max

    def __len__(self) -> int:
        return self.max - self.min + 1

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.min, self.max + 1))

    def __str__(self) -> str:
        return f"[0x{self.min:04X}, 0x{self.max:04X}]"

    def overlaps(self, other: Region) -> bool:
        return self.min <= other.max and other.min <= self.max

    def within(self, other: Region) -> bool:
        return other.min <= self.min and self.max <= other.max

    @classmethod
    def sized(cls, start: int, size: int) -> Region:
        if size <= 0:
            raise LayoutError(f"empty region at 0x{start:04X}")
        return cls(start, start + size - 1)

    def to_json(self) -> dict:
        return {"min": self.min, "max": self.max}


@dataclass(frozen=True)
class LayoutConfig:
    dmem: Region
    pmem: Region
    ivtr: Region
    tcr: Region
    ep: Region
    bep: Region
    sf: Region
    atr: Region
    kr: Region
    pc_init: int | None = None

    def __post_init__(self) -> None:
        if self.pc_init is None:
            object.__setattr__(self, "pc_init", self.tcr.min)
        self.validate()

    @property
    def reserved_bytes(self) -> int:
        """Bytes set aside for the update machinery (ATR, EP, bEP, SF)."""
        return len(self.atr) + len(self.ep) + len(self.bep) + len(self.sf)

    @property
    def app_area(self) -> Region:
        """PMEM space available to application images."""
        hi = self.pmem.max
        for r in (self.sf, self.ep, self.bep, self.ivtr):
            if r.within(self.pmem) and r.min > self.pmem.min:
                hi = min(hi, r.min - 1)
        return Region(self.pmem.min, hi)

    def protected(self) -> dict[str, Region]:
        return {"tcr": self.tcr, "ivtr": self.ivtr, "sf": self.sf, "ep": self.ep,
                "bep": self.bep, "kr": self.kr, "atr": self.atr}

    def validate(self) -> None:
        if len(self.atr) != ATR_SIZE:
            raise LayoutError(f"ATR must be {ATR_SIZE} bytes, got {len(self.atr)}")
        if len(self.ep) != POINTER_SIZE or len(self.bep) != POINTER_SIZE:
            raise LayoutError("EP and bEP must each hold two 16-bit words")
        if len(self.sf) != SF_SIZE:
            raise LayoutError("SF must be a single byte")
        if len(self.kr) != KEY_SIZE:
            raise LayoutError(f"KR must be {KEY_SIZE} bytes")
        named = list(self.protected().items())
        for i, (na, a) in enumerate(named):
            for nb, b in named[i + 1:]:
                if a.overlaps(b):
                    raise LayoutError(f"{na.upper()} {a} overlaps {nb.upper()} {b}")
        for name in ("pmem", "dmem"):
            if self.tcr.overlaps(getattr(self, name)):
                raise LayoutError(f"TCR overlaps {name.upper()}")
        if self.pmem.overlaps(self.dmem):
            raise LayoutError("PMEM overlaps DMEM")
        if self.pc_init not in self.tcr:
            raise LayoutError(f"pc_init 0x{self.pc_init:04X} outside TCR {self.tcr}")

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name).to_json() for f in fields(self) if f.name != "pc_init"}
        if self.pc_init != self.tcr.min:
            out["pc_init"] = self.pc_init
        return out

    @classmethod
    def from_json(cls, doc: dict) -> LayoutConfig:
        kwargs: dict = {}
        for f in fields(cls):
            if f.name == "pc_init":
                continue
            if f.name not in doc:
                raise LayoutError(f"layout is missing field {f.name!r}")
            r = doc[f.name]
            kwargs[f.name] = Region(int(r["min"]), int(r["max"]))
        if "pc_init" in doc:
            kwargs["pc_init"] = int(doc["pc_init"])
        return cls(**kwargs)


def default_layout() -> LayoutConfig:
    return LayoutConfig(
        tcr=Region(0x0000, 0x01FF),
        dmem=Region(0x0200, 0x1FFF),
        atr=Region(0x0200, 0x021F),
        kr=Region(0x2000, 0x201F),
        pmem=Region(0x4000, 0xFFDF),
        sf=Region(0xFFD7, 0xFFD7),
        ep=Region(0xFFD8, 0xFFDB),
        bep=Region(0xFFDC, 0xFFDF),
        ivtr=Region(0xFFE0, 0xFFFF),
    )


def load_layout(path: str | Path) -> LayoutConfig:
    with open(path) as fh:
        return LayoutConfig.from_json(json.load(fh))
