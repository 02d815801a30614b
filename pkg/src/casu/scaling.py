"""Hash-work measurement of the authenticate and install phases."""
from __future__ import annotations

import csv
import io
from typing import Iterable, NamedTuple

from .app import DownloadOutcome, download
from .crypto import counting_compressions
from .image import MIN_IMAGE_SIZE, make_bin, make_ivt
from .protocol import provision
from .trusted import AuthOutcome, casu_authenticate, casu_entry, casu_install
from .verifier import build_update

CSV_HEADER = ("size", "auth_compressions", "install_compressions")


class ScalingRow(NamedTuple):
    size: int
    auth_compressions: int
    install_compressions: int


def measure_one(size: int, seed: int = 0) -> ScalingRow:
    """SHA-256 compressions spent authenticating and installing a ``size``-byte image."""
    if size < MIN_IMAGE_SIZE:
        raise ValueError(f"image size must be at least {MIN_IMAGE_SIZE}")
    sim = provision(bin_size=16, seed=seed)
    m = sim.device.machine
    req = build_update(sim.session, make_bin(size - MIN_IMAGE_SIZE, seed), make_ivt(0x4000))
    if download(m, req) is not DownloadOutcome.INVOKED_TCB:
        raise RuntimeError("image was not staged")
    casu_entry(m, at_boot=False)
    with counting_compressions() as auth:
        outcome = casu_authenticate(m)
    if outcome is not AuthOutcome.ACCEPT:
        raise RuntimeError(f"staged image rejected: {outcome.value}")
    with counting_compressions() as install:
        casu_install(m)
    return ScalingRow(size, auth.count, install.count)


def measure_scaling(sizes: Iterable[int], seed: int = 0) -> list[ScalingRow]:
    return [measure_one(s, seed) for s in sizes]


def to_csv(rows: Iterable[ScalingRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()
