"""Per-cell link quality from in-packet byte-level RSSI traces.

The weakest byte of a packet is taken as the RSSI base. Every byte's
distance above that base is turned into a byte error rate through a
piecewise-linear curve, and the packet success probability is the product
of the per-byte success probabilities.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import Instance

RSSI_MIN, RSSI_MAX = -127, 0


@dataclass(frozen=True)
class RssiTrace:
    packet: int
    link: str
    channel: int
    slot: int
    rssi: tuple[int, ...]

    def __post_init__(self):
        if not self.rssi:
            raise ValueError(f"packet {self.packet}: empty RSSI trace")
        bad = [r for r in self.rssi if not RSSI_MIN <= r <= RSSI_MAX]
        if bad:
            raise ValueError(f"packet {self.packet}: RSSI values out of [-127, 0]: {bad}")


@dataclass(frozen=True)
class BerCurve:
    """Byte error rate as a function of RSSI distance (dBm) above the packet's base."""

    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("BER curve needs at least one breakpoint")
        d = [p[0] for p in self.points]
        r = [p[1] for p in self.points]
        if any(x < 0 for x in d):
            raise ValueError("BER curve distances must be >= 0")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("BER curve distances must be strictly increasing")
        if any(not 0.0 <= x <= 1.0 for x in r):
            raise ValueError("BER curve rates must lie in [0, 1]")
        if any(b < a for a, b in zip(r, r[1:])):
            raise ValueError("BER curve rates must be non-decreasing")
        # rates are non-decreasing, so checking the interpolated value at 5 dBm covers the whole tail
        if float(np.interp(5.0, d, r)) < 0.9:
            raise ValueError("BER curve rate must be >= 0.9 at distances >= 5 dBm")


# placeholder shape: rises steeply and stays above 0.9 from 5 dBm on
DEFAULT_CURVE = BerCurve((
    (0, 0.0), (1, 0.02), (2, 0.08), (3, 0.25), (4, 0.6), (5, 0.9), (8, 0.97), (12, 0.995),
))


def rssi_base(trace: RssiTrace | Sequence[int]) -> int:
    values = trace.rssi if isinstance(trace, RssiTrace) else trace
    if len(values) == 0:
        raise ValueError("empty RSSI trace")
    return min(values)


def byte_error_rate(distance: float, curve: BerCurve = DEFAULT_CURVE) -> float:
    if distance < 0:
        raise ValueError(f"negative RSSI distance {distance}")
    xs = [p[0] for p in curve.points]
    ys = [p[1] for p in curve.points]
    return float(np.interp(distance, xs, ys))


def packet_success_probability(byte_errors: Iterable[float]) -> float:
    q = 1.0
    for b in byte_errors:
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"byte error rate {b} outside [0, 1]")
        q *= 1.0 - b
    return q


def trace_quality(trace: RssiTrace, curve: BerCurve = DEFAULT_CURVE) -> float:
    base = rssi_base(trace)
    return packet_success_probability(byte_error_rate(r - base, curve) for r in trace.rssi)


class QualityMap:
    """Dense table of success probabilities indexed by (link, channel, slot-in-cycle)."""

    def __init__(self, links: Sequence[str], channels: int, duty_cycle: int,
                 default: float = 1.0, values: np.ndarray | None = None):
        if not 0.0 <= default <= 1.0:
            raise ValueError(f"quality default {default} outside [0, 1]")
        self.links = tuple(links)
        self.index = {l: i for i, l in enumerate(self.links)}
        self.channels = channels
        self.duty_cycle = duty_cycle
        self.default = float(default)
        shape = (len(self.links), channels, duty_cycle)
        if values is None:
            self.values = np.full(shape, self.default)
        else:
            values = np.asarray(values, dtype=float)
            if values.shape != shape:
                raise ValueError(f"quality table shape {values.shape} != {shape}")
            if np.any((values < 0) | (values > 1)):
                raise ValueError("quality values must lie in [0, 1]")
            self.values = values.copy()

    @classmethod
    def for_instance(cls, inst: Instance, default: float = 1.0) -> QualityMap:
        return cls([l.id for l in inst.links], inst.channels, inst.duty_cycle, default)

    def q(self, link: str, channel: int, slot: int) -> float:
        return float(self.values[self.index[link], channel, slot])

    def set(self, link: str, channel: int, slot: int, value: float) -> None:
        if link not in self.index:
            raise KeyError(f"unknown link {link}")
        if not (0 <= channel < self.channels and 0 <= slot < self.duty_cycle):
            raise IndexError(f"cell (channel {channel}, slot {slot}) outside the grid")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"quality {value} outside [0, 1]")
        self.values[self.index[link], channel, slot] = value

    def mean(self) -> float:
        return float(self.values.mean())

    def cells(self):
        """Yield (link, channel, slot, q) for every cell, in table order."""
        for li, link in enumerate(self.links):
            for c in range(self.channels):
                for s in range(self.duty_cycle):
                    yield link, c, s, float(self.values[li, c, s])

    def __eq__(self, other):
        return (isinstance(other, QualityMap) and self.links == other.links
                and self.default == other.default
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"QualityMap({len(self.links)} links, C={self.channels}, W={self.duty_cycle}, default={self.default})"


def estimate_quality_map(traces: Iterable[RssiTrace], curve: BerCurve, inst: Instance,
                         default: float = 1.0) -> QualityMap:
    """Average per-packet quality into every observed cell; unobserved cells keep ``default``."""
    qmap = QualityMap.for_instance(inst, default)
    per_cell: dict[tuple[str, int, int], list[float]] = defaultdict(list)
    for tr in traces:
        if tr.link not in qmap.index:
            raise KeyError(f"packet {tr.packet}: unknown link {tr.link}")
        if not 0 <= tr.channel < inst.channels:
            raise IndexError(f"packet {tr.packet}: channel {tr.channel} outside [0, {inst.channels})")
        if not 0 <= tr.slot < inst.duty_cycle:
            raise IndexError(f"packet {tr.packet}: slot {tr.slot} outside [0, {inst.duty_cycle})")
        per_cell[(tr.link, tr.channel, tr.slot)].append(trace_quality(tr, curve))
    for (link, c, s), qs in per_cell.items():
        # fsum keeps the mean exactly order-independent
        qmap.set(link, c, s, min(1.0, max(0.0, math.fsum(qs) / len(qs))))
    return qmap


def parse_traces(text: str) -> list[RssiTrace]:
    """Parse ``link_id,channel,slot,r0;r1;...`` lines; ``#`` lines are comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected link,channel,slot,rssi-list")
        try:
            rssi = tuple(int(x) for x in parts[3].split(";") if x.strip())
            out.append(RssiTrace(lineno, parts[0].strip(), int(parts[1]), int(parts[2]), rssi))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
    return out


def parse_curve(text: str) -> BerCurve:
    points = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'distance_dBm error_rate'")
        try:
            points.append((int(parts[0]), float(parts[1])))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from None
    return BerCurve(tuple(points))
