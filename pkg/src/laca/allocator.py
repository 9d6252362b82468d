"""Channel/slot allocation on the (slot-in-cycle, channel) grid.

Both allocators walk paths in priority order and place each path's hops
sink-to-source, so the sink-adjacent hop is pinned inside the deadline
window first and every upstream hop must land strictly earlier than the
hop after it. They differ only in path order and in which feasible cell is
picked: LACA takes the best-quality cell, urgent-first the earliest one.
"""
from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Sequence

from .linkquality import QualityMap
from .model import (SHARED_ENDPOINT, ConflictGraph, Instance, PathSpec,
                    build_conflict_graph, priority_order, urgency)

PRIMARY = "primary"
BACKUP = "backup"
_KIND_RANK = {PRIMARY: 0, BACKUP: 1}

NEGATIVE_URGENCY = "negative-urgency"
NO_FREE_CELL = "no-free-cell"


@dataclass(frozen=True)
class AllocParams:
    alpha: float = 0.5
    t_q: float | str = "auto"
    max_backups_per_link: int = 1
    conflict_rule: str = SHARED_ENDPOINT

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.t_q != "auto" and not 0.0 <= float(self.t_q) <= 1.0:
            raise ValueError(f"t_q must be in [0, 1] or 'auto', got {self.t_q}")
        if self.max_backups_per_link < 0:
            raise ValueError("max_backups_per_link must be >= 0")

    def resolve_tq(self, qmap: QualityMap) -> float:
        return qmap.mean() if self.t_q == "auto" else float(self.t_q)


@dataclass(frozen=True)
class Entry:
    link: str
    slot: int
    channel: int
    kind: str
    path: str
    hop: int

    @property
    def cell(self) -> tuple[int, int]:
        return self.slot, self.channel


def _entry_key(e: Entry):
    return e.path, e.hop, _KIND_RANK[e.kind], e.slot, e.channel


@dataclass(frozen=True)
class Schedule:
    entries: tuple[Entry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(sorted(self.entries, key=_entry_key)))

    def primary(self, path: str, hop: int) -> Entry:
        for e in self.entries:
            if e.path == path and e.hop == hop and e.kind == PRIMARY:
                return e
        raise KeyError(f"no primary entry for path {path} hop {hop}")

    def backups(self, path: str, hop: int) -> list[Entry]:
        return [e for e in self.entries if e.path == path and e.hop == hop and e.kind == BACKUP]

    def hop_cells(self) -> dict[tuple[str, int], list[Entry]]:
        """(path, hop) -> [primary, *backups]."""
        out: dict[tuple[str, int], list[Entry]] = defaultdict(list)
        for e in self.entries:
            out[(e.path, e.hop)].append(e)
        return dict(out)

    @property
    def n_backups(self) -> int:
        return sum(e.kind == BACKUP for e in self.entries)


@dataclass(frozen=True)
class Failure:
    path: str
    hop: int
    link: str
    reason: str


@dataclass(frozen=True)
class InfeasibilityReport:
    failures: tuple[Failure, ...]

    @property
    def links(self) -> list[str]:
        return [f.link for f in self.failures]


class InsufficientSlots(Exception):
    """No feasible (slot, channel) cell for at least one hop."""

    def __init__(self, report: InfeasibilityReport):
        self.report = report
        names = ", ".join(f"{f.path}/{f.link} ({f.reason})" for f in report.failures)
        super().__init__(f"insufficient slots: {names}")


@dataclass(frozen=True)
class Decision:
    """One hop placement: the chosen cell and every cell that was feasible at that moment."""

    path: str
    hop: int
    link: str
    time: int
    channel: int
    candidates: tuple[tuple[int, int, float], ...]  # (absolute slot, channel, quality)


class Grid:
    """Occupancy of the W x C grid; a cell may hold several mutually non-conflicting links."""

    def __init__(self, inst: Instance, graph: ConflictGraph):
        self.W = inst.duty_cycle
        self.C = inst.channels
        self.graph = graph
        self.cells: dict[tuple[int, int], list[str]] = defaultdict(list)
        self.busy_slots: dict[tuple[str, int], set[int]] = defaultdict(set)  # (path, hop) -> slots

    def free_for(self, link: str, slot: int, channel: int) -> bool:
        for other in self.cells.get((slot, channel), ()):
            # two entries of one link in a cell are a collision too
            if other == link or self.graph.conflicts(link, other):
                return False
        return True

    def unused(self, slot: int, channel: int) -> bool:
        return not self.cells.get((slot, channel))

    def add(self, e: Entry) -> None:
        self.cells[e.cell].append(e.link)
        self.busy_slots[(e.path, e.hop)].add(e.slot)

    def remove(self, e: Entry) -> None:
        self.cells[e.cell].remove(e.link)
        self.busy_slots[(e.path, e.hop)].discard(e.slot)


def hop_window(path: PathSpec, hop: int, downstream_time: int | None) -> tuple[int, int]:
    """Absolute slot bounds [lo, hi] for a hop's primary transmission."""
    lo = path.gen_slot + hop
    hi = path.last_slot if downstream_time is None else downstream_time - 1
    return lo, hi


def _place_path(path: PathSpec, inst: Instance, grid: Grid, qmap: QualityMap,
                pick: Callable[[list[tuple[int, int, float]]], tuple[int, int, float]],
                log: list | None) -> list[Entry] | Failure:
    placed: list[Entry] = []
    downstream = None
    for hop in reversed(range(path.length)):
        link = path.links[hop]
        lo, hi = hop_window(path, hop, downstream)
        cands = []
        for t in range(lo, hi + 1):
            s = t % inst.duty_cycle
            for c in range(inst.channels):
                if grid.free_for(link, s, c):
                    cands.append((t, c, qmap.q(link, c, s)))
        if not cands:
            for e in placed:
                grid.remove(e)
            return Failure(path.id, hop, link, NO_FREE_CELL)
        t, c, _ = pick(cands)
        e = Entry(link, t % inst.duty_cycle, c, PRIMARY, path.id, hop)
        grid.add(e)
        placed.append(e)
        if log is not None:
            log.append(Decision(path.id, hop, link, t, c, tuple(cands)))
        downstream = t
    return placed


def _best_quality(cands):
    return min(cands, key=lambda x: (-x[2], x[0], x[1]))


def _earliest(cands):
    return min(cands, key=lambda x: (x[0], x[1]))


def _allocate(inst: Instance, qmap: QualityMap, ordered: Sequence[PathSpec], graph: ConflictGraph,
              pick, log: list | None) -> tuple[Grid, list[Entry]]:
    failures = [Failure(p.id, 0, p.links[0], NEGATIVE_URGENCY) for p in ordered if urgency(p) < 0]
    if failures:
        raise InsufficientSlots(InfeasibilityReport(tuple(failures)))
    grid = Grid(inst, graph)
    entries: list[Entry] = []
    for path in ordered:
        res = _place_path(path, inst, grid, qmap, pick, log)
        if isinstance(res, Failure):
            failures.append(res)
        else:
            entries.extend(res)
    if failures:
        raise InsufficientSlots(InfeasibilityReport(tuple(failures)))
    return grid, entries


def allocate_laca(inst: Instance, qmap: QualityMap, params: AllocParams = AllocParams(),
                  log: list | None = None) -> Schedule:
    """Quality-aware allocation with backup slots.

    Raises InsufficientSlots when some hop cannot be placed; the other
    paths are still attempted so the report lists every failing path.
    Pass a list as ``log`` to collect one Decision per placed hop.
    """
    graph = build_conflict_graph(inst, params.conflict_rule)
    ordered, _ = priority_order(inst.paths, graph, params.alpha)
    grid, entries = _allocate(inst, qmap, ordered, graph, _best_quality, log)
    return _add_backups(Schedule(tuple(entries)), inst, qmap, params, grid)


def allocate_urgent_first(inst: Instance, qmap: QualityMap, params: AllocParams = AllocParams(),
                          log: list | None = None) -> Schedule:
    """Baseline: most urgent path first, earliest free cell per hop, no backups."""
    graph = build_conflict_graph(inst, params.conflict_rule)
    ordered = sorted(inst.paths, key=lambda p: (urgency(p), p.id))
    _, entries = _allocate(inst, qmap, ordered, graph, _earliest, log)
    return Schedule(tuple(entries))


ALLOCATORS = {"laca": allocate_laca, "urgent": allocate_urgent_first}


def assign_backups(schedule: Schedule, inst: Instance, qmap: QualityMap,
                   params: AllocParams = AllocParams()) -> Schedule:
    graph = build_conflict_graph(inst, params.conflict_rule)
    grid = Grid(inst, graph)
    for e in schedule.entries:
        grid.add(e)
    return _add_backups(schedule, inst, qmap, params, grid)


def _add_backups(schedule: Schedule, inst: Instance, qmap: QualityMap, params: AllocParams,
                 grid: Grid) -> Schedule:
    t_q = params.resolve_tq(qmap)
    W = inst.duty_cycle
    paths = inst.path_map
    primaries = [e for e in schedule.entries if e.kind == PRIMARY]
    # worst links get first pick of the spare cells
    primaries.sort(key=lambda e: (qmap.q(e.link, e.channel, e.slot), e.path, e.hop))
    new = []
    for e in primaries:
        path = paths[e.path]
        t_i = inst.absolute_slot(path, e.slot)
        if e.hop + 1 < path.length:
            nxt = schedule.primary(e.path, e.hop + 1)
            hi = inst.absolute_slot(path, nxt.slot) - 1
        else:
            hi = path.last_slot
        for _ in range(params.max_backups_per_link):
            busy = grid.busy_slots[(e.path, e.hop)]
            cands = []
            for t in range(t_i + 1, hi + 1):
                s = t % W
                if s in busy:
                    continue
                for c in range(inst.channels):
                    q = qmap.q(e.link, c, s)
                    if q >= t_q and grid.unused(s, c):
                        cands.append((t, c, q))
            if not cands:
                break
            t, c, _ = _best_quality(cands)
            b = Entry(e.link, t % W, c, BACKUP, e.path, e.hop)
            grid.add(b)
            new.append(b)
    return Schedule(schedule.entries + tuple(new))


def verify_schedule(schedule: Schedule, inst: Instance, params: AllocParams = AllocParams(),
                    qmap: QualityMap | None = None) -> list[str]:
    """Every broken schedule rule, one message each; empty means valid.

    The backup quality threshold is only checked when ``qmap`` is given.
    """
    out = []
    graph = build_conflict_graph(inst, params.conflict_rule)
    paths = inst.path_map
    W, C = inst.duty_cycle, inst.channels
    by_hop: dict[tuple[str, int], list[Entry]] = defaultdict(list)
    well_formed = []
    for e in schedule.entries:
        p = paths.get(e.path)
        if p is None:
            out.append(f"{e}: unknown path")
        elif not 0 <= e.hop < p.length:
            out.append(f"{e}: hop index outside path")
        elif p.links[e.hop] != e.link:
            out.append(f"{e}: link does not match path hop {p.links[e.hop]}")
        elif not (0 <= e.slot < W and 0 <= e.channel < C):
            out.append(f"{e}: cell outside the {W}x{C} grid")
        elif e.kind not in _KIND_RANK:
            out.append(f"{e}: unknown kind")
        else:
            by_hop[(e.path, e.hop)].append(e)
            well_formed.append(e)

    cells: dict[tuple[int, int], list[Entry]] = defaultdict(list)
    for e in well_formed:
        cells[e.cell].append(e)
    for cell, es in sorted(cells.items()):
        for i, a in enumerate(es):
            for b in es[i + 1:]:
                if a.link == b.link or graph.conflicts(a.link, b.link):
                    out.append(f"conflict at slot {cell[0]} channel {cell[1]}: "
                               f"{a.path}/{a.link} vs {b.path}/{b.link}")

    t_q = params.resolve_tq(qmap) if qmap is not None else None
    for p in inst.paths:
        times = []
        for hop in range(p.length):
            es = by_hop.get((p.id, hop), [])
            prim = [e for e in es if e.kind == PRIMARY]
            if len(prim) != 1:
                out.append(f"path {p.id} hop {hop}: {len(prim)} primary entries, expected 1")
                times.append(None)
                continue
            times.append(inst.absolute_slot(p, prim[0].slot))
        if None in times:
            for hop in range(p.length):
                if times[hop] is None and any(e.kind == BACKUP for e in by_hop.get((p.id, hop), [])):
                    out.append(f"path {p.id} hop {hop}: backup without a primary")
            continue
        for hop in range(1, p.length):
            if times[hop] <= times[hop - 1]:
                out.append(f"path {p.id}: precedence violated at hop {hop} "
                           f"(slot {times[hop]} <= {times[hop - 1]})")
        if times[0] < p.gen_slot:
            out.append(f"path {p.id}: first hop before generation slot")
        if times[-1] > p.last_slot:
            out.append(f"path {p.id}: last hop at {times[-1]} misses deadline slot {p.last_slot}")
        for hop in range(p.length):
            hi = times[hop + 1] - 1 if hop + 1 < p.length else p.last_slot
            backups = [e for e in by_hop[(p.id, hop)] if e.kind == BACKUP]
            if len(backups) > params.max_backups_per_link:
                out.append(f"path {p.id} hop {hop}: {len(backups)} backups exceed limit "
                           f"{params.max_backups_per_link}")
            slots_used = [e.slot for e in by_hop[(p.id, hop)]]
            if len(set(slots_used)) != len(slots_used):
                out.append(f"path {p.id} hop {hop}: two cells in one slot")
            for b in backups:
                t = inst.absolute_slot(p, b.slot)
                if not times[hop] < t <= hi:
                    out.append(f"path {p.id} hop {hop}: backup at {t} outside ({times[hop]}, {hi}]")
                if t_q is not None and qmap.q(b.link, b.channel, b.slot) < t_q:
                    out.append(f"path {p.id} hop {hop}: backup quality below threshold {t_q:.6f}")
    return out


SCHEDULE_HEADER = ["link", "slot", "channel", "kind", "path", "hop"]


def schedule_to_csv(schedule: Schedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCHEDULE_HEADER)
    for e in schedule.entries:
        w.writerow([e.link, e.slot, e.channel, e.kind, e.path, e.hop])
    return buf.getvalue()


def schedule_from_csv(text: str) -> Schedule:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != SCHEDULE_HEADER:
        raise ValueError(f"schedule CSV must start with header {','.join(SCHEDULE_HEADER)}")
    entries = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 6:
            raise ValueError(f"line {lineno}: expected 6 fields")
        link, slot, ch, kind, path, hop = (c.strip() for c in row)
        if kind not in _KIND_RANK:
            raise ValueError(f"line {lineno}: kind must be primary or backup")
        try:
            entries.append(Entry(link, int(slot), int(ch), kind, path, int(hop)))
        except ValueError:
            raise ValueError(f"line {lineno}: slot, channel and hop must be integers") from None
    return Schedule(tuple(entries))


def report_to_csv(report: InfeasibilityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "hop", "link", "reason"])
    for f in report.failures:
        w.writerow([f.path, f.hop, f.link, f.reason])
    return buf.getvalue()
