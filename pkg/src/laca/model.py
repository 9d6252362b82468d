"""Network instances, conflict graphs and path prioritization.

An instance is a set of nodes, directed links and source-to-sink paths
scheduled on a TDMA grid of ``duty_cycle`` slots by ``channels`` channels.
Each path carries a generation slot and a relative deadline; the delivery
window of path ``p`` is the absolute slot range ``[gen_slot, gen_slot + deadline]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

SHARED_ENDPOINT = "shared-endpoint"
EXPLICIT_ONLY = "explicit-only"
CONFLICT_RULES = (SHARED_ENDPOINT, EXPLICIT_ONLY)


class InvalidInstance(ValueError):
    """Raised when an instance breaks one or more structural rules."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class LinkSpec:
    id: str
    src: str
    dst: str


@dataclass(frozen=True)
class PathSpec:
    id: str
    source: str
    links: tuple[str, ...]
    gen_slot: int
    deadline: int

    @property
    def length(self) -> int:
        return len(self.links)

    @property
    def last_slot(self) -> int:
        """Latest absolute slot at which the sink may receive the packet."""
        return self.gen_slot + self.deadline


@dataclass(frozen=True)
class Instance:
    nodes: frozenset[str]
    links: tuple[LinkSpec, ...]
    paths: tuple[PathSpec, ...]
    sink: str
    duty_cycle: int
    channels: int
    extra_conflicts: tuple[tuple[str, str], ...] = ()
    horizon: int | None = None

    def __post_init__(self):
        if self.horizon is None:
            h = max((p.gen_slot + p.deadline + 1 for p in self.paths), default=1)
            object.__setattr__(self, "horizon", h)

    @property
    def link_map(self) -> dict[str, LinkSpec]:
        return {l.id: l for l in self.links}

    @property
    def path_map(self) -> dict[str, PathSpec]:
        return {p.id: p for p in self.paths}

    def link_index(self) -> dict[str, int]:
        return {l.id: i for i, l in enumerate(self.links)}

    def absolute_slot(self, path: PathSpec, slot: int) -> int:
        """Map a slot-in-cycle to the unique absolute slot inside the path's window.

        Windows are shorter than one cycle, so the mapping is a bijection
        between ``[gen_slot, gen_slot + W)`` and ``[0, W)``.
        """
        return path.gen_slot + (slot - path.gen_slot) % self.duty_cycle


def instance_violations(inst: Instance) -> list[str]:
    out = []
    if inst.duty_cycle < 1:
        out.append(f"duty_cycle {inst.duty_cycle}: must be >= 1")
    if inst.channels < 1:
        out.append(f"channels {inst.channels}: must be >= 1")
    if inst.sink not in inst.nodes:
        out.append(f"sink {inst.sink}: not a declared node")

    links: dict[str, LinkSpec] = {}
    for l in inst.links:
        if l.id in links:
            out.append(f"link {l.id}: duplicate link id")
        links[l.id] = l
        for end in (l.src, l.dst):
            if end not in inst.nodes:
                out.append(f"link {l.id}: endpoint {end} is not a node")
        if l.src == l.dst:
            out.append(f"link {l.id}: source equals destination")

    seen_paths = set()
    for p in inst.paths:
        if p.id in seen_paths:
            out.append(f"path {p.id}: duplicate path id")
        seen_paths.add(p.id)
        if not p.links:
            out.append(f"path {p.id}: path must contain at least one link")
            continue
        unknown = [lid for lid in p.links if lid not in links]
        if unknown:
            out.append(f"path {p.id}: unknown link(s) {','.join(unknown)}")
            continue
        if p.source not in inst.nodes:
            out.append(f"path {p.id}: source {p.source} is not a node")
        if links[p.links[0]].src != p.source:
            out.append(f"path {p.id}: first link must start at source {p.source}")
        for a, b in zip(p.links, p.links[1:]):
            if links[a].dst != links[b].src:
                out.append(f"path {p.id}: disconnected at {a} -> {b}")
        if links[p.links[-1]].dst != inst.sink:
            out.append(f"path {p.id}: path must terminate at sink")
        if p.gen_slot < 0:
            out.append(f"path {p.id}: gen_slot must be >= 0")
        if p.deadline < 1:
            out.append(f"path {p.id}: deadline must be >= 1")
        elif inst.duty_cycle >= 1 and p.deadline >= inst.duty_cycle:
            out.append(f"path {p.id}: deadline {p.deadline} must be < duty_cycle {inst.duty_cycle}")

    for a, b in inst.extra_conflicts:
        for lid in (a, b):
            if lid not in links:
                out.append(f"conflict {a} {b}: unknown link {lid}")
    return out


def validate_instance(raw: Instance | Mapping) -> Instance:
    """Build (if needed) and check an instance; raises InvalidInstance listing every violation.

    ``raw`` is either an Instance or a mapping with keys ``nodes``, ``links``
    (LinkSpec or ``(id, src, dst)``), ``paths`` (PathSpec or mapping),
    ``sink``, ``duty_cycle``, ``channels`` and optionally ``extra_conflicts``.
    """
    if isinstance(raw, Instance):
        inst = raw
    else:
        links = tuple(l if isinstance(l, LinkSpec) else LinkSpec(*l) for l in raw["links"])
        paths = []
        for p in raw["paths"]:
            if not isinstance(p, PathSpec):
                p = PathSpec(p["id"], p["source"], tuple(p["links"]), int(p["gen_slot"]), int(p["deadline"]))
            paths.append(p)
        inst = Instance(
            nodes=frozenset(raw["nodes"]),
            links=links,
            paths=tuple(paths),
            sink=raw["sink"],
            duty_cycle=int(raw["duty_cycle"]),
            channels=int(raw["channels"]),
            extra_conflicts=tuple(tuple(c) for c in raw.get("extra_conflicts", ())),
            horizon=raw.get("horizon"),
        )
    problems = instance_violations(inst)
    if problems:
        raise InvalidInstance(problems)
    return inst


@dataclass(frozen=True)
class ConflictGraph:
    adjacency: Mapping[str, frozenset[str]]

    def conflicts(self, a: str, b: str) -> bool:
        return b in self.adjacency.get(a, ())

    def degree(self, link: str) -> int:
        return len(self.adjacency[link])


def build_conflict_graph(inst: Instance, rule: str = SHARED_ENDPOINT) -> ConflictGraph:
    if rule not in CONFLICT_RULES:
        raise ValueError(f"unknown conflict rule {rule!r}")
    adj: dict[str, set[str]] = {l.id: set() for l in inst.links}
    if rule == SHARED_ENDPOINT:
        for i, a in enumerate(inst.links):
            for b in inst.links[i + 1:]:
                if {a.src, a.dst} & {b.src, b.dst}:
                    adj[a.id].add(b.id)
                    adj[b.id].add(a.id)
    for a, b in inst.extra_conflicts:
        if a not in adj or b not in adj:
            raise InvalidInstance([f"conflict {a} {b}: unknown link id"])
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    return ConflictGraph({k: frozenset(v) for k, v in adj.items()})


def urgency(path: PathSpec) -> int:
    """Deadline slack: deadline minus hop count. Negative means no schedule exists."""
    return path.deadline - path.length


def conflict_count(path: PathSpec, graph: ConflictGraph) -> int:
    total = 0
    for lid in path.links:
        if lid not in graph.adjacency:
            raise KeyError(f"link {lid} not in conflict graph")
        total += len(graph.adjacency[lid])
    return total


@dataclass(frozen=True)
class PathPriority:
    path: str
    urgency: int
    conflicts: int
    metric: float


def _minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def combined_metric(urgency_norm: float, conflict_norm: float, alpha: float) -> float:
    # collision term is subtracted so an ascending sort favours both small slack and heavy conflict
    return alpha * urgency_norm - (1.0 - alpha) * conflict_norm


def priority_order(paths: Iterable[PathSpec], graph: ConflictGraph, alpha: float
                   ) -> tuple[list[PathSpec], list[PathPriority]]:
    """Sort paths most-urgent / most-colliding first.

    Returns the ordered paths and their priorities (in the same order).
    Ties are broken by ascending path id.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    paths = list(paths)
    if not paths:
        return [], []
    urg = [urgency(p) for p in paths]
    cnt = [conflict_count(p, graph) for p in paths]
    metric = [combined_metric(u, c, alpha) for u, c in zip(_minmax(urg), _minmax(cnt))]
    prios = [PathPriority(p.id, u, c, m) for p, u, c, m in zip(paths, urg, cnt, metric)]
    order = sorted(range(len(paths)), key=lambda i: (metric[i], paths[i].id))
    return [paths[i] for i in order], [prios[i] for i in order]
