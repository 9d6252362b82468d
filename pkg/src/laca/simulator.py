"""Monte Carlo execution of schedules over lossy links, plus the random instance generator."""
from __future__ import annotations

import csv
import io
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .allocator import (ALLOCATORS, BACKUP, AllocParams, InsufficientSlots, Schedule,
                        verify_schedule)
from .linkquality import QualityMap
from .model import Instance, LinkSpec, PathSpec, validate_instance

# uniforms come in fixed (trial block x attempt chunk) tiles, so the number driving a given
# (seed, path, trial, attempt) never depends on worker split or simulated horizon
BLOCK = 4096
ATTEMPT_CHUNK = 16


@dataclass(frozen=True)
class SimParams:
    trials: int = 10_000
    master_seed: int = 0
    drop_at_deadline: bool = True
    max_cycles: int = 16  # only used when drop_at_deadline is False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class PathStats:
    path: str
    delivered: int
    transmissions: int
    retransmissions: int
    trials: int

    @property
    def pdr(self) -> float:
        return self.delivered / self.trials

    @property
    def miss_frac(self) -> float:
        return 1.0 - self.pdr

    @property
    def mean_tx(self) -> float:
        return self.transmissions / self.trials

    @property
    def mean_retx(self) -> float:
        return self.retransmissions / self.trials


@dataclass(frozen=True)
class SimReport:
    paths: tuple[PathStats, ...]
    utilization: float
    trials: int
    seed: int

    @property
    def total_tx(self) -> int:
        return sum(p.transmissions for p in self.paths)

    @property
    def total_retx(self) -> int:
        return sum(p.retransmissions for p in self.paths)

    @property
    def mean_pdr(self) -> float:
        return float(np.mean([p.pdr for p in self.paths])) if self.paths else 0.0

    def path(self, pid: str) -> PathStats:
        for p in self.paths:
            if p.path == pid:
                return p
        raise KeyError(pid)


def resource_utilization(schedule: Schedule, inst: Instance) -> float:
    """Fraction of grid cells holding at least one entry."""
    used = {e.cell for e in schedule.entries}
    return len(used) / (inst.duty_cycle * inst.channels)


def path_key(path_id: str) -> int:
    return zlib.crc32(path_id.encode("utf-8"))


def _hop_tables(path: PathSpec, schedule: Schedule, qmap: QualityMap, W: int):
    """Per hop, arrays over slot-in-cycle: quality of the primary / backup cell at that slot (NaN if none)."""
    prim = np.full((path.length, W), np.nan)
    back = np.full((path.length, W), np.nan)
    cells = schedule.hop_cells()
    for hop in range(path.length):
        for e in cells.get((path.id, hop), ()):
            q = qmap.q(e.link, e.channel, e.slot)
            (back if e.kind == BACKUP else prim)[hop, e.slot] = q
    return prim, back


def _run_block(prim, back, gen, last, W, end, u):
    """Slot-stepped execution of one block of trials; ``u[trial, attempt]`` drives each attempt."""
    n = u.shape[0]
    hops = prim.shape[0]
    hop = np.zeros(n, dtype=np.int64)
    ready = np.full(n, gen, dtype=np.int64)
    failed = np.zeros(n, dtype=bool)
    attempts = np.zeros(n, dtype=np.int64)
    retx = np.zeros(n, dtype=np.int64)
    delivered = np.zeros(n, dtype=bool)
    rows = np.arange(n)
    for t in range(gen, end + 1):
        s = t % W
        for k in range(hops):
            qp, qb = prim[k, s], back[k, s]
            if np.isnan(qp) and np.isnan(qb):
                continue
            mask = (hop == k) & (ready <= t)
            if np.isnan(qp):
                mask &= failed
                q = qb
            else:
                q = qp
            idx = rows[mask]
            if idx.size == 0:
                continue
            ok = u[idx, attempts[idx]] < q
            retx[idx] += failed[idx]
            attempts[idx] += 1
            good, bad = idx[ok], idx[~ok]
            failed[bad] = True
            failed[good] = False
            hop[good] += 1
            ready[good] = t + 1
            if k == hops - 1 and t <= last:
                delivered[good] = True
    return int(delivered.sum()), int(attempts.sum()), int(retx.sum())


def _path_task(args):
    prim, back, gen, last, W, end, seed, key, block, n = args
    n_attempts = end - gen + 1
    tiles = []
    for j in range(-(-n_attempts // ATTEMPT_CHUNK)):
        ss = np.random.SeedSequence(seed, spawn_key=(key, block, j))
        tiles.append(np.random.default_rng(ss).random((n, ATTEMPT_CHUNK)))
    u = np.hstack(tiles)
    return _run_block(prim, back, gen, last, W, end, u)


def simulate(inst: Instance, schedule: Schedule, qmap: QualityMap, sim: SimParams,
             params: AllocParams | None = None, workers: int = 1) -> SimReport:
    """Run ``sim.trials`` independent packets per path through the schedule.

    A hop's first attempt happens at its primary cell; after a failure it
    retries at whichever of its cells (primary or backup) comes up next.
    Results depend only on the inputs and the seed, not on ``workers``.
    """
    rule = (params or AllocParams()).conflict_rule
    check = AllocParams(t_q=0.0, max_backups_per_link=10**9, conflict_rule=rule)
    problems = verify_schedule(schedule, inst, check)
    if problems:
        raise ValueError("schedule does not verify: " + "; ".join(problems))
    for e in schedule.entries:
        if e.link not in qmap.index:
            raise KeyError(f"quality map has no entry for link {e.link}")

    W = inst.duty_cycle
    tasks, owner = [], []
    for p in sorted(inst.paths, key=lambda p: p.id):
        prim, back = _hop_tables(p, schedule, qmap, W)
        end = p.last_slot if sim.drop_at_deadline else p.last_slot + sim.max_cycles * W
        key = path_key(p.id)
        for b, start in enumerate(range(0, sim.trials, BLOCK)):
            n = min(BLOCK, sim.trials - start)
            tasks.append((prim, back, p.gen_slot, p.last_slot, W, end, sim.master_seed, key, b, n))
            owner.append(p.id)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_path_task, tasks))
    else:
        results = [_path_task(t) for t in tasks]

    totals: dict[str, list[int]] = {}
    for pid, (d, tx, rtx) in zip(owner, results):
        acc = totals.setdefault(pid, [0, 0, 0])
        acc[0] += d
        acc[1] += tx
        acc[2] += rtx
    stats = tuple(PathStats(pid, d, tx, rtx, sim.trials) for pid, (d, tx, rtx) in totals.items())
    return SimReport(stats, resource_utilization(schedule, inst), sim.trials, sim.master_seed)


def report_to_csv(report: SimReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "pdr", "mean_tx", "mean_retx", "miss_frac"])
    for p in report.paths:
        w.writerow([p.path, f"{p.pdr:.6f}", f"{p.mean_tx:.6f}", f"{p.mean_retx:.6f}", f"{p.miss_frac:.6f}"])
    w.writerow(["TOTAL", f"{report.utilization:.6f}", report.total_tx, report.total_retx, report.trials])
    return buf.getvalue()


@dataclass(frozen=True)
class GeneratorConfig:
    rows: int = 10
    cols: int = 5
    sink: tuple[int, int] = (0, 0)
    slack: tuple[int, int] = (0, 3)  # inclusive range added to the hop count
    duty_cycle: int = 12
    channels: int = 4
    p_high: float = 0.8
    high: tuple[float, float] = (0.61, 0.99)
    low: tuple[float, float] = (0.2, 0.61)
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols < 2:
            raise ValueError("grid needs at least 2 nodes")
        if not (0 <= self.sink[0] < self.rows and 0 <= self.sink[1] < self.cols):
            raise ValueError("sink outside the grid")
        if not 0 <= self.slack[0] <= self.slack[1]:
            raise ValueError("slack range must satisfy 0 <= lo <= hi")
        if self.duty_cycle < 2 or self.channels < 1:
            raise ValueError("duty_cycle must be >= 2 and channels >= 1")
        if not 0.0 <= self.p_high <= 1.0:
            raise ValueError("p_high must be in [0, 1]")
        for lo, hi in (self.high, self.low):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError("quality ranges must lie in [0, 1]")


def node_name(r: int, c: int) -> str:
    return f"n{r:02d}_{c:02d}"


def generate_instance(cfg: GeneratorConfig) -> tuple[Instance, QualityMap]:
    """Grid topology, BFS routing tree towards the sink, one path per other node.

    Deadlines and link qualities come from separate streams, and channel
    ``c`` of the quality map is drawn before channel ``c + 1``, so configs
    that differ only in ``channels`` share topology, deadlines and the
    common channels' qualities.
    """
    names = {(r, c): node_name(r, c) for r in range(cfg.rows) for c in range(cfg.cols)}
    sink = names[cfg.sink]

    def neighbours(rc):
        r, c = rc
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            if (r + dr, c + dc) in names:
                yield (r + dr, c + dc)

    dist = {cfg.sink: 0}
    frontier = [cfg.sink]
    while frontier:
        nxt = []
        for rc in frontier:
            for nb in neighbours(rc):
                if nb not in dist:
                    dist[nb] = dist[rc] + 1
                    nxt.append(nb)
        frontier = nxt
    parent = {}
    for rc, d in dist.items():
        if d > 0:
            parent[rc] = min((nb for nb in neighbours(rc) if dist[nb] == d - 1), key=lambda x: names[x])

    links = {}
    for rc in sorted(parent, key=lambda x: names[x]):
        lid = f"{names[rc]}-{names[parent[rc]]}"
        links[rc] = LinkSpec(lid, names[rc], names[parent[rc]])

    ss = np.random.SeedSequence(cfg.seed)
    deadline_rng, quality_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    W = cfg.duty_cycle
    paths = []
    for rc in sorted(parent, key=lambda x: names[x]):
        hops = []
        cur = rc
        while cur != cfg.sink:
            hops.append(links[cur].id)
            cur = parent[cur]
        slack = int(deadline_rng.integers(cfg.slack[0], cfg.slack[1] + 1))
        dl = min(len(hops) + slack, W - 1)
        paths.append(PathSpec(f"p{names[rc][1:]}", names[rc], tuple(hops), 0, dl))

    inst = validate_instance(Instance(
        nodes=frozenset(names.values()),
        links=tuple(links[rc] for rc in sorted(links, key=lambda x: names[x])),
        paths=tuple(paths),
        sink=sink,
        duty_cycle=W,
        channels=cfg.channels,
    ))
    nl = len(inst.links)
    vals = np.empty((nl, cfg.channels, W))
    for c in range(cfg.channels):
        hi = quality_rng.uniform(*cfg.high, size=(nl, W))
        lo = quality_rng.uniform(*cfg.low, size=(nl, W))
        pick = quality_rng.random((nl, W)) < cfg.p_high
        vals[:, c, :] = np.where(pick, hi, lo)
    qmap = QualityMap([l.id for l in inst.links], cfg.channels, W, 1.0, vals)
    return inst, qmap


def run_seeds(seed: int, runs: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]


def insufficient_slot_rate(cfg: GeneratorConfig, algo: str, runs: int, seed: int,
                           params: AllocParams = AllocParams()) -> float:
    """Fraction of generated instances for which the allocator runs out of cells."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    allocate = ALLOCATORS[algo]
    failed = 0
    for s in run_seeds(seed, runs):
        inst, qmap = generate_instance(replace(cfg, seed=s))
        try:
            allocate(inst, qmap, params)
        except InsufficientSlots:
            failed += 1
    return failed / runs


def parse_generator(text: str) -> GeneratorConfig:
    """``key value...`` lines: grid R C, sink R C, slack LO HI, duty_cycle W, channels C,
    p_high P, quality_high LO HI, quality_low LO HI, seed S."""
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key, args = line[0], line[1:]
        try:
            if key == "grid":
                kw["rows"], kw["cols"] = int(args[0]), int(args[1])
            elif key == "sink":
                kw["sink"] = (int(args[0]), int(args[1]))
            elif key == "slack":
                kw["slack"] = (int(args[0]), int(args[1]))
            elif key in ("duty_cycle", "channels", "seed"):
                kw[key] = int(args[0])
            elif key == "p_high":
                kw["p_high"] = float(args[0])
            elif key in ("quality_high", "quality_low"):
                kw[key.split("_")[1]] = (float(args[0]), float(args[1]))
            else:
                raise ValueError(f"unknown key {key!r}")
        except (IndexError, ValueError) as e:
            raise ValueError(f"line {lineno}: {e}") from None
    return GeneratorConfig(**kw)
