"""Ground truth for small instances.

Nothing here reuses the simulator's or the allocator's placement code:
``exact_path_pdr`` is a forward DP over (hop, availability slot) states,
``enumerate_path_pdr`` walks every outcome vector slot by slot, and
``exhaustive_feasible`` is plain backtracking over all cells.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .allocator import PRIMARY, AllocParams, Entry, Schedule, verify_schedule
from .linkquality import QualityMap
from .model import Instance, PathSpec, build_conflict_graph


class SearchSpaceExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ExactPdrResult:
    path: str
    probability: float
    states: int


def _checked(inst: Instance, schedule: Schedule, path: PathSpec | str) -> PathSpec:
    loose = AllocParams(t_q=0.0, max_backups_per_link=10**9)
    problems = verify_schedule(schedule, inst, loose)
    if problems:
        raise ValueError("schedule does not verify: " + "; ".join(problems))
    return inst.path_map[path] if isinstance(path, str) else path


def _cells(schedule: Schedule, path: PathSpec, qmap: QualityMap):
    """hop -> (primary (slot, q), {slot: q} of backups)."""
    out = {}
    for hop in range(path.length):
        prim, backs = None, {}
        for e in schedule.entries:
            if e.path == path.id and e.hop == hop:
                q = qmap.q(e.link, e.channel, e.slot)
                if e.kind == PRIMARY:
                    prim = (e.slot, q)
                else:
                    backs[e.slot] = q
        out[hop] = (prim, backs)
    return out


def exact_path_pdr(inst: Instance, schedule: Schedule, qmap: QualityMap,
                   path: PathSpec | str) -> ExactPdrResult:
    """Probability that the packet reaches the sink no later than gen_slot + deadline."""
    path = _checked(inst, schedule, path)
    W = inst.duty_cycle
    last = path.last_slot
    cells = _cells(schedule, path, qmap)

    frontier = {path.gen_slot: 1.0}  # availability slot -> probability mass for the current hop
    states = 0
    for hop in range(path.length):
        (ps, pq), backs = cells[hop]
        nxt: dict[int, float] = defaultdict(float)
        for avail, mass in frontier.items():
            states += 1
            first = avail + (ps - avail) % W
            if first > last:
                continue
            opportunities = [(first, pq)]
            for t in range(first + 1, last + 1):
                s = t % W
                if s == ps:
                    opportunities.append((t, pq))
                elif s in backs:
                    opportunities.append((t, backs[s]))
            survive = mass
            for t, q in opportunities:
                nxt[t + 1] += survive * q
                survive *= 1.0 - q
        frontier = dict(nxt)
    # arrival at the sink happens in the slot of the final success, i.e. avail - 1 <= last
    prob = sum(m for avail, m in frontier.items() if avail - 1 <= last)
    return ExactPdrResult(path.id, prob, states)


def enumerate_path_pdr(inst: Instance, schedule: Schedule, qmap: QualityMap,
                       path: PathSpec | str) -> tuple[float, int]:
    """Sum the probability of every success/failure outcome vector that delivers in time.

    Returns (probability, longest outcome vector length). Cost is
    exponential in the number of attempts; meant for tiny schedules.
    """
    path = _checked(inst, schedule, path)
    W = inst.duty_cycle
    last = path.last_slot
    by_slot = defaultdict(dict)  # hop -> slot-in-cycle -> (kind, q)
    for e in schedule.entries:
        if e.path == path.id:
            by_slot[e.hop][e.slot] = (e.kind, qmap.q(e.link, e.channel, e.slot))

    total = 0.0
    longest = 0
    # each stack item: (slot, hop, failed_before, ready_slot, probability, vector)
    stack = [(path.gen_slot, 0, False, path.gen_slot, 1.0, ())]
    while stack:
        t, hop, failed, ready, prob, vec = stack.pop()
        longest = max(longest, len(vec))
        if hop == path.length:
            total += prob
            continue
        if t > last:
            continue
        cell = by_slot[hop].get(t % W)
        usable = cell is not None and t >= ready and (cell[0] == PRIMARY or failed)
        if not usable:
            stack.append((t + 1, hop, failed, ready, prob, vec))
            continue
        q = cell[1]
        stack.append((t + 1, hop + 1, False, t + 1, prob * q, vec + (1,)))
        stack.append((t + 1, hop, True, ready, prob * (1.0 - q), vec + (0,)))
    return total, longest


def exhaustive_feasible(inst: Instance, qmap: QualityMap | None = None,
                        params: AllocParams = AllocParams(),
                        bound: int = 10**7) -> tuple[bool, Schedule | None]:
    """Backtracking over every conflict-free, ordered, in-window primary assignment.

    Returns (feasible, witness). Raises SearchSpaceExceeded once more than
    ``bound`` partial assignments have been expanded. Quality is ignored.
    """
    graph = build_conflict_graph(inst, params.conflict_rule)
    W, C = inst.duty_cycle, inst.channels
    if any(p.deadline < p.length for p in inst.paths):
        return False, None
    # variables: (path, hop), sink-adjacent hop first within each path
    variables = [(p, hop) for p in sorted(inst.paths, key=lambda p: p.id)
                 for hop in reversed(range(p.length))]
    occupied: dict[tuple[int, int], list[str]] = defaultdict(list)
    times: dict[tuple[str, int], int] = {}
    chosen: list[Entry] = []
    expanded = 0

    def clash(link, cell):
        return any(o == link or o in graph.adjacency[link] for o in occupied[cell])

    def search(i):
        nonlocal expanded
        if i == len(variables):
            return True
        p, hop = variables[i]
        link = p.links[hop]
        hi = p.last_slot if hop == p.length - 1 else times[(p.id, hop + 1)] - 1
        for t in range(p.gen_slot + hop, hi + 1):
            for c in range(C):
                cell = (t % W, c)
                if clash(link, cell):
                    continue
                expanded += 1
                if expanded > bound:
                    raise SearchSpaceExceeded(f"more than {bound} states expanded")
                occupied[cell].append(link)
                times[(p.id, hop)] = t
                chosen.append(Entry(link, cell[0], c, PRIMARY, p.id, hop))
                if search(i + 1):
                    return True
                chosen.pop()
                del times[(p.id, hop)]
                occupied[cell].pop()
        return False

    if search(0):
        return True, Schedule(tuple(chosen))
    return False, None
