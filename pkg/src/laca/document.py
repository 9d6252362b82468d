"""Line-oriented instance documents.

::

    duty_cycle 5
    channels 2
    alpha 0.5
    t_q auto
    max_backups 1
    sink G
    node A
    link A-D A D
    path p6 source A links A-D,D-E,E-G gen 0 deadline 3
    conflict A-D F-G
    quality_default 0.9
    quality A-D 0 1 0.75

``#`` starts a comment. ``conflict_rule shared-endpoint|explicit-only`` is
also accepted. Later ``quality`` lines for the same cell win.
"""
from __future__ import annotations

from dataclasses import dataclass

from .allocator import AllocParams
from .linkquality import QualityMap
from .model import CONFLICT_RULES, SHARED_ENDPOINT, Instance, LinkSpec, PathSpec, validate_instance


class DocumentError(ValueError):
    def __init__(self, lineno: int, msg: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)


@dataclass(frozen=True)
class Document:
    instance: Instance
    quality: QualityMap
    params: AllocParams


def _num(tok: str, kind, lineno: int, what: str):
    try:
        return kind(tok)
    except ValueError:
        raise DocumentError(lineno, f"{what} must be {'an integer' if kind is int else 'a number'}, got {tok!r}") from None


def _unit(tok: str, lineno: int, what: str) -> float:
    x = _num(tok, float, lineno, what)
    if not 0.0 <= x <= 1.0:
        raise DocumentError(lineno, f"{what} {x} out of range [0, 1]")
    return x


def parse_instance(text: str) -> Document:
    scalars: dict[str, tuple[int, object]] = {}
    nodes: list[str] = []
    links: list[LinkSpec] = []
    paths: list[PathSpec] = []
    conflicts: list[tuple[str, str]] = []
    quality: list[tuple[int, str, int, int, float]] = []

    def arity(args, n, lineno, key):
        if len(args) != n:
            raise DocumentError(lineno, f"'{key}' takes {n} argument(s), got {len(args)}")

    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        key, args = toks[0], toks[1:]
        if key in ("duty_cycle", "channels", "max_backups"):
            arity(args, 1, lineno, key)
            v = _num(args[0], int, lineno, key)
            if v < (0 if key == "max_backups" else 1):
                raise DocumentError(lineno, f"{key} {v} out of range")
            scalars[key] = (lineno, v)
        elif key in ("alpha", "quality_default"):
            arity(args, 1, lineno, key)
            scalars[key] = (lineno, _unit(args[0], lineno, key))
        elif key == "t_q":
            arity(args, 1, lineno, key)
            scalars[key] = (lineno, "auto" if args[0] == "auto" else _unit(args[0], lineno, key))
        elif key == "conflict_rule":
            arity(args, 1, lineno, key)
            if args[0] not in CONFLICT_RULES:
                raise DocumentError(lineno, f"conflict_rule must be one of {', '.join(CONFLICT_RULES)}")
            scalars[key] = (lineno, args[0])
        elif key == "sink":
            arity(args, 1, lineno, key)
            scalars[key] = (lineno, args[0])
        elif key == "node":
            arity(args, 1, lineno, key)
            nodes.append(args[0])
        elif key == "link":
            arity(args, 3, lineno, key)
            links.append(LinkSpec(*args))
        elif key == "path":
            # path ID source NODE links L1,L2 gen G deadline DL
            if len(args) != 9 or [args[1], args[3], args[5], args[7]] != ["source", "links", "gen", "deadline"]:
                raise DocumentError(lineno, "expected 'path ID source NODE links L1,... gen G deadline DL'")
            hops = tuple(x for x in args[4].split(",") if x)
            paths.append(PathSpec(args[0], args[2], hops,
                                  _num(args[6], int, lineno, "gen"), _num(args[8], int, lineno, "deadline")))
        elif key == "conflict":
            arity(args, 2, lineno, key)
            conflicts.append((args[0], args[1]))
        elif key == "quality":
            arity(args, 4, lineno, key)
            quality.append((lineno, args[0], _num(args[1], int, lineno, "channel"),
                            _num(args[2], int, lineno, "slot"), _unit(args[3], lineno, "quality")))
        else:
            raise DocumentError(lineno, f"unknown keyword {key!r}")

    for req in ("duty_cycle", "channels", "sink"):
        if req not in scalars:
            raise DocumentError(0, f"missing required '{req}' line")
    get = lambda k, d=None: scalars[k][1] if k in scalars else d
    inst = validate_instance(Instance(
        nodes=frozenset(nodes),
        links=tuple(links),
        paths=tuple(paths),
        sink=get("sink"),
        duty_cycle=get("duty_cycle"),
        channels=get("channels"),
        extra_conflicts=tuple(conflicts),
    ))
    qmap = QualityMap.for_instance(inst, get("quality_default", 1.0))
    for lineno, link, ch, slot, q in quality:
        try:
            qmap.set(link, ch, slot, q)
        except (KeyError, IndexError) as e:
            raise DocumentError(lineno, str(e).strip("'\"")) from None
    params = AllocParams(
        alpha=get("alpha", 0.5),
        t_q=get("t_q", "auto"),
        max_backups_per_link=get("max_backups", 1),
        conflict_rule=get("conflict_rule", SHARED_ENDPOINT),
    )
    return Document(inst, qmap, params)


def serialize_instance(doc: Document) -> str:
    inst, qmap, params = doc.instance, doc.quality, doc.params
    lines = [
        f"duty_cycle {inst.duty_cycle}",
        f"channels {inst.channels}",
        f"alpha {params.alpha!r}",
        f"t_q {params.t_q if params.t_q == 'auto' else repr(float(params.t_q))}",
        f"max_backups {params.max_backups_per_link}",
        f"conflict_rule {params.conflict_rule}",
        f"sink {inst.sink}",
    ]
    lines += [f"node {n}" for n in sorted(inst.nodes)]
    lines += [f"link {l.id} {l.src} {l.dst}" for l in inst.links]
    lines += [f"path {p.id} source {p.source} links {','.join(p.links)} gen {p.gen_slot} deadline {p.deadline}"
              for p in inst.paths]
    lines += [f"conflict {a} {b}" for a, b in inst.extra_conflicts]
    lines.append(f"quality_default {qmap.default!r}")
    lines += [quality_line(link, c, s, q) for link, c, s, q in qmap.cells() if q != qmap.default]
    return "\n".join(lines) + "\n"


def quality_line(link: str, channel: int, slot: int, q: float) -> str:
    return f"quality {link} {channel} {slot} {q!r}"
