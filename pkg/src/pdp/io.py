"""Line-oriented text and JSON graph formats.

Both carry the same schema and are round-trippable bit-exactly once
canonicalized: vertices, edges and rotations in sorted order, outer face
as an edge/side witness, terminal pairs in instance order.
"""

from __future__ import annotations

import json
from typing import Dict, List, Tuple

from .plane_graph import Instance, PlaneGraph


class FormatError(Exception):
    pass


def _outer_witness(g: PlaneGraph) -> Tuple[str, str]:
    darts = sorted(g.faces[g.outer_face])
    e, end = darts[0]
    return e, "right" if end == 0 else "left"


def emit_text(inst: Instance) -> str:
    g = inst.graph
    lines: List[str] = []
    for v in sorted(g.vertices):
        lines.append(f"V {v}")
    for e in sorted(g.edges):
        u, w = g.edges[e]
        lines.append(f"E {e} {u} {w}")
    for v in sorted(g.vertices):
        rot = " ".join(g.rotation[v])
        lines.append(f"R {v}: {rot}".rstrip())
    e, side = _outer_witness(g)
    lines.append(f"OUTER {e} {side}")
    for s, t in zip(inst.sources, inst.targets):
        lines.append(f"PAIR {s} {t}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> Instance:
    vertices: List[str] = []
    edges: Dict[str, Tuple[str, str]] = {}
    rotation: Dict[str, List[str]] = {}
    outer = None
    pairs: List[Tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "V" and len(parts) == 2:
            vertices.append(parts[1])
        elif kind == "E" and len(parts) == 4:
            if parts[1] in edges:
                raise FormatError(f"line {lineno}: duplicate edge {parts[1]!r}")
            edges[parts[1]] = (parts[2], parts[3])
        elif kind == "R" and len(parts) >= 2 and parts[1].endswith(":"):
            rotation[parts[1][:-1]] = parts[2:]
        elif kind == "OUTER" and len(parts) == 3:
            if parts[2] not in ("left", "right"):
                raise FormatError(f"line {lineno}: bad side {parts[2]!r}")
            outer = (parts[1], parts[2])
        elif kind == "PAIR" and len(parts) == 3:
            pairs.append((parts[1], parts[2]))
        else:
            raise FormatError(f"line {lineno}: cannot parse {raw!r}")
    g = PlaneGraph(vertices, edges, rotation, outer=outer)
    sources = tuple(s for s, _ in pairs)
    targets = tuple(t for _, t in pairs)
    return Instance(g, sources, targets)


def emit_json(inst: Instance) -> str:
    g = inst.graph
    e, side = _outer_witness(g)
    doc = {
        "vertices": sorted(g.vertices),
        "edges": [[eid, *g.edges[eid]] for eid in sorted(g.edges)],
        "rotation": {v: list(g.rotation[v]) for v in sorted(g.vertices)},
        "outer": [e, side],
        "pairs": [[s, t] for s, t in zip(inst.sources, inst.targets)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_json(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(str(exc)) from exc
    g = PlaneGraph(
        doc["vertices"],
        {e: (u, w) for e, u, w in doc["edges"]},
        doc["rotation"],
        outer=tuple(doc["outer"]) if doc.get("outer") else None,
    )
    pairs = doc.get("pairs", [])
    return Instance(g, tuple(s for s, _ in pairs), tuple(t for _, t in pairs))


def load_instance(text: str) -> Instance:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return parse_json(text)
    return parse_text(text)
