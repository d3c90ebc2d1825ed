"""Instance generators: grids, annuli, and planted-solution graphs.

All generators are seeded and deterministic; embeddings are produced from
coordinates (clockwise rotations by compass bearing, outer face by signed
area) and then forgotten.
"""

from __future__ import annotations

import math
import random
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .plane_graph import Instance, PlaneGraph


def build_embedded(
    coords: Mapping[str, Tuple[float, float]],
    edge_pairs: Iterable[Tuple[str, str]],
) -> PlaneGraph:
    """Plane graph from straight-line coordinates (must be crossing-free)."""
    edges: Dict[str, Tuple[str, str]] = {}
    incident: Dict[str, List[str]] = {v: [] for v in coords}
    for u, w in edge_pairs:
        eid = f"{u}|{w}" if u < w else f"{w}|{u}"
        if eid in edges:
            continue
        edges[eid] = (u, w) if u < w else (w, u)
        incident[u].append(eid)
        incident[w].append(eid)

    def bearing(v: str, e: str) -> float:
        u, w = edges[e]
        o = w if u == v else u
        dx = coords[o][0] - coords[v][0]
        dy = coords[o][1] - coords[v][1]
        return math.atan2(dx, dy) % (2 * math.pi)

    rotation = {
        v: sorted(incident[v], key=lambda e: (bearing(v, e), e)) for v in coords
    }
    g = PlaneGraph(coords.keys(), edges, rotation, outer_face=None)
    best, area_best = None, -math.inf
    for fid, darts in g.faces.items():
        area = 0.0
        pts = [coords[g.dart_tail(d)] for d in darts]
        for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
            area += x1 * y2 - x2 * y1
        if area > area_best:
            best, area_best = fid, area
    return g.with_outer(best)


def grid_graph(rows: int, cols: int) -> PlaneGraph:
    """rows x cols grid with unit spacing; row 0 on top."""
    coords = {
        f"g{i}.{j}": (float(j), float(-i)) for i in range(rows) for j in range(cols)
    }
    pairs = []
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                pairs.append((f"g{i}.{j}", f"g{i}.{j + 1}"))
            if i + 1 < rows:
                pairs.append((f"g{i}.{j}", f"g{i + 1}.{j}"))
    return build_embedded(coords, pairs)


def grid_instance(rows: int, cols: int, pairs: Sequence[Tuple[str, str]]) -> Instance:
    g = grid_graph(rows, cols)
    return Instance(g, tuple(s for s, _ in pairs), tuple(t for _, t in pairs))


def annulus_coords(
    rings: int, spokes: int, center: Tuple[float, float] = (0.0, 0.0), prefix: str = "a"
) -> Tuple[Dict[str, Tuple[float, float]], List[Tuple[str, str]]]:
    cx, cy = center
    coords: Dict[str, Tuple[float, float]] = {}
    pairs: List[Tuple[str, str]] = []
    for r in range(1, rings + 1):
        for s in range(spokes):
            th = 2 * math.pi * s / spokes
            coords[f"{prefix}{r}.{s}"] = (cx + r * math.cos(th), cy + r * math.sin(th))
    for r in range(1, rings + 1):
        for s in range(spokes):
            pairs.append((f"{prefix}{r}.{s}", f"{prefix}{r}.{(s + 1) % spokes}"))
            if r < rings:
                pairs.append((f"{prefix}{r}.{s}", f"{prefix}{r + 1}.{s}"))
    return coords, pairs


def annulus_graph(rings: int, spokes: int) -> PlaneGraph:
    """Concentric cycles joined by straight spokes; the hub is a face."""
    coords, pairs = annulus_coords(rings, spokes)
    return build_embedded(coords, pairs)


def disk_graph(rings: int, spokes: int, prefix: str = "a") -> Tuple[Dict[str, Tuple[float, float]], List[Tuple[str, str]]]:
    """Annulus plus a hub vertex joined to the innermost cycle."""
    coords, pairs = annulus_coords(rings, spokes, prefix=prefix)
    coords[f"{prefix}c"] = (0.0, 0.0)
    for s in range(spokes):
        pairs.append((f"{prefix}c", f"{prefix}1.{s}"))
    return coords, pairs


def tube_instance(rings: int = 9, spokes: int = 6) -> Instance:
    """Hub-to-apex routing across a disk whose outside is closed by an apex.

    Both ends of the radial route are fat, so both separators of the long
    path come out as honest ring cycles.
    """
    coords, pairs = disk_graph(rings, spokes)
    edges: Dict[str, Tuple[str, str]] = {}
    incident: Dict[str, List[str]] = {v: [] for v in coords}
    for u, w in pairs:
        eid = f"{u}|{w}" if u < w else f"{w}|{u}"
        edges[eid] = (u, w) if u < w else (w, u)
        incident[u].append(eid)
        incident[w].append(eid)

    def bearing(v: str, e: str) -> float:
        u, w = edges[e]
        o = w if u == v else u
        dx = coords[o][0] - coords[v][0]
        dy = coords[o][1] - coords[v][1]
        return math.atan2(dx, dy) % (2 * math.pi)

    rotation = {
        v: sorted(incident[v], key=lambda e: (bearing(v, e), e)) for v in coords
    }
    # apex vertex beyond the outer ring, joined to every outer-ring vertex
    apex = "o"
    rotation[apex] = []
    for s in range(spokes):
        v = f"a{rings}.{s}"
        eid = f"o|{v}"
        edges[eid] = (apex, v)
        rotation[apex].append(eid)
        # radially outward at v: insert by bearing of the outward direction
        th = 2 * math.pi * s / spokes
        out_b = math.atan2(math.cos(th), math.sin(th)) % (2 * math.pi)
        rot = rotation[v]
        pos = 0
        while pos < len(rot) and bearing(v, rot[pos]) < out_b:
            pos += 1
        rotation[v] = rot[:pos] + [eid] + rot[pos:]
    vertices = list(coords) + [apex]
    g = PlaneGraph(vertices, edges, rotation, outer_face=None)
    # root the outer face at the apex
    g = g.with_outer(g.dart_face[(f"o|a{rings}.0", 0)])
    return Instance(g, ("ac",), (apex,))


def deep_tunnel_instance(rings: int = 9, spokes: int = 6) -> Instance:
    """One terminal at the hub of a disk, the other outside it.

    The unique tree route runs radially through every ring, so with relaxed
    thresholds it is a long degree-2 path with a genuine ring around it.
    """
    coords, pairs = disk_graph(rings, spokes)
    out = (float(rings + 2), 0.0)
    coords["out"] = out
    pairs.append(("out", f"a{rings}.0"))
    g = build_embedded(coords, pairs)
    return Instance(g, ("ac",), ("out",))


def twin_tunnel_instance(rings: int = 9, spokes: int = 6) -> Instance:
    """Two disks bridged through a middle vertex; both radial routes are long."""
    ca, pa = disk_graph(rings, spokes, prefix="a")
    cb, pb = disk_graph(rings, spokes, prefix="b")
    shift = 2.0 * (rings + 4)
    coords = dict(ca)
    coords.update({v: (x + shift, y) for v, (x, y) in cb.items()})
    pairs = list(pa) + list(pb)
    coords["mid"] = (shift / 2.0, 0.0)
    coords["mt0"] = (shift / 2.0, 1.0)
    coords["mt1"] = (shift / 2.0, -1.0)
    pairs.append((f"a{rings}.0", "mid"))
    pairs.append(("mid", f"b{rings}.{spokes // 2}"))
    pairs.append(("mid", "mt0"))
    pairs.append(("mid", "mt1"))
    g = build_embedded(coords, pairs)
    return Instance(g, ("ac", "bc"), ("mt0", "mt1"))


def random_planted_instance(
    rows: int, cols: int, k: int, rng: random.Random
) -> Tuple[Instance, List[Tuple[str, ...]]]:
    """Grid instance that is feasible by construction, with its witness."""
    g = grid_graph(rows, cols)
    for _ in range(200):
        used: Set[str] = set()
        paths: List[Tuple[str, ...]] = []
        ok = True
        for _ in range(k):
            path = _random_path(g, used, rng)
            if path is None:
                ok = False
                break
            used.update(path)
            paths.append(path)
        if ok:
            sources = tuple(p[0] for p in paths)
            targets = tuple(p[-1] for p in paths)
            return Instance(g, sources, targets), paths
    raise RuntimeError("failed to plant disjoint paths")


def _random_path(g: PlaneGraph, used: Set[str], rng: random.Random) -> Optional[Tuple[str, ...]]:
    free = sorted(g.vertices - used)
    if not free:
        return None
    start = rng.choice(free)
    path = [start]
    seen = {start} | used
    length = rng.randint(1, max(2, len(free) // 3))
    for _ in range(length):
        options = [w for w in g.neighbors(path[-1]) if w not in seen]
        if not options:
            break
        nxt = rng.choice(sorted(options))
        path.append(nxt)
        seen.add(nxt)
    if len(path) < 2:
        return None
    return tuple(path)


def all_terminal_placements(g: PlaneGraph, k: int) -> Iterable[Tuple[Tuple[str, ...], Tuple[str, ...]]]:
    """Every ordered placement of 2k distinct terminals on the graph."""
    import itertools

    verts = sorted(g.vertices)
    for combo in itertools.permutations(verts, 2 * k):
        sources = combo[0::2]
        targets = combo[1::2]
        yield tuple(sources), tuple(targets)
