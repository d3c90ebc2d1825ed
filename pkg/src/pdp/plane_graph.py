"""Plane multigraphs as combinatorial rotation systems.

A graph is embedded purely combinatorially: every vertex carries the
clockwise cyclic order of its incident edge ids.  Faces are derived by
dart tracing and planarity is certified by Euler's formula.  All values
are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

INF = math.inf

# A dart is (edge_id, end): end 0 traverses u->v, end 1 traverses v->u.
Dart = Tuple[str, int]


class GraphError(Exception):
    pass


class MalformedRotation(GraphError):
    """Rotation tables do not describe a connected multigraph."""


class NonPlanarRotation(GraphError):
    """Face tracing contradicts Euler's formula."""


class NotATree(GraphError):
    pass


@dataclass(frozen=True)
class ParallelClass:
    """One bundle of indexed parallel copies of a base edge.

    Copy 0 keeps the base edge id; copies -2n..2n are ordered in the
    embedding with the extremes outermost.  ``asc_endpoint`` is the
    endpoint whose clockwise rotation reads the indices in ascending
    order (the other endpoint necessarily reads them descending).
    """

    base: str
    copies: Tuple[Tuple[int, str], ...]
    asc_endpoint: str

    def copy(self, index: int) -> str:
        for i, eid in self.copies:
            if i == index:
                return eid
        raise KeyError(index)

    @property
    def half_width(self) -> int:
        return max(i for i, _ in self.copies)

    def indices(self) -> List[int]:
        return [i for i, _ in self.copies]


class PlaneGraph:
    """Immutable plane multigraph with faces derived from rotations."""

    def __init__(
        self,
        vertices: Iterable[str],
        edges: Mapping[str, Tuple[str, str]],
        rotation: Mapping[str, Sequence[str]],
        outer: Optional[Tuple[str, str]] = None,
        outer_face: Optional[str] = None,
        radial_vertices: FrozenSet[str] = frozenset(),
        parallel_classes: Optional[Mapping[str, ParallelClass]] = None,
    ):
        self.vertices = frozenset(vertices)
        self.edges: Dict[str, Tuple[str, str]] = dict(edges)
        self.rotation: Dict[str, Tuple[str, ...]] = {
            v: tuple(rotation.get(v, ())) for v in sorted(self.vertices)
        }
        self.radial_vertices = frozenset(radial_vertices)
        self.parallel_classes: Dict[str, ParallelClass] = dict(parallel_classes or {})
        self.copy_of: Dict[str, Tuple[str, int]] = {}
        for cls in self.parallel_classes.values():
            for idx, eid in cls.copies:
                self.copy_of[eid] = (cls.base, idx)
        self._validate()
        self._rot_pos: Dict[str, Dict[str, int]] = {
            v: {e: i for i, e in enumerate(rot)} for v, rot in self.rotation.items()
        }
        self.faces: Dict[str, Tuple[Dart, ...]] = {}
        self.dart_face: Dict[Dart, str] = {}
        self._trace_faces()
        self._check_euler()
        if outer_face is not None:
            if outer_face not in self.faces:
                raise MalformedRotation(f"unknown outer face {outer_face!r}")
            self.outer_face = outer_face
        elif outer is not None:
            eid, side = outer
            if eid not in self.edges or side not in ("left", "right"):
                raise MalformedRotation(f"bad outer witness {outer!r}")
            self.outer_face = self.dart_face[(eid, 0 if side == "right" else 1)]
        else:
            self.outer_face = min(self.faces)
        self.face_vertices: Dict[str, FrozenSet[str]] = {
            f: frozenset(self.dart_head(d) for d in ds) for f, ds in self.faces.items()
        }
        self._face_ids = sorted(self.faces)
        self._face_index = {f: i for i, f in enumerate(self._face_ids)}

    # -- construction helpers ------------------------------------------------

    def _validate(self) -> None:
        seen: Dict[str, int] = {e: 0 for e in self.edges}
        for v, rot in self.rotation.items():
            if v not in self.vertices:
                raise MalformedRotation(f"rotation for unknown vertex {v!r}")
            if len(set(rot)) != len(rot):
                raise MalformedRotation(f"duplicate edge in rotation of {v!r}")
            for e in rot:
                if e not in self.edges:
                    raise MalformedRotation(f"rotation of {v!r} names unknown edge {e!r}")
                if v not in self.edges[e]:
                    raise MalformedRotation(f"edge {e!r} not incident to {v!r}")
                seen[e] += 1
        for e, count in seen.items():
            u, w = self.edges[e]
            if u == w:
                raise MalformedRotation(f"self-loop {e!r} rejected")
            if u not in self.vertices or w not in self.vertices:
                raise MalformedRotation(f"edge {e!r} has unknown endpoint")
            if count != 2:
                raise MalformedRotation(f"edge {e!r} appears {count} times in rotations")
        if self.vertices and not self._connected():
            raise MalformedRotation("graph is not connected")

    def _connected(self) -> bool:
        start = min(self.vertices)
        seen = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for e in self.rotation[v]:
                w = self.other_end(e, v)
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)

    def _trace_faces(self) -> None:
        darts: List[Dart] = []
        for e in sorted(self.edges):
            darts.append((e, 0))
            darts.append((e, 1))
        count = 0
        for d in darts:
            if d in self.dart_face:
                continue
            fid = f"f{count}"
            count += 1
            cycle: List[Dart] = []
            cur = d
            while cur not in self.dart_face:
                self.dart_face[cur] = fid
                cycle.append(cur)
                cur = self._next_dart(cur)
            if cur != d:
                raise MalformedRotation("face tracing did not close")
            self.faces[fid] = tuple(cycle)

    def _next_dart(self, d: Dart) -> Dart:
        v = self.dart_head(d)
        nxt = self.rot_prev(v, d[0])
        return self.dart_from(nxt, v)

    def _check_euler(self) -> None:
        v, e, f = len(self.vertices), len(self.edges), len(self.faces)
        if v and v - e + f != 2:
            raise NonPlanarRotation(f"Euler check failed: V={v} E={e} F={f}")

    # -- basic accessors -----------------------------------------------------

    def endpoints(self, e: str) -> Tuple[str, str]:
        return self.edges[e]

    def other_end(self, e: str, v: str) -> str:
        u, w = self.edges[e]
        if v == u:
            return w
        if v == w:
            return u
        raise KeyError(f"{v!r} not an endpoint of {e!r}")

    def dart_tail(self, d: Dart) -> str:
        u, w = self.edges[d[0]]
        return u if d[1] == 0 else w

    def dart_head(self, d: Dart) -> str:
        u, w = self.edges[d[0]]
        return w if d[1] == 0 else u

    def dart_from(self, e: str, tail: str) -> Dart:
        u, w = self.edges[e]
        if tail == u:
            return (e, 0)
        if tail == w:
            return (e, 1)
        raise KeyError(f"{tail!r} not an endpoint of {e!r}")

    def reverse(self, d: Dart) -> Dart:
        return (d[0], 1 - d[1])

    def degree(self, v: str) -> int:
        return len(self.rotation[v])

    def neighbors(self, v: str) -> List[str]:
        return [self.other_end(e, v) for e in self.rotation[v]]

    def rot_next(self, v: str, e: str) -> str:
        rot = self.rotation[v]
        return rot[(self._rot_pos[v][e] + 1) % len(rot)]

    def rot_prev(self, v: str, e: str) -> str:
        rot = self.rotation[v]
        return rot[(self._rot_pos[v][e] - 1) % len(rot)]

    def rot_index(self, v: str, e: str) -> int:
        return self._rot_pos[v][e]

    def right_face(self, e: str) -> str:
        return self.dart_face[(e, 0)]

    def left_face(self, e: str) -> str:
        return self.dart_face[(e, 1)]

    def corner_face(self, v: str, e: str) -> str:
        """Face of the corner between e and its clockwise successor at v."""
        nxt = self.rot_next(v, e)
        d = self.dart_from(nxt, self.other_end(nxt, v))
        if self.dart_head(d) != v:
            d = self.reverse(d)
        return self.dart_face[d]

    def base_edge(self, e: str) -> str:
        return self.copy_of[e][0] if e in self.copy_of else e

    def copy_index(self, e: str) -> int:
        return self.copy_of[e][1] if e in self.copy_of else 0

    def with_outer(self, face: str) -> "PlaneGraph":
        return PlaneGraph(
            self.vertices,
            self.edges,
            self.rotation,
            outer_face=face,
            radial_vertices=self.radial_vertices,
            parallel_classes=self.parallel_classes,
        )

    # -- metrics -------------------------------------------------------------

    def dist(self, u: str, v: str) -> float:
        d = self.dist_from([u])
        return d.get(v, INF)

    def dist_from(self, sources: Iterable[str]) -> Dict[str, float]:
        dist: Dict[str, float] = {s: 0 for s in sources}
        frontier = sorted(dist)
        step = 0
        while frontier:
            step += 1
            nxt = []
            for v in frontier:
                for e in self.rotation[v]:
                    w = self.other_end(e, v)
                    if w not in dist:
                        dist[w] = step
                        nxt.append(w)
            frontier = sorted(nxt)
        return dist

    def rdist(self, u: str, v: str) -> float:
        """Radial distance: consecutive sequence vertices share a face."""
        if u == v:
            return 0
        dist = {u: 0}
        frontier = [u]
        step = 0
        while frontier:
            step += 1
            nxt = []
            for x in frontier:
                for w in sorted(self._face_neighbors(x)):
                    if w not in dist:
                        if w == v:
                            return step
                        dist[w] = step
                        nxt.append(w)
            frontier = sorted(nxt)
        return INF

    def _face_neighbors(self, v: str) -> set:
        out = set()
        for e in self.rotation[v]:
            for d in ((e, 0), (e, 1)):
                out.update(self.face_vertices[self.dart_face[d]])
        out.discard(v)
        return out

    # -- regions and enclosure -----------------------------------------------

    def face_regions(self, keep_vertices: FrozenSet[str], keep_edges: FrozenSet[str]) -> Dict[str, int]:
        """Partition faces into the regions cut out by a kept subgraph.

        Two faces land in the same region when they are connected across a
        deleted edge or around a deleted vertex.
        """
        parent = list(range(len(self._face_ids)))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def union(a: int, b: int) -> None:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[rb] = ra

        idx = self._face_index
        for e in self.edges:
            if e not in keep_edges:
                union(idx[self.dart_face[(e, 0)]], idx[self.dart_face[(e, 1)]])
        for v in self.vertices:
            if v not in keep_vertices:
                rot = self.rotation[v]
                if not rot:
                    continue
                first = idx[self.corner_face(v, rot[0])]
                for e in rot[1:]:
                    union(first, idx[self.corner_face(v, e)])
        return {f: find(idx[f]) for f in self._face_ids}

    def cycle_interior_faces(self, cycle_edges: Iterable[str]) -> FrozenSet[str]:
        """Faces strictly enclosed by a cycle (the side away from the outer face)."""
        cyc = frozenset(cycle_edges)
        cache = getattr(self, "_interior_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_interior_cache", cache)
        hit = cache.get((cyc, self.outer_face))
        if hit is not None:
            return hit
        verts = frozenset(v for e in cyc for v in self.edges[e])
        regions = self.face_regions(verts, cyc)
        outer_region = regions[self.outer_face]
        out = frozenset(f for f, r in regions.items() if r != outer_region)
        if len(cache) > 4096:
            cache.clear()
        cache[(cyc, self.outer_face)] = out
        return out

    def edges_strictly_inside(self, cycle_edges: Iterable[str]) -> FrozenSet[str]:
        cyc = frozenset(cycle_edges)
        inside = self.cycle_interior_faces(cyc)
        if not inside:
            return frozenset()
        return frozenset(
            e for e in self.edges
            if e not in cyc and self.dart_face[(e, 0)] in inside
        )

    def cycle_encloses(self, cycle_edges: Iterable[str], targets: Iterable[str]) -> bool:
        """True when every target vertex lies strictly inside the cycle."""
        cyc = frozenset(cycle_edges)
        on_cycle = frozenset(v for e in cyc for v in self.edges[e])
        inside = self.cycle_interior_faces(cyc)
        inside_vertices = set()
        for f in inside:
            inside_vertices.update(self.face_vertices[f])
        inside_vertices -= on_cycle
        return all(t in inside_vertices for t in targets)


def build_plane_graph(
    vertices: Iterable[str],
    edges: Mapping[str, Tuple[str, str]],
    rotation: Mapping[str, Sequence[str]],
    outer: Optional[Tuple[str, str]] = None,
) -> PlaneGraph:
    """Build and certify a plane graph from a rotation description."""
    return PlaneGraph(vertices, edges, rotation, outer=outer)


@dataclass(frozen=True)
class Instance:
    """A routing instance: k source/target pairs on a plane graph."""

    graph: PlaneGraph
    sources: Tuple[str, ...]
    targets: Tuple[str, ...]
    star: Optional[str] = None

    def __post_init__(self):
        if len(self.sources) != len(self.targets):
            raise ValueError("sources and targets differ in length")
        if len(set(self.sources)) != len(self.sources) or len(set(self.targets)) != len(self.targets):
            raise ValueError("terminal lists must not repeat vertices")
        for t in list(self.sources) + list(self.targets):
            if t not in self.graph.vertices:
                raise ValueError(f"terminal {t!r} not in graph")

    @property
    def k(self) -> int:
        return len(self.sources)

    @property
    def pairing(self) -> Dict[str, str]:
        return dict(zip(self.sources, self.targets))

    @property
    def terminals(self) -> FrozenSet[str]:
        return frozenset(self.sources) | frozenset(self.targets)

    def is_nice(self) -> bool:
        if set(self.sources) & set(self.targets):
            return False
        return all(self.graph.degree(t) == 1 for t in self.terminals)


def radial_completion(g: PlaneGraph, outer_anchor: Optional[str] = None) -> PlaneGraph:
    """Add one vertex per face, joined to every corner incidence.

    The result is triangulated (every face a triangle or 2-gon) and keeps
    the original drawing on the old vertices and edges.  The new outer
    face is a corner of the old outer face, at ``outer_anchor`` when given.
    """
    radial_edges: Dict[str, Tuple[str, str]] = {}
    corner_edge: Dict[Tuple[str, str], str] = {}
    spokes: Dict[str, List[str]] = {}
    for fid in sorted(g.faces):
        w = f"@{fid}"
        if w in g.vertices:
            raise MalformedRotation(f"vertex id {w!r} collides with face vertex")
        spokes[w] = []
        for j, d in enumerate(g.faces[fid]):
            # corner at the head of d, between edge(next dart) and edge(d)
            v = g.dart_head(d)
            rid = f"@{fid}.{j}"
            radial_edges[rid] = (v, w)
            nxt = g.faces[fid][(j + 1) % len(g.faces[fid])]
            corner_edge[(v, nxt[0])] = rid  # corner between nxt-edge and its cw successor
            spokes[w].append(rid)

    rotation: Dict[str, List[str]] = {}
    for v in g.vertices:
        rot: List[str] = []
        for e in g.rotation[v]:
            rot.append(e)
            rot.append(corner_edge[(v, e)])
        rotation[v] = rot
    for w, sp in spokes.items():
        rotation[w] = sp

    edges = dict(g.edges)
    edges.update(radial_edges)
    vertices = set(g.vertices) | set(spokes)
    h = PlaneGraph(
        vertices, edges, rotation,
        outer_face=None,
        radial_vertices=g.radial_vertices | frozenset(spokes),
    )
    # outer face of the completion: a corner of the old outer face
    anchor = outer_anchor
    old_outer = g.faces[g.outer_face]
    if anchor is None:
        anchor = min(g.dart_head(d) for d in old_outer)
    spoke = None
    for d in old_outer:
        if g.dart_head(d) == anchor:
            spoke = corner_edge[(anchor, old_outer[(old_outer.index(d) + 1) % len(old_outer)][0])]
            break
    if spoke is None:
        raise GraphError(f"outer anchor {anchor!r} not on the outer face")
    return h.with_outer(h.corner_face(anchor, spoke))


def is_triangulated(g: PlaneGraph) -> bool:
    return all(len(ds) in (2, 3) for ds in g.faces.values())


def enrich_parallel(h: PlaneGraph, n: int, asc_at: Optional[Mapping[str, str]] = None) -> PlaneGraph:
    """Replace every edge by 4n+1 indexed parallel copies.

    Copy 0 keeps the original edge id; indices run -2n..2n with the
    extremes outermost.  ``asc_at`` optionally picks, per base edge, the
    endpoint whose clockwise rotation reads indices ascending (default:
    the lexicographically smaller endpoint).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    m = 2 * n
    classes: Dict[str, ParallelClass] = {}
    edges: Dict[str, Tuple[str, str]] = {}
    blocks_asc: Dict[str, List[str]] = {}
    for e in sorted(h.edges):
        u, w = h.edges[e]
        asc = (asc_at or {}).get(e, min(u, w))
        if asc not in (u, w):
            raise ValueError(f"asc endpoint {asc!r} not on edge {e!r}")
        copies = []
        block = []
        for i in range(-m, m + 1):
            eid = e if i == 0 else f"{e}~{i}"
            copies.append((i, eid))
            block.append(eid)
            edges[eid] = (u, w)
        classes[e] = ParallelClass(e, tuple(copies), asc)
        blocks_asc[e] = block

    rotation: Dict[str, List[str]] = {}
    for v in h.vertices:
        rot: List[str] = []
        for e in h.rotation[v]:
            block = blocks_asc[e]
            rot.extend(block if classes[e].asc_endpoint == v else reversed(block))
        rotation[v] = rot

    enr = PlaneGraph(
        h.vertices, edges, rotation,
        outer_face=None,
        radial_vertices=h.radial_vertices,
        parallel_classes=classes,
    )
    # recover the outer face through a corner of the old one
    v, first_edge = _outer_corner(h)
    blk = blocks_asc[first_edge]
    entry = blk[0] if classes[first_edge].asc_endpoint == v else blk[-1]
    last_of_block = enr.rotation[v][(enr.rot_index(v, entry) + 2 * m) % len(enr.rotation[v])]
    return enr.with_outer(enr.corner_face(v, last_of_block))


def _outer_corner(g: PlaneGraph) -> Tuple[str, str]:
    """A witness corner (vertex, rotation entry) whose corner face is outer."""
    for v in sorted(g.vertices):
        for e in g.rotation[v]:
            if g.corner_face(v, e) == g.outer_face:
                return v, e
    raise GraphError("no corner on the outer face")


def make_nice(inst: Instance) -> Instance:
    """Pendant-ize terminals so each has degree 1, then re-root the outer face.

    Every terminal of degree != 1 (or shared between the two sides) gets a
    fresh degree-1 neighbour that replaces it in the terminal lists.  The
    outer face is re-chosen to touch the lexicographically least target.
    """
    g = inst.graph
    vertices = set(g.vertices)
    edges = dict(g.edges)
    rotation = {v: list(rot) for v, rot in g.rotation.items()}
    shared = set(inst.sources) & set(inst.targets)

    counter = 0

    def pendant(v: str) -> str:
        nonlocal counter
        while f"@n{counter}" in vertices or f"@p{counter}" in edges:
            counter += 1
        nv, ne = f"@n{counter}", f"@p{counter}"
        counter += 1
        vertices.add(nv)
        edges[ne] = (v, nv)
        rotation[v] = rotation[v] + [ne]
        rotation[nv] = [ne]
        return nv

    new_sources = []
    for s in inst.sources:
        if g.degree(s) != 1 or s in shared:
            new_sources.append(pendant(s))
        else:
            new_sources.append(s)
    new_targets = []
    for t in inst.targets:
        if g.degree(t) != 1 or t in shared:
            new_targets.append(pendant(t))
        else:
            new_targets.append(t)

    g2 = PlaneGraph(vertices, edges, rotation, outer_face=None,
                    radial_vertices=g.radial_vertices)
    star = min(new_targets)
    outer = None
    for e in g2.rotation[star]:
        outer = g2.dart_face[(e, 0)]
        break
    if outer is None:
        raise GraphError("target terminal has no incident edge")
    g2 = g2.with_outer(outer)
    return Instance(g2, tuple(new_sources), tuple(new_targets), star=star)
