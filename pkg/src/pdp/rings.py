"""Rings between nested cycles, crossing labels and winding numbers.

A walk's winding number against an oriented reference path is the net
count of side changes its consecutive edge pairs make at the reference's
interior vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .plane_graph import GraphError, PlaneGraph
from .walks import Walk


class EndpointOffInterface(GraphError):
    pass


class SharedEdge(GraphError):
    pass


@dataclass(frozen=True)
class Ring:
    """Region between two nested vertex cycles, with a reference path."""

    graph: PlaneGraph
    inner: Tuple[str, ...]
    outer: Tuple[str, ...]
    eta: Walk
    vertices: FrozenSet[str]

    @staticmethod
    def build(
        g: PlaneGraph,
        inner: Sequence[str],
        outer: Sequence[str],
        eta: Walk,
        vertices: Optional[Set[str]] = None,
    ) -> "Ring":
        if vertices is None:
            from .steiner import _ring_vertices

            vertices = _ring_vertices(g, tuple(inner), tuple(outer))
        return Ring(g, tuple(inner), tuple(outer), eta, frozenset(vertices))


def classify(ring: Ring, walk: Walk) -> str:
    a, b = walk.start, walk.end
    inn, out = set(ring.inner), set(ring.outer)
    if a in inn and b in out or a in out and b in inn:
        return "traversing"
    if a in inn and b in inn:
        return "inner-visitor"
    if a in out and b in out:
        return "outer-visitor"
    raise EndpointOffInterface(f"walk endpoints {a!r},{b!r} not on the interfaces")


def orient(ring: Ring, walk: Walk) -> Walk:
    """Traversers run inner to outer; visitors from their smaller endpoint."""
    kind = classify(ring, walk)
    if kind == "traversing":
        return walk if walk.start in set(ring.inner) else walk.reversed()
    return walk if walk.start <= walk.end else walk.reversed()


def _side_of(g: PlaneGraph, v: str, entry: str, exit_: str, e: str) -> int:
    """+1 when e sits left of the oriented reference corner at v, else -1."""
    rot = g.rotation[v]
    n = len(rot)
    i = g.rot_index(v, entry)
    j = g.rot_index(v, exit_)
    p = g.rot_index(v, e)
    # walk clockwise from entry to exit: positions passed are on the left
    span = (j - i) % n
    rel = (p - i) % n
    return 1 if 0 < rel < span else -1


def label_pairs(
    g: PlaneGraph, walk: Walk, reference: Walk
) -> List[Tuple[Tuple[str, str], int]]:
    """Label every consecutive edge pair of the walk against the reference.

    A pair gets +1 when it switches from the reference's left side to its
    right, -1 for the opposite switch, 0 otherwise.  Only interior
    reference vertices separate sides.
    """
    if set(walk.edges) & set(reference.edges):
        raise SharedEdge("walk shares an edge with the reference")
    interior: Dict[str, Tuple[str, str]] = {}
    for i in range(1, len(reference.vertices) - 1):
        interior[reference.vertices[i]] = (
            reference.edges[i - 1],
            reference.edges[i],
        )
    out: List[Tuple[Tuple[str, str], int]] = []
    for i in range(len(walk.edges) - 1):
        v = walk.vertices[i + 1]
        e, e2 = walk.edges[i], walk.edges[i + 1]
        if v not in interior:
            out.append(((e, e2), 0))
            continue
        entry, exit_ = interior[v]
        s1 = _side_of(g, v, entry, exit_, e)
        s2 = _side_of(g, v, entry, exit_, e2)
        if s1 == 1 and s2 == -1:
            out.append(((e, e2), 1))
        elif s1 == -1 and s2 == 1:
            out.append(((e, e2), -1))
        else:
            out.append(((e, e2), 0))
    return out


def crossing_label(g: PlaneGraph, reference: Walk, v: str, e1: str, e2: str) -> int:
    """Label of a single transition (e1 then e2) at v against the reference."""
    if e1 in set(reference.edges) or e2 in set(reference.edges):
        raise SharedEdge("transition edge lies on the reference")
    for i in range(1, len(reference.vertices) - 1):
        if reference.vertices[i] == v:
            entry, exit_ = reference.edges[i - 1], reference.edges[i]
            s1 = _side_of(g, v, entry, exit_, e1)
            s2 = _side_of(g, v, entry, exit_, e2)
            if s1 == 1 and s2 == -1:
                return 1
            if s1 == -1 and s2 == 1:
                return -1
            return 0
    return 0


def winding_number(g: PlaneGraph, walk: Walk, reference: Walk) -> int:
    """Signed crossing count of an oriented walk over an oriented reference."""
    return sum(lbl for _, lbl in label_pairs(g, walk, reference))


def ring_winding_number(ring: Ring, walk: Walk) -> int:
    return winding_number(ring.graph, orient(ring, walk), ring.eta)


def winding_number_of_linkage(ring: Ring, walks: Sequence[Walk]) -> int:
    """First traversing walk's winding number; zero when none traverses."""
    for w in walks:
        if classify(ring, w) == "traversing":
            return ring_winding_number(ring, w)
    return 0


def restrict_to_ring(ring: Ring, walk: Walk) -> List[Walk]:
    """Maximal subwalks whose vertices stay in the ring region."""
    out: List[Walk] = []
    cur_v: List[str] = []
    cur_e: List[str] = []
    inside = [v in ring.vertices for v in walk.vertices]
    for i, e in enumerate(walk.edges):
        if inside[i] and inside[i + 1]:
            if not cur_v:
                cur_v = [walk.vertices[i]]
            cur_v.append(walk.vertices[i + 1])
            cur_e.append(e)
        else:
            if cur_e:
                out.append(Walk(tuple(cur_v), tuple(cur_e)))
            cur_v, cur_e = [], []
    if cur_e:
        out.append(Walk(tuple(cur_v), tuple(cur_e)))
    return out


def solution_winding(
    g: PlaneGraph,
    ring: Ring,
    reference: Walk,
    walks: Sequence[Walk],
) -> int:
    """Max absolute winding of the walks' ring restrictions w.r.t. a path."""
    best = 0
    for w in walks:
        for piece in restrict_to_ring(ring, w):
            val = abs(winding_number(g, piece, reference))
            best = max(best, val)
    return best
