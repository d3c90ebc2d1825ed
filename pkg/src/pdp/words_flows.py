"""Reduced words over the terminal alphabet and flows on doubled plane graphs.

A flow assigns a reduced word to every arc; conservation is checked by
cyclically reducing the word read around each vertex.  Homology between
two flows is decided constructively by propagating a face-indexed
witness over the dual graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .plane_graph import Dart, PlaneGraph

# A letter is (terminal name, sign); a reduced word is a tuple of letters.
Letter = Tuple[str, int]
Word = Tuple[Letter, ...]

EMPTY: Word = ()


class UnknownLetter(Exception):
    pass


def word_reduce(raw: Iterable[Letter]) -> Word:
    out: List[Letter] = []
    for name, sign in raw:
        if sign not in (1, -1):
            raise UnknownLetter(f"bad sign {sign!r}")
        if out and out[-1][0] == name and out[-1][1] == -sign:
            out.pop()
        else:
            out.append((name, sign))
    return tuple(out)


def word_product(w: Word, w2: Word) -> Word:
    out = list(w)
    for name, sign in w2:
        if out and out[-1][0] == name and out[-1][1] == -sign:
            out.pop()
        else:
            out.append((name, sign))
    return tuple(out)


def word_inverse(w: Word) -> Word:
    return tuple((name, -sign) for name, sign in reversed(w))


def letter(name: str, sign: int = 1) -> Word:
    return ((name, sign),)


def word_to_str(w: Word) -> str:
    return " ".join(n if s == 1 else f"{n}^-1" for n, s in w)


def word_from_str(s: str, alphabet: Optional[FrozenSet[str]] = None) -> Word:
    out = []
    for tok in s.split():
        if tok.endswith("^-1"):
            name, sign = tok[:-3], -1
        else:
            name, sign = tok, 1
        if alphabet is not None and name not in alphabet:
            raise UnknownLetter(f"letter {name!r} not in alphabet")
        out.append((name, sign))
    return word_reduce(out)


class DirectedPlaneGraph:
    """Doubled orientation of a plane graph: two anti-parallel arcs per edge.

    The two arcs of an edge are embedded side by side with a 2-gon face
    between them, so the result is again a plane (multi)graph whose faces
    carry the homology witnesses.
    """

    def __init__(self, graph: PlaneGraph, arcs: Mapping[str, Tuple[str, str]]):
        self.graph = graph
        self.arcs: Dict[str, Tuple[str, str]] = dict(arcs)

    def tail(self, a: str) -> str:
        return self.arcs[a][0]

    def head(self, a: str) -> str:
        return self.arcs[a][1]

    def _forward_dart(self, a: str) -> Dart:
        return self.graph.dart_from(a, self.tail(a))

    def right_face(self, a: str) -> str:
        return self.graph.dart_face[self._forward_dart(a)]

    def left_face(self, a: str) -> str:
        return self.graph.dart_face[self.graph.reverse(self._forward_dart(a))]

    @property
    def faces(self):
        return self.graph.faces

    @property
    def outer_face(self) -> str:
        return self.graph.outer_face

    def incident_arcs(self, v: str) -> Tuple[str, ...]:
        return self.graph.rotation[v]


def doubled_orientation(g: PlaneGraph) -> DirectedPlaneGraph:
    """Replace every edge {u,v} by arcs u->v and v->u, embedded adjacently."""
    edges: Dict[str, Tuple[str, str]] = {}
    arcs: Dict[str, Tuple[str, str]] = {}
    for e in sorted(g.edges):
        u, w = g.edges[e]
        edges[f"{e}>"] = (u, w)
        edges[f"{e}<"] = (u, w)
        arcs[f"{e}>"] = (u, w)
        arcs[f"{e}<"] = (w, u)
    rotation: Dict[str, List[str]] = {}
    for v in g.vertices:
        rot: List[str] = []
        for e in g.rotation[v]:
            u, _ = g.edges[e]
            if v == u:  # tail of the forward arc: forward strand first
                rot.extend((f"{e}>", f"{e}<"))
            else:
                rot.extend((f"{e}<", f"{e}>"))
        rotation[v] = rot
    dg = PlaneGraph(g.vertices, edges, rotation, outer_face=None,
                    radial_vertices=g.radial_vertices)
    # outer face: track a corner of the old outer face
    from .plane_graph import _outer_corner

    v, e = _outer_corner(g)
    u, _ = g.edges[e]
    last_strand = f"{e}<" if v == u else f"{e}>"
    dg = dg.with_outer(dg.corner_face(v, last_strand))
    return DirectedPlaneGraph(dg, arcs)


Flow = Dict[str, Word]  # arc id -> reduced word; missing arcs carry 1


def flow_value(phi: Flow, arc: str) -> Word:
    return phi.get(arc, EMPTY)


@dataclass(frozen=True)
class FlowViolation:
    vertex: str
    conc: Word
    reason: str


def _conc_letters(d: DirectedPlaneGraph, phi: Flow, v: str) -> List[Tuple[Letter, str]]:
    """Letters of conc(v) with their arcs, clockwise from the lex-least arc."""
    rot = list(d.incident_arcs(v))
    if rot:
        start = rot.index(min(rot))
        rot = rot[start:] + rot[:start]
    out: List[Tuple[Letter, str]] = []
    for a in rot:
        w = flow_value(phi, a)
        if d.head(a) != v:
            w = word_inverse(w)
        for lt in w:
            out.append((lt, a))
    return out


def flow_check(
    d: DirectedPlaneGraph,
    sources: Sequence[str],
    targets: Sequence[str],
    pairing: Mapping[str, str],
    phi: Flow,
) -> Optional[FlowViolation]:
    """Verify word-level conservation; None means the assignment is a flow."""
    src, tgt = set(sources), set(targets)
    for v in sorted(d.graph.vertices):
        letters = _conc_letters(d, phi, v)
        word = word_reduce(lt for lt, _ in letters)
        if v not in src and v not in tgt:
            if word:
                return FlowViolation(v, word, "conc does not reduce to 1")
            continue
        want = pairing[v] if v in src else v
        if not letters:
            return FlowViolation(v, EMPTY, "terminal with empty conc")
        ok = False
        for i in range(len(letters)):
            rot = letters[i:] + letters[:i]
            reduced = word_reduce(lt for lt, _ in rot)
            name, sign = letters[i][0]
            arc = letters[i][1]
            if reduced == (letters[i][0],) and name == want:
                expected = 1 if d.head(arc) == v else -1
                if sign == expected:
                    ok = True
                    break
        if not ok:
            return FlowViolation(v, word, "terminal letter condition fails")
    return None


def flow_of_linkage(d: DirectedPlaneGraph, walks: Sequence) -> Flow:
    """Flow carried by a family of walks, each oriented source -> target.

    Every traversed edge's forward arc gets the single letter naming the
    walk's final vertex.
    """
    if not walks:
        raise ValueError("empty linkage is not sensible")
    phi: Flow = {}
    used = set()
    for walk in walks:
        t = walk.vertices[-1]
        for i, e in enumerate(walk.edges):
            if e in used:
                raise ValueError(f"edge {e!r} carried by two walks")
            used.add(e)
            u = walk.vertices[i]
            arc = f"{e}>" if d.tail(f"{e}>") == u else f"{e}<"
            phi[arc] = letter(t)
    return phi


@dataclass(frozen=True)
class HomologyOutcome:
    witness: Optional[Dict[str, Word]]
    failing_arc: Optional[str] = None

    def __bool__(self) -> bool:
        return self.witness is not None


def homologous(d: DirectedPlaneGraph, phi: Flow, psi: Flow) -> HomologyOutcome:
    """Decide homology by breadth-first witness propagation over the dual.

    h(outer) = 1; crossing an arc forces h on the far side; any
    inconsistent arc refutes.  The returned witness satisfies
    h(left)^-1 * phi(a) * h(right) = psi(a) on every arc.
    """
    h: Dict[str, Word] = {d.outer_face: EMPTY}
    incident: Dict[str, List[str]] = {f: [] for f in d.faces}
    for a in sorted(d.arcs):
        incident[d.left_face(a)].append(a)
        incident[d.right_face(a)].append(a)
    queue = [d.outer_face]
    while queue:
        f = queue.pop(0)
        for a in incident[f]:
            f1, f2 = d.left_face(a), d.right_face(a)
            if f1 in h and f2 not in h:
                h[f2] = word_product(
                    word_product(word_inverse(flow_value(phi, a)), h[f1]),
                    flow_value(psi, a),
                )
                queue.append(f2)
            elif f2 in h and f1 not in h:
                h[f1] = word_product(
                    word_product(flow_value(phi, a), h[f2]),
                    word_inverse(flow_value(psi, a)),
                )
                queue.append(f1)
    for a in sorted(d.arcs):
        f1, f2 = d.left_face(a), d.right_face(a)
        lhs = word_product(word_product(word_inverse(h[f1]), flow_value(phi, a)), h[f2])
        if lhs != flow_value(psi, a):
            return HomologyOutcome(None, a)
    return HomologyOutcome(h)


def verify_witness(d: DirectedPlaneGraph, phi: Flow, psi: Flow, h: Mapping[str, Word]) -> bool:
    """Independent re-check of a homology witness, arc by arc."""
    if h.get(d.outer_face, EMPTY) != EMPTY:
        return False
    for a in d.arcs:
        f1, f2 = d.left_face(a), d.right_face(a)
        lhs = word_product(
            word_product(word_inverse(h.get(f1, EMPTY)), flow_value(phi, a)),
            h.get(f2, EMPTY),
        )
        if lhs != flow_value(psi, a):
            return False
    return True


def forbid_edges_transform(
    d: DirectedPlaneGraph, phi: Flow, forbidden: Iterable[str]
) -> Tuple[DirectedPlaneGraph, Flow]:
    """Split every forbidden arc into two arcs meeting at a fresh sink.

    Solutions of the transformed instance correspond exactly to solutions
    of the original that avoid the forbidden arcs.
    """
    forb = sorted(set(forbidden))
    for a in forb:
        if a not in d.arcs:
            raise KeyError(f"unknown arc {a!r}")
    g = d.graph
    edges = dict(g.edges)
    arcs = dict(d.arcs)
    rotation = {v: list(rot) for v, rot in g.rotation.items()}
    vertices = set(g.vertices)
    phi2: Flow = {a: w for a, w in phi.items() if a not in forb}
    replaced_at: Dict[Tuple[str, str], str] = {}
    fresh = 0
    for a in forb:
        u, v = d.arcs[a]
        while f"@x{fresh}" in vertices:
            fresh += 1
        w = f"@x{fresh}"
        a1, a2 = f"{a}/1", f"{a}/2"
        vertices.add(w)
        del edges[a]
        del arcs[a]
        edges[a1] = (u, w)
        edges[a2] = (v, w)
        arcs[a1] = (u, w)
        arcs[a2] = (v, w)
        rotation[u][rotation[u].index(a)] = a1
        rotation[v][rotation[v].index(a)] = a2
        rotation[w] = [a1, a2]
        replaced_at[(u, a)] = a1
        replaced_at[(v, a)] = a2
        word = flow_value(phi, a)
        if word:
            phi2[a1] = word
            phi2[a2] = word_inverse(word)

    # outer face: re-anchor through a corner, remapping split edges
    from .plane_graph import _outer_corner

    cv, ce = _outer_corner(g)
    oe = replaced_at.get((cv, ce), ce)
    g2 = PlaneGraph(vertices, edges, rotation, outer_face=None,
                    radial_vertices=g.radial_vertices)
    g2 = g2.with_outer(g2.corner_face(cv, oe))
    return DirectedPlaneGraph(g2, arcs), phi2
