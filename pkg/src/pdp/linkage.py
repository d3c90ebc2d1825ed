"""Weak linkages and their constructive simplification.

Families of edge-disjoint non-crossing walks are transformed by face and
cycle operations; against a backbone tree they decompose into sequences,
segments and segment groups, and the pipeline pushes them onto parallel
copies of the tree, removes bounces and side-flips, and normalizes which
copies are used.  Every stage strictly drives its declared measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .embedding import TreeEmbedding
from .plane_graph import GraphError, PlaneGraph
from .rings import label_pairs
from .walks import Walk


class LinkageError(GraphError):
    pass


class NotApplicable(LinkageError):
    pass


class PreconditionViolation(LinkageError):
    pass


class ZeroCopyUsed(LinkageError):
    pass


class MultiplicityTooHigh(LinkageError):
    pass


@dataclass(frozen=True)
class WeakLinkage:
    walks: Tuple[Walk, ...]

    def edge_set(self) -> FrozenSet[str]:
        out: Set[str] = set()
        for w in self.walks:
            out.update(w.edges)
        return frozenset(out)

    def replace(self, wi: int, walk: Walk) -> "WeakLinkage":
        ws = list(self.walks)
        ws[wi] = walk
        return WeakLinkage(tuple(ws))

    def __len__(self) -> int:
        return len(self.walks)


Crossing = Tuple[str, str, str, str, str]  # vertex, e, ê, e', ê'


def _transitions(linkage: WeakLinkage) -> Dict[str, List[Tuple[int, int, str, str]]]:
    """Per vertex: (walk index, position, entering edge, leaving edge)."""
    out: Dict[str, List[Tuple[int, int, str, str]]] = {}
    for wi, w in enumerate(linkage.walks):
        for i in range(len(w.edges) - 1):
            v = w.vertices[i + 1]
            out.setdefault(v, []).append((wi, i, w.edges[i], w.edges[i + 1]))
    return out


def _interleaves(g: PlaneGraph, v: str, pair1: Tuple[str, str], pair2: Tuple[str, str]) -> bool:
    rot_pos = g.rot_index
    n = len(g.rotation[v])
    a, b = rot_pos(v, pair1[0]), rot_pos(v, pair1[1])
    span = (b - a) % n
    inside = 0
    for e in pair2:
        if 0 < (rot_pos(v, e) - a) % n < span:
            inside += 1
    return inside == 1


def detect_crossings(g: PlaneGraph, linkage: WeakLinkage) -> List[Crossing]:
    """All rotation-order violations, plus repeated edges as self-crossings."""
    out: List[Crossing] = []
    seen_edges: Dict[str, int] = {}
    for wi, w in enumerate(linkage.walks):
        for e in w.edges:
            if e in seen_edges:
                out.append((w.vertices[0], e, e, e, e))
            seen_edges[e] = wi
    trans = _transitions(linkage)
    for v in sorted(trans):
        items = trans[v]
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                _, _, e1, e2 = items[i]
                _, _, f1, f2 = items[j]
                if len({e1, e2, f1, f2}) < 4:
                    continue
                if _interleaves(g, v, (e1, e2), (f1, f2)):
                    out.append((v, e1, e2, f1, f2))
    return out


def assert_weak_linkage(g: PlaneGraph, linkage: WeakLinkage) -> None:
    bad = detect_crossings(g, linkage)
    if bad:
        raise LinkageError(f"not a weak linkage: {bad[0]}")


def is_sensible(linkage: WeakLinkage, pairs: Sequence[Tuple[str, str]]) -> bool:
    if len(linkage.walks) != len(pairs):
        return False
    return all(
        w.start == s and w.end == t for w, (s, t) in zip(linkage.walks, pairs)
    )


def multiplicity(g: PlaneGraph, linkage: WeakLinkage) -> int:
    per: Dict[str, int] = {}
    for e in linkage.edge_set():
        b = g.base_edge(e)
        per[b] = per.get(b, 0) + 1
    return max(per.values(), default=0)


def is_pushed(frame: TreeEmbedding, linkage: WeakLinkage) -> bool:
    g = frame.graph
    for e in linkage.edge_set():
        if e in frame.tree_edges:
            return False
        if g.base_edge(e) not in frame.tree_edges:
            return False
    return True


def is_outer_terminal(frame: TreeEmbedding, linkage: WeakLinkage) -> bool:
    star = frame.star
    count = 0
    for w in linkage.walks:
        for i, e in enumerate(w.edges):
            if star in (w.vertices[i], w.vertices[i + 1]):
                count += 1
    return count == 1


# -- discrete homotopy operations ---------------------------------------------


def _face_cycle_edges(g: PlaneGraph, fid: str) -> List[str]:
    darts = g.faces[fid]
    edges = [d[0] for d in darts]
    if len(set(edges)) != len(edges):
        raise NotApplicable(f"face {fid!r} boundary is not a cycle")
    return edges


def _cycle_complement(
    g: PlaneGraph, cycle: Sequence[str], used: Sequence[str], x: str, y: str
) -> Walk:
    """Path from x to y along the cycle avoiding the used edges."""
    rest = [e for e in cycle if e not in set(used)]
    adj: Dict[str, List[str]] = {}
    for e in rest:
        u, w = g.edges[e]
        adj.setdefault(u, []).append(e)
        adj.setdefault(w, []).append(e)
    verts = [x]
    edges: List[str] = []
    prev_edge = None
    while verts[-1] != y or (x == y and not edges):
        options = [e for e in adj.get(verts[-1], ()) if e != prev_edge and e not in edges]
        if not options:
            raise NotApplicable("cycle complement is not a path")
        e = options[0]
        edges.append(e)
        verts.append(g.other_end(e, verts[-1]))
        prev_edge = e
    return Walk(tuple(verts), tuple(edges))


def _move_on_cycle(
    g: PlaneGraph,
    linkage: WeakLinkage,
    wi: int,
    cycle: Sequence[str],
    need_empty_interior: bool,
    validate: bool = True,
) -> WeakLinkage:
    cyc = list(cycle)
    cyc_set = set(cyc)
    w = linkage.walks[wi]
    positions = [i for i, e in enumerate(w.edges) if e in cyc_set]
    if not positions:
        raise NotApplicable("walk does not touch the cycle")
    lo, hi = positions[0], positions[-1] + 1
    if positions != list(range(lo, hi)):
        raise NotApplicable("cycle edges are not contiguous in the walk")
    if hi - lo >= len(cyc):
        raise NotApplicable("walk covers the whole cycle; use a pull")
    for oi, other in enumerate(linkage.walks):
        extra = (set(other.edges) & cyc_set) - set(w.edges[lo:hi])
        if extra:
            raise NotApplicable(f"cycle edge {sorted(extra)[0]!r} used by walk {oi}")
    if need_empty_interior:
        inside = g.edges_strictly_inside(cyc)
        hit = inside & linkage.edge_set()
        if hit:
            raise NotApplicable(f"edge {sorted(hit)[0]!r} drawn inside the cycle")
    x, y = w.vertices[lo], w.vertices[hi]
    comp = _cycle_complement(g, cyc, w.edges[lo:hi], x, y)
    new_vertices = w.vertices[:lo] + comp.vertices + w.vertices[hi + 1:]
    new_edges = w.edges[:lo] + comp.edges + w.edges[hi:]
    out = linkage.replace(wi, Walk(new_vertices, new_edges))
    if validate:
        assert_weak_linkage(g, out)
    return out


def _pull_on_cycle(
    g: PlaneGraph,
    linkage: WeakLinkage,
    wi: int,
    cycle: Sequence[str],
    need_empty_interior: bool,
    validate: bool = True,
) -> WeakLinkage:
    cyc_set = set(cycle)
    w = linkage.walks[wi]
    positions = [i for i, e in enumerate(w.edges) if e in cyc_set]
    if len(positions) != len(cyc_set) or not positions:
        raise NotApplicable("cycle does not occur as a subwalk")
    lo, hi = positions[0], positions[-1] + 1
    if positions != list(range(lo, hi)) or w.vertices[lo] != w.vertices[hi]:
        raise NotApplicable("cycle is not a closed subwalk of the walk")
    for oi, other in enumerate(linkage.walks):
        if oi != wi and set(other.edges) & cyc_set:
            raise NotApplicable("cycle edge used by another walk")
    if need_empty_interior:
        inside = g.edges_strictly_inside(cycle)
        hit = inside & linkage.edge_set()
        if hit:
            raise NotApplicable(f"edge {sorted(hit)[0]!r} drawn inside the cycle")
    new_vertices = w.vertices[:lo + 1] + w.vertices[hi + 1:]
    new_edges = w.edges[:lo] + w.edges[hi:]
    out = linkage.replace(wi, Walk(new_vertices, new_edges))
    if validate:
        assert_weak_linkage(g, out)
    return out


def face_move(g: PlaneGraph, linkage: WeakLinkage, wi: int, fid: str) -> WeakLinkage:
    if fid == g.outer_face:
        raise NotApplicable("outer face excluded")
    return _move_on_cycle(g, linkage, wi, _face_cycle_edges(g, fid), False)


def face_pull(g: PlaneGraph, linkage: WeakLinkage, wi: int, fid: str) -> WeakLinkage:
    if fid == g.outer_face:
        raise NotApplicable("outer face excluded")
    return _pull_on_cycle(g, linkage, wi, _face_cycle_edges(g, fid), False)


def cycle_move(g: PlaneGraph, linkage: WeakLinkage, wi: int, cycle: Sequence[str]) -> WeakLinkage:
    return _move_on_cycle(g, linkage, wi, cycle, True)


def cycle_pull(g: PlaneGraph, linkage: WeakLinkage, wi: int, cycle: Sequence[str]) -> WeakLinkage:
    return _pull_on_cycle(g, linkage, wi, cycle, True)


def face_push(
    g: PlaneGraph, linkage: WeakLinkage, wi: int, fid: str, pos: int
) -> WeakLinkage:
    """Insert a traversal of the face at the walk's pos-th interior vertex."""
    if fid == g.outer_face:
        raise NotApplicable("outer face excluded")
    cyc = _face_cycle_edges(g, fid)
    cyc_set = set(cyc)
    if cyc_set & linkage.edge_set():
        raise NotApplicable("face edge already used")
    w = linkage.walks[wi]
    if not (1 <= pos <= len(w.edges) - 1):
        raise NotApplicable("position is not an interior visit")
    v = w.vertices[pos]
    e, e2 = w.edges[pos - 1], w.edges[pos]
    at_v = [c for c in cyc if v in g.edges[c]]
    if len(at_v) != 2:
        raise NotApplicable("vertex not on the face boundary")
    rot = g.rotation[v]
    n = len(rot)

    def window(direction: int) -> Optional[List[str]]:
        i = g.rot_index(v, e)
        seq = []
        p = (i + direction) % n
        while rot[p] != e2:
            seq.append(rot[p])
            p = (p + direction) % n
            if len(seq) > n:
                return None
        return seq

    chosen = None
    for direction in (1, -1):
        seq = window(direction)
        if seq is None or not all(c in seq for c in at_v):
            continue
        first = min(seq.index(at_v[0]), seq.index(at_v[1]))
        last = max(seq.index(at_v[0]), seq.index(at_v[1]))
        ok = True
        for _, _, f1, f2 in _transitions(linkage).get(v, ()):  # includes walk wi
            if {f1, f2} == {e, e2}:
                continue
            sides = []
            for f in (f1, f2):
                if f in seq:
                    sides.append("pre" if seq.index(f) < first else
                                 "post" if seq.index(f) > last else "mid")
            if "pre" in sides and "post" in sides:
                ok = False
        if ok:
            chosen = seq[first]
            break
    if chosen is None:
        raise NotApplicable("no enumeration isolates the face corner")
    # traverse the face from v starting with the chosen edge
    verts = [v]
    edges: List[str] = []
    cur = chosen
    while True:
        edges.append(cur)
        verts.append(g.other_end(cur, verts[-1]))
        if verts[-1] == v:
            break
        nxt = [c for c in cyc if c != cur and verts[-1] in g.edges[c]]
        cur = nxt[0]
    new_vertices = w.vertices[:pos] + tuple(verts) + w.vertices[pos + 1:]
    new_edges = w.edges[:pos] + tuple(edges) + w.edges[pos:]
    out = linkage.replace(wi, Walk(new_vertices, new_edges))
    assert_weak_linkage(g, out)
    return out


# -- sequences, segments, groups, potential -----------------------------------


@dataclass(frozen=True)
class Span:
    """Half-open edge range [lo, hi) of one walk."""

    wi: int
    lo: int
    hi: int

    def edges(self, linkage: WeakLinkage) -> Tuple[str, ...]:
        return linkage.walks[self.wi].edges[self.lo:self.hi]

    def endpoints(self, linkage: WeakLinkage) -> Tuple[str, str]:
        w = linkage.walks[self.wi]
        return w.vertices[self.lo], w.vertices[self.hi]


@dataclass
class Segmentation:
    segments: List[Span]
    groups: List[List[Span]]
    hosts: List[Optional[int]]  # group -> index of its degree-2 path, if any


def check_no_zero_copies(frame: TreeEmbedding, linkage: WeakLinkage) -> None:
    used = linkage.edge_set() & frame.tree_edges
    if used:
        raise ZeroCopyUsed(f"walk uses tree edge {sorted(used)[0]!r}")


def sequences(frame: TreeEmbedding, linkage: WeakLinkage) -> List[Span]:
    """Maximal off-tree subwalks containing a non-parallel edge."""
    check_no_zero_copies(frame, linkage)
    on_tree = frame.tree.vertices
    out: List[Span] = []
    for wi, w in enumerate(linkage.walks):
        lo = 0
        for i in range(1, len(w.vertices)):
            if w.vertices[i] in on_tree or i == len(w.vertices) - 1:
                span = Span(wi, lo, i)
                if any(not frame.is_tree_parallel(e) for e in span.edges(linkage)):
                    out.append(span)
                lo = i
    return out


def is_well_behaved(frame: TreeEmbedding, linkage: WeakLinkage) -> bool:
    for span in sequences(frame, linkage):
        w = linkage.walks[span.wi]
        inner = w.vertices[span.lo:span.hi + 1]
        if inner[0] == inner[-1]:
            inner = inner[:-1]
        if len(set(inner)) != len(inner):
            return False
    return True


def projecting_cycle(frame: TreeEmbedding, linkage: WeakLinkage, span: Span) -> List[str]:
    w = linkage.walks[span.wi]
    x, y = w.vertices[span.lo], w.vertices[span.hi]
    edges = list(w.edges[span.lo:span.hi])
    if x != y:
        tree_path = frame.tree.path(y, x)
        edges.extend(frame.tree.path_edges(tree_path))
    return edges


def volume(frame: TreeEmbedding, linkage: WeakLinkage, span: Span) -> int:
    return len(frame.graph.cycle_interior_faces(projecting_cycle(frame, linkage, span)))


def _is_tree_crossing(frame: TreeEmbedding, v: str, e1: str, e2: str) -> bool:
    """Does the transition e1,e2 at v cross the tree locally?"""
    if v not in frame.tree.vertices:
        return False
    spokes = list(frame.tree.adj.get(v, ()))
    if len(spokes) < 2:
        return False
    g = frame.graph
    n = len(g.rotation[v])
    a = g.rot_index(v, e1)
    span = (g.rot_index(v, e2) - a) % n
    ins = sum(1 for r in spokes if 0 < (g.rot_index(v, r) - a) % n < span)
    return 0 < ins < len(spokes)


def segments(frame: TreeEmbedding, linkage: WeakLinkage) -> Segmentation:
    """Split walks at tree crossings and group segments by host path."""
    check_no_zero_copies(frame, linkage)
    segs: List[Span] = []
    for wi, w in enumerate(linkage.walks):
        lo = 0
        for i in range(len(w.edges) - 1):
            if _is_tree_crossing(frame, w.vertices[i + 1], w.edges[i], w.edges[i + 1]):
                segs.append(Span(wi, lo, i + 1))
                lo = i + 1
        if len(w.edges):
            segs.append(Span(wi, lo, len(w.edges)))

    paths = frame.deg2_paths()
    interior_of: Dict[str, int] = {}
    for pi, p in enumerate(paths):
        for v in p[1:-1]:
            interior_of[v] = pi

    def host(span: Span) -> Optional[int]:
        a, b = span.endpoints(linkage)
        pa, pb = interior_of.get(a), interior_of.get(b)
        if pa is not None and pa == pb:
            return pa
        return None

    groups: List[List[Span]] = []
    hosts: List[Optional[int]] = []
    i = 0
    while i < len(segs):
        h = host(segs[i])
        if h is None:
            groups.append([segs[i]])
            hosts.append(None)
            i += 1
            continue
        j = i
        while (
            j + 1 < len(segs)
            and segs[j + 1].wi == segs[i].wi
            and host(segs[j + 1]) == h
        ):
            j += 1
        groups.append(segs[i:j + 1])
        hosts.append(h)
        i = j + 1
    return Segmentation(segs, groups, hosts)


def _path_walk(frame: TreeEmbedding, pi: int) -> Walk:
    p = frame.deg2_paths()[pi]
    if p[0] > p[-1]:
        p = list(reversed(p))
    return Walk(tuple(p), tuple(frame.tree.path_edges(p)))


def group_potential(frame: TreeEmbedding, linkage: WeakLinkage, group: List[Span], host: Optional[int]) -> int:
    if len(group) == 1:
        return 1
    w = linkage.walks[group[0].wi]
    lo = group[0].lo
    hi = group[-1].hi
    lo_ext = max(0, lo - 1)
    hi_ext = min(len(w.edges), hi + 1)
    piece = Walk(w.vertices[lo_ext:hi_ext + 1], w.edges[lo_ext:hi_ext])
    ref = _path_walk(frame, host)
    total = sum(lbl for _, lbl in label_pairs(frame.graph, piece, ref))
    return 1 + abs(total)


def potential(frame: TreeEmbedding, linkage: WeakLinkage) -> int:
    seg = segments(frame, linkage)
    return sum(
        group_potential(frame, linkage, grp, host)
        for grp, host in zip(seg.groups, seg.hosts)
    )


# -- shallowness and lifting ---------------------------------------------------


def enclosure_counts(
    frame: TreeEmbedding, linkage: WeakLinkage
) -> Tuple[Dict[str, int], Dict[str, int]]:
    """Per tree edge: how many off-tree subwalks enclose its +1 / -1 copy."""
    g = frame.graph
    pos: Dict[str, int] = {}
    neg: Dict[str, int] = {}
    for span in sequences(frame, linkage):
        inside = g.edges_strictly_inside(projecting_cycle(frame, linkage, span))
        for b in frame.tree_edges:
            if frame.copy(b, 1) in inside:
                pos[b] = pos.get(b, 0) + 1
            if frame.copy(b, -1) in inside:
                neg[b] = neg.get(b, 0) + 1
    return pos, neg


def shallow_violation(frame: TreeEmbedding, linkage: WeakLinkage) -> Optional[str]:
    """Name a copy that sits in a reserved outer band, or None when shallow."""
    m = frame.half_width
    pos, neg = enclosure_counts(frame, linkage)
    used = linkage.edge_set()
    for b in sorted(frame.tree_edges):
        cls = frame.graph.parallel_classes[b]
        for i, eid in cls.copies:
            if eid not in used:
                continue
            if i == 0:
                return eid
            if i > 0 and i > m - pos.get(b, 0):
                return eid
            if i < 0 and i < -m + neg.get(b, 0):
                return eid
    return None


def lift_paths(
    frame: TreeEmbedding, vertex_paths: Sequence[Sequence[str]], copy_index: int = 1
) -> WeakLinkage:
    """Represent base-graph paths on a fixed parallel copy of each edge."""
    g = frame.graph
    walks = []
    for p in vertex_paths:
        edges = []
        for a, b in zip(p, p[1:]):
            base = None
            for e in g.rotation[a]:
                if g.other_end(e, a) == b and g.copy_index(e) == 0:
                    base = g.base_edge(e)
                    break
            if base is None:
                raise KeyError((a, b))
            if base in g.parallel_classes:
                edges.append(g.parallel_classes[base].copy(copy_index))
            else:
                edges.append(base)
        walks.append(Walk(tuple(p), tuple(edges)))
    return WeakLinkage(tuple(walks))


# -- pushing onto the tree -----------------------------------------------------


def _seq_from(frame: TreeEmbedding, linkage: WeakLinkage, span: Span, v: str):
    """Sequence edge/vertex lists oriented to start at endpoint v."""
    w = linkage.walks[span.wi]
    verts = list(w.vertices[span.lo:span.hi + 1])
    edges = list(w.edges[span.lo:span.hi])
    if verts[0] != v:
        verts.reverse()
        edges.reverse()
    return verts, edges


def _shrinking_candidates(
    frame: TreeEmbedding,
    linkage: WeakLinkage,
    span: Span,
    v: str,
    pos_counts: Dict[str, int],
    neg_counts: Dict[str, int],
):
    """All valid shrinking cycles for (span, v), scored by enclosed faces."""
    g = frame.graph
    m = frame.half_width
    verts, edges = _seq_from(frame, linkage, span, v)
    seq_vertices = set(verts)
    proj = projecting_cycle(frame, linkage, span)
    inside_edges = g.edges_strictly_inside(proj)
    proj_faces = g.cycle_interior_faces(proj)
    used = linkage.edge_set()

    if verts[0] == verts[-1]:
        # closed sequence: pulling it whole is a candidate
        hit = inside_edges & used
        if not hit:
            yield len(g.cycle_interior_faces(edges)), ("pull", list(edges))

    for q in range(len(edges), 0, -1):
        p1_edges = edges[:q]
        u2 = verts[q]
        if u2 == v:
            continue
        # region reachable from u2 strictly inside the projecting cycle
        reach: Dict[str, Tuple[Optional[str], Optional[str]]] = {u2: (None, None)}
        frontier = [u2]
        while frontier:
            nxt = []
            for x in sorted(frontier):
                for f in g.rotation[x]:
                    if f not in inside_edges or f in used or frame.is_tree_parallel(f):
                        continue
                    y = g.other_end(f, x)
                    if y in seq_vertices or y in reach or y == v:
                        continue
                    reach[y] = (x, f)
                    nxt.append(y)
            frontier = nxt

        def p2_path(z: str) -> Tuple[List[str], List[str]]:
            vs, es = [z], []
            while reach[vs[-1]][0] is not None:
                px, pe = reach[vs[-1]]
                es.append(pe)
                vs.append(px)
            return list(reversed(vs)), list(reversed(es))

        for z in sorted(reach):
            for f in g.rotation[z]:
                if g.other_end(f, z) != v or f in used or f in set(p1_edges):
                    continue
                if frame.is_tree_parallel(f):
                    b = g.base_edge(f)
                    i = g.copy_index(f)
                    slot_pos = m - max(pos_counts.get(b, 0), 1) + 1
                    slot_neg = -m + max(neg_counts.get(b, 0), 1) - 1
                    if i not in (slot_pos, slot_neg):
                        continue
                _, p2_edges = p2_path(z)
                cyc = p1_edges + p2_edges + [f]
                faces_in = g.cycle_interior_faces(cyc)
                if not faces_in <= proj_faces:
                    continue
                inside = g.edges_strictly_inside(cyc)
                if inside & used:
                    continue
                if inside & frame.tree_edges:
                    continue
                yield len(faces_in), ("move", cyc)


def push_onto_tree(
    frame: TreeEmbedding,
    linkage: WeakLinkage,
    trace: Optional[List[int]] = None,
) -> WeakLinkage:
    """Slide every off-tree stretch onto reserved parallel copies.

    Innermost-first; each step applies the face-maximal shrinking cycle and
    strictly decreases the total enclosed volume.
    """
    g = frame.graph
    if frame.pairs is not None and not is_sensible(linkage, frame.pairs):
        raise PreconditionViolation("linkage is not sensible")
    if not is_well_behaved(frame, linkage):
        raise PreconditionViolation("linkage is not well-behaved")
    if frame.star is not None and not is_outer_terminal(frame, linkage):
        raise PreconditionViolation("linkage is not outer-terminal")
    bad = shallow_violation(frame, linkage)
    if bad is not None:
        raise PreconditionViolation(f"linkage is not shallow at {bad!r}")

    while True:
        seqs = sequences(frame, linkage)
        if not seqs:
            break
        total = sum(volume(frame, linkage, s) for s in seqs)
        if trace is not None:
            trace.append(total)
        ranked = sorted(
            (volume(frame, linkage, s), s.wi, s.lo, s) for s in seqs
        )
        _, _, _, span = ranked[0]
        pos_counts, neg_counts = enclosure_counts(frame, linkage)
        a, b = span.endpoints(linkage)
        ends = [x for x in dict.fromkeys((a, b)) if x != frame.star]
        best = None
        for v in ends:
            for score, op in _shrinking_candidates(
                frame, linkage, span, v, pos_counts, neg_counts
            ):
                key = (-score, op[0], tuple(op[1]))
                if best is None or key < best[0]:
                    best = (key, op)
        if best is None:
            raise LinkageError("no shrinking cycle applies; push is stuck")
        kind, cyc = best[1]
        before_pot = potential(frame, linkage)
        if kind == "pull":
            linkage = cycle_pull(g, linkage, span.wi, cyc)
        else:
            linkage = cycle_move(g, linkage, span.wi, cyc)
        new_seqs = sequences(frame, linkage)
        new_total = sum(volume(frame, linkage, s) for s in new_seqs)
        if new_total >= total:
            raise LinkageError("push step failed to shrink the volume")
        if potential(frame, linkage) != before_pot:
            raise LinkageError("push step changed the potential")
    if trace is not None:
        trace.append(0)
    return linkage


# -- U-turns -------------------------------------------------------------------


@dataclass(frozen=True)
class UTurn:
    wi: int
    pos: int          # edges[pos], edges[pos+1] are the parallel pair
    low: str
    high: str
    special: bool
    crossing: bool
    innermost: bool


def find_u_turns(frame: TreeEmbedding, linkage: WeakLinkage) -> List[UTurn]:
    g = frame.graph
    used = linkage.edge_set()
    extremes: Set[str] = set()
    for w in linkage.walks:
        if w.edges:
            extremes.add(w.edges[0])
            extremes.add(w.edges[-1])
    hubs = frame.hub_vertices()
    out: List[UTurn] = []
    for wi, w in enumerate(linkage.walks):
        for i in range(len(w.edges) - 1):
            e1, e2 = w.edges[i], w.edges[i + 1]
            b = g.base_edge(e1)
            if b != g.base_edge(e2):
                continue
            i1, i2 = g.copy_index(e1), g.copy_index(e2)
            lo, hi = min(i1, i2), max(i1, i2)
            between = [
                g.parallel_classes[b].copy(j) for j in range(lo + 1, hi)
            ]
            if extremes & set(between):
                continue
            u1, u2 = g.edges[e1]
            special = (i1 * i2 > 0) or (u1 not in hubs and u2 not in hubs)
            inner = not (used & set(between))
            out.append(
                UTurn(wi, i, e1, e2, special, i1 * i2 < 0, inner)
            )
    return out


def eliminate_u_turns(
    frame: TreeEmbedding,
    linkage: WeakLinkage,
    mode: str = "all",
    trace: Optional[List[int]] = None,
) -> WeakLinkage:
    """Pull bounces off parallel pairs, innermost first.

    special-only mode never increases the potential; all mode never
    increases the segment count.  Edge count drops by 2 every step.
    """
    if mode not in ("all", "special-only"):
        raise ValueError(mode)
    g = frame.graph
    while True:
        turns = [t for t in find_u_turns(frame, linkage) if t.innermost]
        if mode == "special-only":
            turns = [t for t in turns if t.special]
        if not turns:
            return linkage
        t = min(turns, key=lambda t: (t.wi, t.pos))
        edges_before = sum(len(w.edges) for w in linkage.walks)
        pot_before = potential(frame, linkage)
        segs_before = len(segments(frame, linkage).segments)
        linkage = cycle_pull(g, linkage, t.wi, [t.low, t.high])
        edges_after = sum(len(w.edges) for w in linkage.walks)
        if edges_after != edges_before - 2:
            raise LinkageError("u-turn pull did not drop exactly two edges")
        if trace is not None:
            trace.append(edges_after)
        if mode == "special-only" and potential(frame, linkage) > pot_before:
            raise LinkageError("special u-turn pull increased the potential")
        if mode == "all" and len(segments(frame, linkage).segments) > segs_before:
            raise LinkageError("u-turn pull increased the segment count")


# -- swollen segments ----------------------------------------------------------


def _segment_hosted(frame: TreeEmbedding, linkage: WeakLinkage, span: Span) -> Optional[int]:
    paths = frame.deg2_paths()
    interior: Dict[str, int] = {}
    for pi, p in enumerate(paths):
        for x in p[1:-1]:
            interior[x] = pi
    a, b = span.endpoints(linkage)
    pa, pb = interior.get(a), interior.get(b)
    if pa is not None and pa == pb:
        return pa
    return None


def find_swollen(frame: TreeEmbedding, linkage: WeakLinkage) -> List[Span]:
    """Segments whose entry and exit crossings carry opposite labels."""
    from .rings import crossing_label

    g = frame.graph
    seg = segments(frame, linkage)
    out = []
    for span in seg.segments:
        w = linkage.walks[span.wi]
        if span.lo == 0 or span.hi == len(w.edges):
            continue
        host = _segment_hosted(frame, linkage, span)
        if host is None:
            continue
        ref = _path_walk(frame, host)
        entry = crossing_label(
            g, ref, w.vertices[span.lo], w.edges[span.lo - 1], w.edges[span.lo]
        )
        exit_ = crossing_label(
            g, ref, w.vertices[span.hi], w.edges[span.hi - 1], w.edges[span.hi]
        )
        if entry and exit_ and entry != exit_:
            out.append(span)
    return out


def _innermost_swollen(frame: TreeEmbedding, linkage: WeakLinkage, spans: List[Span]) -> Span:
    g = frame.graph

    def is_innermost(span: Span) -> bool:
        own = set(span.edges(linkage))
        for e in own:
            b, i = g.base_edge(e), g.copy_index(e)
            for j_eid in linkage.edge_set():
                if j_eid in own or g.base_edge(j_eid) != b:
                    continue
                j = g.copy_index(j_eid)
                if j * i > 0 and abs(j) < abs(i):
                    return False
        return True

    for span in sorted(spans, key=lambda s: (s.wi, s.lo)):
        if is_innermost(span):
            return span
    raise LinkageError("no innermost swollen segment")


def eliminate_swollen(
    frame: TreeEmbedding,
    linkage: WeakLinkage,
    trace: Optional[List[int]] = None,
) -> WeakLinkage:
    """Move side-flipping segments across the tree; segment count drops by 2."""
    g = frame.graph
    while True:
        spans = find_swollen(frame, linkage)
        if not spans:
            return linkage
        span = _innermost_swollen(frame, linkage, spans)
        pot_before = potential(frame, linkage)
        segs_before = len(segments(frame, linkage).segments)
        w = linkage.walks[span.wi]
        moved = list(range(span.lo, span.hi))
        for pos in moved:
            e = linkage.walks[span.wi].edges[pos]
            b, i = g.base_edge(e), g.copy_index(e)
            sign = -1 if i > 0 else 1
            used = linkage.edge_set()
            t = 0
            while abs(sign * (t + 1)) <= frame.half_width and (
                frame.copy(b, sign * (t + 1)) not in used
            ):
                t += 1
            if t == 0:
                raise LinkageError("no free copies on the far side")
            target = frame.copy(b, sign * t)
            linkage = cycle_move(g, linkage, span.wi, [e, target])
        segs_after = len(segments(frame, linkage).segments)
        if segs_after != segs_before - 2:
            raise LinkageError("segment move did not merge exactly two boundaries")
        if potential(frame, linkage) > pot_before:
            raise LinkageError("segment move increased the potential")
        if trace is not None:
            trace.append(segs_after)


# -- copy normalization ---------------------------------------------------------


def _strands_by_class(g: PlaneGraph, linkage: WeakLinkage) -> Dict[str, List[int]]:
    out: Dict[str, List[int]] = {}
    for e in linkage.edge_set():
        if e in g.copy_of:
            b, i = g.copy_of[e]
            out.setdefault(b, []).append(i)
    return {b: sorted(v) for b, v in sorted(out.items())}


def _walk_of_edge(linkage: WeakLinkage, eid: str) -> int:
    for wi, w in enumerate(linkage.walks):
        if eid in w.edges:
            return wi
    raise KeyError(eid)


def _shift_strand(g: PlaneGraph, linkage: WeakLinkage, base: str, src: int, dst: int) -> WeakLinkage:
    if src == dst:
        return linkage
    cls = g.parallel_classes[base]
    e_src, e_dst = cls.copy(src), cls.copy(dst)
    return cycle_move(g, linkage, _walk_of_edge(linkage, e_src), [e_src, e_dst])


def is_extremal(frame: TreeEmbedding, linkage: WeakLinkage) -> bool:
    m = frame.half_width
    if multiplicity(frame.graph, linkage) > 2 * m:
        return False
    for b, idxs in _strands_by_class(frame.graph, linkage).items():
        pos = [i for i in idxs if i > 0]
        neg = [i for i in idxs if i < 0]
        if pos and neg and (min(pos) - 1) + (abs(max(neg)) - 1) < 2 * m:
            return False
    return True


def is_canonical(frame: TreeEmbedding, linkage: WeakLinkage) -> bool:
    for b, idxs in _strands_by_class(frame.graph, linkage).items():
        if idxs != list(range(1, len(idxs) + 1)):
            return False
    return True


def make_extremal(
    frame: TreeEmbedding, linkage: WeakLinkage, trace: Optional[List[int]] = None
) -> WeakLinkage:
    """Spread strands to the outermost slots of their own side."""
    g = frame.graph
    m = frame.half_width
    if multiplicity(g, linkage) > 2 * m:
        raise MultiplicityTooHigh("more strands than available slots")
    for b, idxs in _strands_by_class(g, linkage).items():
        pos = sorted((i for i in idxs if i > 0), reverse=True)
        for rank, i in enumerate(pos):
            linkage = _shift_strand(g, linkage, b, i, m - rank)
        neg = sorted(i for i in idxs if i < 0)
        for rank, i in enumerate(neg):
            linkage = _shift_strand(g, linkage, b, i, -(m - rank))
        if trace is not None:
            trace.append(sum(abs(i) for ix in _strands_by_class(g, linkage).values() for i in ix))
    if not is_extremal(frame, linkage):
        raise LinkageError("extremal normalization failed")
    return linkage


def make_canonical(frame: TreeEmbedding, linkage: WeakLinkage) -> WeakLinkage:
    """Compact every bundle onto copies 1..count."""
    g = frame.graph
    m = frame.half_width
    if multiplicity(g, linkage) > 2 * m:
        raise MultiplicityTooHigh("more strands than available slots")
    for b, idxs in _strands_by_class(g, linkage).items():
        up = sorted(idxs, reverse=True)
        for rank, i in enumerate(up):
            linkage = _shift_strand(g, linkage, b, i, m - rank)
        down = sorted(_strands_by_class(g, linkage)[b])
        for rank, i in enumerate(down):
            linkage = _shift_strand(g, linkage, b, i, rank + 1)
    if not is_canonical(frame, linkage):
        raise LinkageError("canonical normalization failed")
    return linkage


def segment_copy_bound(frame: TreeEmbedding, linkage: WeakLinkage) -> int:
    """Max copies of one tree edge used inside a single segment."""
    g = frame.graph
    best = 0
    for span in segments(frame, linkage).segments:
        per: Dict[str, int] = {}
        for e in span.edges(linkage):
            b = g.base_edge(e)
            per[b] = per.get(b, 0) + 1
        best = max(best, max(per.values(), default=0))
    return best


def simplify(
    frame: TreeEmbedding,
    linkage: WeakLinkage,
    trace: Optional[Dict[str, List[int]]] = None,
) -> WeakLinkage:
    """Full pipeline: push, extremal, bounce removal, side-flip removal,
    final bounce removal, canonical compaction."""
    tr = trace if trace is not None else {}
    tr.setdefault("volume", [])
    tr.setdefault("edges", [])
    tr.setdefault("segments", [])
    tr.setdefault("spread", [])
    linkage = push_onto_tree(frame, linkage, trace=tr["volume"])
    linkage = make_extremal(frame, linkage, trace=tr["spread"])
    linkage = eliminate_u_turns(frame, linkage, "special-only", trace=tr["edges"])
    linkage = eliminate_swollen(frame, linkage, trace=tr["segments"])
    linkage = eliminate_u_turns(frame, linkage, "all", trace=tr["edges"])
    linkage = make_canonical(frame, linkage)
    if not is_pushed(frame, linkage):
        raise LinkageError("simplified linkage is not pushed")
    if find_u_turns(frame, linkage):
        raise LinkageError("simplified linkage still has a u-turn")
    seg = segments(frame, linkage)
    pot = potential(frame, linkage)
    if len(seg.segments) > pot:
        raise LinkageError("segment count exceeds the potential")
    if segment_copy_bound(frame, linkage) > 2:
        raise LinkageError("a segment uses more than two copies of an edge")
    return linkage
