"""Pairings, templates, stitchings: compact descriptors of pushed linkages.

A candidate records, per distinguished tree vertex, which tree-edge pairs
its walks join and how many times.  Extending along degree-2 paths, turning
counts into copy-level involutions, and tracing those involutions
reconstructs the linkage exactly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .embedding import TreeEmbedding
from .linkage import WeakLinkage, check_no_zero_copies, is_pushed
from .plane_graph import GraphError
from .walks import Walk

Pair = Tuple[str, str]                  # sorted tree-edge ids
Candidate = Dict[str, Dict[Pair, int]]  # vertex -> pair -> count
Stitching = Dict[str, Dict[str, str]]   # vertex -> copy involution


class NotPushed(GraphError):
    pass


class InvalidCandidate(GraphError):
    pass


class EvenMultiplicity(InvalidCandidate):
    pass


class FixedPoint(InvalidCandidate):
    pass


class NonterminatingTrace(GraphError):
    pass


class UnmatchedTerminals(GraphError):
    pass


def _pair(a: str, b: str) -> Pair:
    return (a, b) if a <= b else (b, a)


def distinguished_vertices(frame: TreeEmbedding) -> List[str]:
    """Hubs plus their degree-2 tree neighbours."""
    t = frame.tree
    hubs = frame.hub_vertices()
    out = set(hubs)
    for v in hubs:
        for w in t.tree_neighbors(v):
            if t.degree(w) == 2:
                out.add(w)
    return sorted(out)


def distinguished_edges(frame: TreeEmbedding) -> List[str]:
    marked = set(distinguished_vertices(frame))
    return sorted(
        e for e in frame.tree_edges
        if frame.graph.edges[e][0] in marked or frame.graph.edges[e][1] in marked
    )


def tree_edge_cycle(frame: TreeEmbedding, v: str) -> List[str]:
    """Tree edges at v in clockwise rotation order (one entry per bundle)."""
    seen = []
    for e in frame.graph.rotation[v]:
        b = frame.graph.base_edge(e)
        if b in frame.tree_edges and b not in seen:
            seen.append(b)
    return seen


def extract_candidate(frame: TreeEmbedding, linkage: WeakLinkage) -> Candidate:
    """Pairing and template of a pushed linkage at the distinguished vertices.

    A terminal's value counts the walk end as half a pair: value
    (l+1)/2 for l used copies of its unique tree edge.
    """
    if not is_pushed(frame, linkage):
        raise NotPushed("linkage is not pushed onto the tree")
    g = frame.graph
    marked = set(distinguished_vertices(frame))
    terminals = frame.tree.terminals
    out: Candidate = {v: {} for v in marked}
    for w in linkage.walks:
        for i in range(len(w.edges) - 1):
            v = w.vertices[i + 1]
            if v not in marked:
                continue
            p = _pair(g.base_edge(w.edges[i]), g.base_edge(w.edges[i + 1]))
            out[v][p] = out[v].get(p, 0) + 1
    for t in sorted(terminals & marked):
        e_star = frame.tree.adj[t][0]
        ell = sum(1 for e in linkage.edge_set() if g.base_edge(e) == e_star and t in g.edges[e])
        ends = sum(1 for w in linkage.walks if t in (w.start, w.end))
        if ends != 1 or ell % 2 == 0:
            raise NotPushed(f"terminal {t!r} is not the end of exactly one walk")
        out[t] = {_pair(e_star, e_star): (ell + 1) // 2}
    return {v: dict(sorted(pairs.items())) for v, pairs in sorted(out.items())}


def pairing_of(frame: TreeEmbedding, linkage: WeakLinkage) -> Dict[str, List[Pair]]:
    cand = extract_candidate(frame, linkage)
    return {v: sorted(pairs) for v, pairs in cand.items()}


def template_of(frame: TreeEmbedding, linkage: WeakLinkage) -> Candidate:
    return extract_candidate(frame, linkage)


def is_noncrossing(frame: TreeEmbedding, v: str, pairs: Iterable[Pair]) -> bool:
    """Quadruple scan of the pair chords around v's cyclic tree-edge order."""
    order = tree_edge_cycle(frame, v)
    pos = {e: i for i, e in enumerate(order)}
    n = len(order)
    ps = [p for p in pairs if p[0] != p[1]]
    for (a, b), (c, d) in itertools.combinations(ps, 2):
        ia, ib = pos[a], pos[b]
        span = (ib - ia) % n
        inside = sum(1 for x in (c, d) if 0 < (pos[x] - ia) % n < span)
        if inside == 1:
            return False
    return True


def candidate_noncrossing(frame: TreeEmbedding, cand: Candidate) -> bool:
    return all(is_noncrossing(frame, v, pairs) for v, pairs in cand.items())


def total_pairs(cand: Candidate) -> int:
    return sum(len(p) for p in cand.values())


def total_mass(cand: Candidate) -> int:
    return sum(sum(p.values()) for p in cand.values())


def candidate_json(cand: Candidate) -> str:
    doc = {
        v: [{"pair": list(p), "count": c} for p, c in sorted(pairs.items())]
        for v, pairs in sorted(cand.items())
        if pairs
    }
    return json.dumps(doc, sort_keys=True)


def candidate_from_json(text: str) -> Candidate:
    doc = json.loads(text)
    return {
        v: { _pair(*item["pair"]): int(item["count"]) for item in items }
        for v, items in doc.items()
    }


def enumerate_all(
    frame: TreeEmbedding, caps: Tuple[int, int]
) -> Iterator[Candidate]:
    """Every capped non-crossing pairing with every template assignment.

    The raw stream of the definition: subsets of the pair universe up to the
    pair cap, filtered for non-crossing, crossed with count assignments
    1..cap.  Deterministic and lazy.
    """
    max_pairs, max_count = caps
    universe: List[Tuple[str, Pair]] = []
    marked = set(distinguished_vertices(frame))
    for t in sorted(frame.tree.terminals & marked):
        e_star = frame.tree.adj[t][0]
        universe.append((t, _pair(e_star, e_star)))
    estar = distinguished_edges(frame)
    for a, b in itertools.combinations(estar, 2):
        shared = set(frame.graph.edges[a]) & set(frame.graph.edges[b])
        if len(shared) == 1 and next(iter(shared)) in marked:
            universe.append((min(shared), _pair(a, b)))
    universe.sort()
    for size in range(0, min(max_pairs, len(universe)) + 1):
        for subset in itertools.combinations(universe, size):
            skeleton: Candidate = {}
            for v, p in subset:
                skeleton.setdefault(v, {})[p] = 1
            if not candidate_noncrossing(frame, skeleton):
                continue
            keys = [(v, p) for v, p in subset]
            for counts in itertools.product(range(1, max_count + 1), repeat=size):
                cand: Candidate = {}
                for (v, p), c in zip(keys, counts):
                    cand.setdefault(v, {})[p] = c
                yield cand


def _deg2_path_records(frame: TreeEmbedding):
    """Per maximal degree-2 path: (vertices, edges, terminal-ended?)."""
    out = []
    for p in frame.deg2_paths():
        edges = frame.tree.path_edges(p)
        term = frame.tree.degree(p[0]) == 1 or frame.tree.degree(p[-1]) == 1
        out.append((p, edges, term))
    return out


def extend(frame: TreeEmbedding, cand: Candidate) -> Candidate:
    """Propagate pair data along every degree-2 path, or reject.

    The sentinel vertices next to each path endpoint must agree on presence
    and count of the through pair; interior vertices inherit it.
    """
    out: Candidate = {v: dict(p) for v, p in cand.items()}
    marked = set(distinguished_vertices(frame))
    for v in marked:
        out.setdefault(v, {})
    for pverts, pedges, _ in _deg2_path_records(frame):
        interior = pverts[1:-1]
        checks: List[Tuple[str, int]] = []
        for w, e_in, e_out in zip(interior, pedges, pedges[1:]):
            if w in marked:
                checks.append((w, cand.get(w, {}).get(_pair(e_in, e_out), 0)))
        vals = {c for _, c in checks}
        if len(vals) > 1:
            raise InvalidCandidate(
                f"through counts disagree on the path at {pverts[0]!r}..{pverts[-1]!r}"
            )
        c = vals.pop() if vals else 0
        for w, e_in, e_out in zip(interior, pedges, pedges[1:]):
            if w in marked:
                continue
            out[w] = {_pair(e_in, e_out): c} if c else {}
    return out


def multiplicity_from(frame: TreeEmbedding, extended: Candidate) -> Dict[str, int]:
    """Copies per tree edge implied by an extended candidate, or reject."""
    terminals = frame.tree.terminals
    per_vertex: Dict[str, Dict[str, int]] = {}
    for v, pairs in extended.items():
        acc: Dict[str, int] = {}
        for (a, b), c in pairs.items():
            if a == b:
                acc[a] = acc.get(a, 0) + (2 * c - 1 if v in terminals else 2 * c)
            else:
                acc[a] = acc.get(a, 0) + c
                acc[b] = acc.get(b, 0) + c
        per_vertex[v] = acc
    for t in sorted(terminals):
        if not extended.get(t):
            raise InvalidCandidate(f"terminal {t!r} has an empty pairing")
    ell: Dict[str, int] = {}
    for e in sorted(frame.tree_edges):
        u, w = frame.graph.edges[e]
        vals = []
        for x in (u, w):
            if x in per_vertex:
                vals.append(per_vertex[x].get(e, 0))
        if not vals:
            raise InvalidCandidate(f"edge {e!r} has no incident candidate data")
        if len(set(vals)) > 1:
            raise InvalidCandidate(f"endpoints disagree on multiplicity of {e!r}")
        ell[e] = vals[0]
    return ell


def stitch_terminal(frame: TreeEmbedding, ell: Mapping[str, int], v: str) -> Dict[str, str]:
    """Nested involution on the lowest copies of a terminal's unique edge."""
    e_star = frame.tree.adj[v][0]
    l = ell[e_star]
    if l % 2 == 0:
        raise EvenMultiplicity(f"terminal {v!r} got an even count {l}")
    f: Dict[str, str] = {}
    for i in range(1, l + 1):
        f[frame.copy(e_star, i)] = frame.copy(e_star, l + 1 - i)
    return f


def stitch_nonterminal(
    frame: TreeEmbedding, extended: Candidate, ell: Mapping[str, int], v: str
) -> Dict[str, str]:
    """Copy-level involution at an inner vertex from the counts around it.

    Chords of a pair occupy the copy interval after all chords to partners
    outside the pair's span, and map reversed onto the partner's interval.
    """
    pairs = extended.get(v, {})
    order = tree_edge_cycle(frame, v)
    pos = {e: i for i, e in enumerate(order)}

    def tmpl(a: str, b: str) -> int:
        return pairs.get(_pair(a, b), 0)

    f: Dict[str, str] = {}

    def put(a: str, b: str) -> None:
        if a == b:
            raise FixedPoint(f"stitching fixes {a!r} at {v!r}")
        if a in f or b in f:
            raise InvalidCandidate(f"copy {a!r} or {b!r} mapped twice at {v!r}")
        f[a] = b
        f[b] = a

    for (e, e2), count in sorted(pairs.items()):
        if count <= 0:
            continue
        if e == e2:
            # nested bounce on the innermost copies
            for i in range(1, count + 1):
                put(frame.copy(e, i), frame.copy(e, 2 * count + 1 - i))
            continue
        if pos[e] > pos[e2]:
            e, e2 = e2, e
        between = set(order[pos[e] + 1:pos[e2]])
        outer = set(order) - between - {e, e2}
        x = sum(tmpl(e, s) for s in outer) + 2 * pairs.get(_pair(e, e), 0)
        y = (
            1 + count
            + sum(tmpl(e2, s) for s in between)
            + 2 * pairs.get(_pair(e2, e2), 0)
        )
        for i in range(1, count + 1):
            put(frame.copy(e, x + i), frame.copy(e2, y - i))
    return f


def stitching_from(frame: TreeEmbedding, extended: Candidate) -> Stitching:
    """Per-vertex involutions assembled and checked edge by edge."""
    ell = multiplicity_from(frame, extended)
    terminals = frame.tree.terminals
    out: Stitching = {}
    for v in sorted(frame.tree.vertices):
        if v in terminals:
            out[v] = stitch_terminal(frame, ell, v)
        else:
            out[v] = stitch_nonterminal(frame, extended, ell, v)
    for e in sorted(frame.tree_edges):
        u, w = frame.graph.edges[e]
        cls = frame.graph.parallel_classes[e]
        for _, eid in cls.copies:
            if (eid in out[u]) != (eid in out[w]):
                raise InvalidCandidate(f"copy {eid!r} stitched at one endpoint only")
    return out


def stitching_of(frame: TreeEmbedding, linkage: WeakLinkage) -> Stitching:
    """The stitching a pushed linkage actually realizes."""
    if not is_pushed(frame, linkage):
        raise NotPushed("linkage is not pushed onto the tree")
    out: Stitching = {v: {} for v in frame.tree.vertices}
    for w in linkage.walks:
        for endpoint, eid in ((w.start, w.edges[0]), (w.end, w.edges[-1])):
            out[endpoint][eid] = eid
        for i in range(len(w.edges) - 1):
            v = w.vertices[i + 1]
            out[v][w.edges[i]] = w.edges[i + 1]
            out[v][w.edges[i + 1]] = w.edges[i]
    return {v: m for v, m in out.items()}


def reconstruct(
    frame: TreeEmbedding,
    stitching: Stitching,
    sources: Optional[Sequence[str]] = None,
) -> WeakLinkage:
    """Trace walks from terminal fixed points through the involutions."""
    g = frame.graph
    fixed: Dict[str, str] = {}
    for v in sorted(frame.tree.terminals):
        own = [e for e, e2 in stitching.get(v, {}).items() if e == e2]
        if len(own) != 1:
            raise UnmatchedTerminals(f"terminal {v!r} has {len(own)} trace ends")
        fixed[v] = own[0]
    if sources is None:
        sources = [s for s, _ in frame.pairs] if frame.pairs else sorted(fixed)
    budget = sum(len(m) for m in stitching.values()) + 2
    consumed_ends: Set[str] = set()
    consumed_pairs: Set[Tuple[str, str, str]] = set()
    walks: List[Walk] = []
    for s in sources:
        if s in consumed_ends:
            raise UnmatchedTerminals(f"trace end at {s!r} already used")
        consumed_ends.add(s)
        verts = [s]
        edges = [fixed[s]]
        steps = 0
        while True:
            steps += 1
            if steps > budget:
                raise NonterminatingTrace("trace exceeded the stitch budget")
            v = g.other_end(edges[-1], verts[-1])
            verts.append(v)
            nxt = stitching.get(v, {}).get(edges[-1])
            if nxt is None:
                raise NonterminatingTrace(f"trace dangles at {v!r}")
            if nxt == edges[-1]:
                if v not in fixed or fixed[v] != nxt:
                    raise NonterminatingTrace(f"trace stops off-terminal at {v!r}")
                if v in consumed_ends:
                    raise UnmatchedTerminals(f"trace end at {v!r} already used")
                consumed_ends.add(v)
                break
            key = (v, *sorted((edges[-1], nxt)))
            if key in consumed_pairs:
                raise NonterminatingTrace(f"stitch reused at {v!r}")
            consumed_pairs.add(key)
            edges.append(nxt)
        walks.append(Walk(tuple(verts), tuple(edges)))
    if consumed_ends != set(fixed):
        raise UnmatchedTerminals("some terminals were never reached")
    total_pairs_ = sum(
        sum(1 for e, e2 in m.items() if e < e2) for m in stitching.values()
    )
    if len(consumed_pairs) != total_pairs_:
        raise UnmatchedTerminals("stitching contains walks-free loops")
    return WeakLinkage(tuple(walks))


# -- structurally valid stream -------------------------------------------------


def _branch_diagrams(
    frame: TreeEmbedding, v: str, degrees: Dict[str, int], max_count: int
) -> List[Dict[Pair, int]]:
    """Non-crossing chord multisets around v with prescribed port degrees."""
    order = tree_edge_cycle(frame, v)
    ports = [e for e in order if degrees.get(e, 0) > 0]
    if sum(degrees.get(e, 0) for e in order) % 2:
        return []
    pair_opts = [
        _pair(a, b) for a, b in itertools.combinations(ports, 2)
    ]
    results: List[Dict[Pair, int]] = []
    n = len(order)
    pos = {e: i for i, e in enumerate(order)}

    def crossing(p: Pair, q: Pair) -> bool:
        ia, ib = pos[p[0]], pos[p[1]]
        span = (ib - ia) % n
        inside = sum(1 for x in q if 0 < (pos[x] - ia) % n < span)
        return inside == 1

    supports: List[List[Pair]] = []
    for r in range(0, len(pair_opts) + 1):
        for combo in itertools.combinations(pair_opts, r):
            if any(crossing(p, q) for p, q in itertools.combinations(combo, 2)):
                continue
            supports.append(list(combo))

    for support in supports:
        need = {e: degrees.get(e, 0) for e in ports}
        slots = {e: [p for p in support if e in p] for e in ports}
        if any(not slots[e] and need[e] for e in ports):
            continue

        def assign(i: int, remaining: Dict[str, int], acc: Dict[Pair, int]) -> None:
            if i == len(support):
                if all(x == 0 for x in remaining.values()):
                    results.append(dict(acc))
                return
            p = support[i]
            a, b = p
            later_a = sum(1 for q in support[i + 1:] if a in q)
            later_b = sum(1 for q in support[i + 1:] if b in q)
            hi = min(remaining[a] - later_a, remaining[b] - later_b, max_count)
            for c in range(1, hi + 1):
                remaining[a] -= c
                remaining[b] -= c
                acc[p] = c
                assign(i + 1, remaining, acc)
                del acc[p]
                remaining[a] += c
                remaining[b] += c

        assign(0, dict(need), {})
    uniq = {candidate_json({v: r}): r for r in results}
    return [uniq[k] for k in sorted(uniq)]


def enumerate_valid(
    frame: TreeEmbedding, caps: Tuple[int, int]
) -> Iterator[Candidate]:
    """The extension-valid members of the raw stream, cheapest classes first.

    Assigns a through-multiplicity to every maximal degree-2 path (odd and
    positive when the path ends at a terminal), then glues non-crossing
    chord diagrams at branch vertices.  Ordered by total multiplicity, then
    template mass.
    """
    max_pairs, max_count = caps
    paths = _deg2_path_records(frame)
    terminals = frame.tree.terminals
    hubs = frame.hub_vertices()
    branch = sorted(frame.tree.branch_vertices())
    edge_path: Dict[str, int] = {}
    for pi, (pverts, pedges, _) in enumerate(paths):
        for e in pedges:
            edge_path[e] = pi

    def path_cap(pi: int) -> int:
        _, _, term = paths[pi]
        return 2 * max_count - 1 if term else max_count

    def c_options(pi: int) -> List[int]:
        _, _, term = paths[pi]
        if term:
            return [c for c in range(1, path_cap(pi) + 1, 2)]
        return list(range(0, path_cap(pi) + 1))

    option_lists = [c_options(pi) for pi in range(len(paths))]
    min_total = sum(o[0] for o in option_lists)
    max_total = sum(o[-1] for o in option_lists)
    for total in range(min_total, max_total + 1):
        batch: List[Tuple[int, str, Candidate]] = []
        for combo in _compositions(option_lists, total):
            per_branch: List[List[Tuple[str, Dict[Pair, int]]]] = []
            ok = True
            for v in branch:
                degrees = {
                    e: combo[edge_path[e]] for e in frame.tree.adj[v]
                }
                diagrams = _branch_diagrams(frame, v, degrees, max_count)
                if not diagrams:
                    ok = False
                    break
                per_branch.append([(v, d) for d in diagrams])
            if not ok:
                continue
            base: Candidate = {}
            for pi, (pverts, pedges, _) in enumerate(paths):
                c = combo[pi]
                for endpoint, e in ((pverts[0], pedges[0]), (pverts[-1], pedges[-1])):
                    if endpoint in terminals:
                        if c % 2 == 0 or c <= 0:
                            ok = False
                        else:
                            base.setdefault(endpoint, {})[_pair(e, e)] = (c + 1) // 2
                if not ok:
                    break
                for w, e_in, e_out in zip(pverts[1:-1], pedges, pedges[1:]):
                    if w in set(distinguished_vertices(frame)) and c > 0:
                        base.setdefault(w, {})[_pair(e_in, e_out)] = c
            if not ok:
                continue
            for picks in itertools.product(*per_branch) if per_branch else [()]:
                cand: Candidate = {v: dict(p) for v, p in base.items()}
                for v, diagram in picks:
                    if diagram:
                        cand[v] = dict(diagram)
                if total_pairs(cand) > max_pairs:
                    continue
                if any(c > max_count for ps in cand.values() for c in ps.values()):
                    continue
                batch.append((total_mass(cand), candidate_json(cand), cand))
        batch.sort(key=lambda x: (x[0], x[1]))
        for _, _, cand in batch:
            yield cand


def _compositions(option_lists: List[List[int]], total: int) -> Iterator[Tuple[int, ...]]:
    if not option_lists:
        if total == 0:
            yield ()
        return
    head, rest = option_lists[0], option_lists[1:]
    rest_min = sum(o[0] for o in rest)
    rest_max = sum(o[-1] for o in rest)
    for c in head:
        r = total - c
        if rest_min <= r <= rest_max:
            for tail in _compositions(rest, r):
                yield (c, *tail)
