"""Backbone Steiner tree construction.

Four steps: an initial terminal-spanning subtree, detour removal to a
fixpoint, minimum vertex separators around each long degree-2 path, and
replacement of the middle of each long path by a route that crosses the
accompanying disjoint-path flow as little as possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .plane_graph import GraphError, Instance, PlaneGraph


class TerminalsDisconnected(GraphError):
    pass


class NonCompactWitness(GraphError):
    pass


class EmptyRing(GraphError):
    """No cycle separates the two separators; legal on tiny instances."""


@dataclass(frozen=True)
class AlgorithmConstants:
    """Threshold family, monotone in k; see ``for_k`` for the stock values."""

    k: int
    alpha_dist: int
    alpha_long: int
    alpha_pat: int
    alpha_sep: int
    alpha_winding: int
    alpha_seg_groups: int
    alpha_potential: int
    alpha_mul: int
    alpha_npair: int

    @staticmethod
    def for_k(k: int, c: int = 1) -> "AlgorithmConstants":
        p = 2 ** (c * k)
        sep = math.ceil(3.5 * p) + 2
        seg = 10 ** 5 * k * p
        pot = (10 ** 4 * 4 ** (c * k) + 1) * seg
        return AlgorithmConstants(
            k=k,
            alpha_dist=4 * p,
            alpha_long=10 ** 4 * p,
            alpha_pat=100 * p,
            alpha_sep=sep,
            alpha_winding=60 * sep + 11,
            alpha_seg_groups=seg,
            alpha_potential=pot,
            alpha_mul=2 * pot,
            alpha_npair=48 * k,
        )

    @staticmethod
    def relaxed(k: int, alpha_long: int = 12, alpha_pat: int = 4) -> "AlgorithmConstants":
        """Desk-scale profile: small path thresholds so rings actually occur."""
        if alpha_pat % 2 or 2 * alpha_pat >= alpha_long:
            raise ValueError("need even alpha_pat with 2*alpha_pat < alpha_long")
        stock = AlgorithmConstants.for_k(k)
        return AlgorithmConstants(
            k=k,
            alpha_dist=stock.alpha_dist,
            alpha_long=alpha_long,
            alpha_pat=alpha_pat,
            alpha_sep=stock.alpha_sep,
            alpha_winding=stock.alpha_winding,
            alpha_seg_groups=stock.alpha_seg_groups,
            alpha_potential=stock.alpha_potential,
            alpha_mul=stock.alpha_mul,
            alpha_npair=stock.alpha_npair,
        )


class SteinerTree:
    """Subtree of a plane graph whose leaves are exactly the terminals."""

    def __init__(self, graph: PlaneGraph, edges: Iterable[str], terminals: Iterable[str]):
        self.graph = graph
        self.edges = frozenset(edges)
        self.terminals = frozenset(terminals)
        self.adj: Dict[str, List[str]] = {}
        for e in sorted(self.edges):
            u, w = graph.edges[e]
            self.adj.setdefault(u, []).append(e)
            self.adj.setdefault(w, []).append(e)
        self.vertices = frozenset(self.adj)
        self._check_tree()
        self.leaves = frozenset(v for v, es in self.adj.items() if len(es) == 1)
        if self.leaves != self.terminals:
            raise GraphError(
                f"leaves {sorted(self.leaves)} differ from terminals {sorted(self.terminals)}"
            )

    def _check_tree(self) -> None:
        if not self.edges:
            raise GraphError("empty Steiner tree")
        if len(self.edges) != len(self.vertices) - 1:
            raise GraphError("edge count does not match a tree")
        seen = set()
        stack = [min(self.vertices)]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            for e in self.adj[v]:
                w = self.graph.other_end(e, v)
                if w not in seen:
                    stack.append(w)
        if seen != self.vertices:
            raise GraphError("Steiner tree is disconnected")

    def degree(self, v: str) -> int:
        return len(self.adj.get(v, ()))

    def vertices_of_degree(self, d: int) -> FrozenSet[str]:
        return frozenset(v for v in self.vertices if self.degree(v) == d)

    def branch_vertices(self) -> FrozenSet[str]:
        return frozenset(v for v in self.vertices if self.degree(v) >= 3)

    def tree_neighbors(self, v: str) -> List[str]:
        return [self.graph.other_end(e, v) for e in self.adj[v]]

    def path(self, u: str, v: str) -> List[str]:
        """Vertex sequence of the unique tree path from u to v."""
        prev: Dict[str, Optional[str]] = {u: None}
        stack = [u]
        while stack:
            x = stack.pop()
            if x == v:
                break
            for w in sorted(self.tree_neighbors(x)):
                if w not in prev:
                    prev[w] = x
                    stack.append(w)
        if v not in prev:
            raise GraphError(f"{u!r} and {v!r} not connected in tree")
        out = [v]
        while prev[out[-1]] is not None:
            out.append(prev[out[-1]])
        return list(reversed(out))

    def edge_between(self, u: str, v: str) -> str:
        for e in self.adj[u]:
            if self.graph.other_end(e, u) == v:
                return e
        raise KeyError((u, v))

    def path_edges(self, path: Sequence[str]) -> List[str]:
        return [self.edge_between(a, b) for a, b in zip(path, path[1:])]

    def maximal_degree2_paths(self) -> List[List[str]]:
        """Vertex paths between consecutive non-degree-2 vertices."""
        hubs = sorted(self.vertices_of_degree(1) | self.branch_vertices())
        out: List[List[str]] = []
        seen_edges: Set[str] = set()
        for h in hubs:
            for e in self.adj[h]:
                if e in seen_edges:
                    continue
                path = [h]
                cur, edge = h, e
                while True:
                    seen_edges.add(edge)
                    nxt = self.graph.other_end(edge, cur)
                    path.append(nxt)
                    if self.degree(nxt) != 2:
                        break
                    cur = nxt
                    e1, e2 = self.adj[nxt]
                    edge = e2 if e1 == edge else e1
                out.append(path)
        out.sort(key=lambda p: (min(p[0], p[-1]), max(p[0], p[-1]), p))
        return out


@dataclass(frozen=True)
class DetourWitness:
    u: str
    v: str
    path: Tuple[str, ...]  # vertex sequence of the replacement route


@dataclass
class LongPathRecord:
    """Everything attached to one long maximal degree-2 path."""

    inner: str                      # endpoint whose side avoids the outer terminal
    outer: str
    path: Tuple[str, ...]           # in R^2, oriented inner -> outer
    sep_inner: Tuple[str, ...]      # separator cycles, in H cycle order
    sep_outer: Tuple[str, ...]
    anchor_inner: str               # u' on the path, inside sep_inner
    anchor_outer: str
    cycles: Tuple[Tuple[str, ...], ...] = ()
    eta: Tuple[str, ...] = ()       # reference path vertices, sep_inner -> sep_outer
    flow_paths: Tuple[Tuple[str, ...], ...] = ()
    replacement: Tuple[str, ...] = ()


@dataclass
class BackboneTree:
    tree: SteinerTree                       # R^3
    pre_tree: SteinerTree                   # R^2 (detour-free)
    constants: AlgorithmConstants
    records: List[LongPathRecord] = field(default_factory=list)


def initial_steiner_tree(h: PlaneGraph, terminals: Iterable[str]) -> SteinerTree:
    """BFS spanning tree pruned down to the terminal leaves."""
    terms = sorted(set(terminals))
    root = terms[0]
    parent_edge: Dict[str, str] = {}
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for e in h.rotation[v]:
                w = h.other_end(e, v)
                if w not in seen:
                    seen.add(w)
                    parent_edge[w] = e
                    nxt.append(w)
        frontier = sorted(nxt)
    for t in terms:
        if t not in seen:
            raise TerminalsDisconnected(f"terminal {t!r} unreachable")
    adj: Dict[str, List[str]] = {v: [] for v in seen}
    for w, e in parent_edge.items():
        u = h.other_end(e, w)
        adj[u].append(e)
        adj[w].append(e)
    keep = set(parent_edge.values())
    degree = {v: len(es) for v, es in adj.items()}
    leaves = sorted(v for v, d in degree.items() if d <= 1 and v not in terms)
    while leaves:
        v = leaves.pop()
        for e in adj[v]:
            if e in keep:
                keep.discard(e)
                w = h.other_end(e, v)
                degree[w] -= 1
                degree[v] -= 1
                if degree[w] == 1 and w not in terms:
                    leaves.append(w)
    return SteinerTree(h, keep, terms)


def find_detour(h: PlaneGraph, tree: SteinerTree) -> Optional[DetourWitness]:
    """Search every maximal degree-2 path for a strictly shorter side route."""
    terminals = tree.terminals
    for path in tree.maximal_degree2_paths():
        u, v = path[0], path[-1]
        interior = set(path[1:-1])
        comp_u = _tree_component(tree, u, interior)
        comp_v = _tree_component(tree, v, interior)
        banned = (interior | terminals) - {u, v}
        dist: Dict[str, float] = {x: 0 for x in sorted(comp_u) if x not in banned}
        prev: Dict[str, Optional[Tuple[str, str]]] = {x: None for x in dist}
        frontier = sorted(dist)
        goal = None
        while frontier and goal is None:
            nxt = []
            for x in frontier:
                for e in h.rotation[x]:
                    w = h.other_end(e, x)
                    if w in banned or w in dist:
                        continue
                    dist[w] = dist[x] + 1
                    prev[w] = (x, e)
                    if w in comp_v:
                        goal = w
                        break
                    nxt.append(w)
                if goal is not None:
                    break
            frontier = sorted(nxt)
        if goal is None:
            continue
        if dist[goal] < len(path) - 1:
            route = [goal]
            while prev[route[-1]] is not None:
                route.append(prev[route[-1]][0])
            route.reverse()
            return DetourWitness(u, v, tuple(route))
    return None


def _tree_component(tree: SteinerTree, root: str, removed: Set[str]) -> Set[str]:
    seen = {root}
    stack = [root]
    while stack:
        x = stack.pop()
        for w in tree.tree_neighbors(x):
            if w not in removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def undetour(tree: SteinerTree, witness: DetourWitness) -> SteinerTree:
    """Splice the witness route in place of the old path interior and prune."""
    h = tree.graph
    path = tree.path(witness.u, witness.v)
    if len(witness.path) - 1 >= len(path) - 1:
        raise NonCompactWitness("witness route is not shorter")
    interior = set(path[1:-1])
    if (set(witness.path[1:-1]) & (tree.vertices - interior)) or (
        set(witness.path) & (tree.terminals - {witness.u, witness.v})
    ):
        raise NonCompactWitness("witness route touches the tree interior")
    drop = set(tree.path_edges(path))
    keep = set(tree.edges) - drop
    for a, b in zip(witness.path, witness.path[1:]):
        keep.add(_any_edge(h, a, b))
    # prune non-terminal leaves
    adj: Dict[str, List[str]] = {}
    for e in keep:
        u, w = h.edges[e]
        adj.setdefault(u, []).append(e)
        adj.setdefault(w, []).append(e)
    changed = True
    while changed:
        changed = False
        for v in sorted(adj):
            if len(adj[v]) == 1 and v not in tree.terminals:
                e = adj[v][0]
                keep.discard(e)
                w = h.other_end(e, v)
                adj[w].remove(e)
                del adj[v]
                changed = True
    out = SteinerTree(h, keep, tree.terminals)
    if len(out.edges) >= len(tree.edges):
        raise NonCompactWitness("undetour did not shrink the tree")
    return out


def _any_edge(h: PlaneGraph, a: str, b: str) -> str:
    for e in h.rotation[a]:
        if h.other_end(e, a) == b:
            return e
    raise KeyError((a, b))


def undetour_to_fixpoint(h: PlaneGraph, tree: SteinerTree) -> SteinerTree:
    while True:
        w = find_detour(h, tree)
        if w is None:
            return tree
        tree = undetour(tree, w)


# -- Step III: separators ----------------------------------------------------


def _long_path_sides(
    tree: SteinerTree, path: Sequence[str], u: str, constants: AlgorithmConstants
) -> Tuple[Set[str], Set[str]]:
    """The two vertex sets an endpoint's separator must part."""
    pat = constants.alpha_pat
    if path[0] != u:
        path = list(reversed(path))
    p_close = path[:pat]          # the alpha_pat vertices nearest u
    p_closer = path[: pat // 2]   # the alpha_pat/2 nearest
    comp_u = _tree_component(tree, u, set(p_close) - {u})
    a = set(p_closer) | comp_u
    b = set(tree.vertices) - a - set(p_close)
    return a, b


def compute_separator(
    h: PlaneGraph,
    tree: SteinerTree,
    path: Sequence[str],
    u: str,
    constants: AlgorithmConstants,
) -> Tuple[str, ...]:
    """Minimum vertex separator between the u-side and the far side, as a cycle."""
    a, b = _long_path_sides(tree, path, u, constants)
    if not a or not b:
        raise GraphError("long path too short for separator sides")
    sep = minimum_vertex_separator(h, a, b)
    return order_cycle(h, sep)


def minimum_vertex_separator(h: PlaneGraph, a: Set[str], b: Set[str]) -> FrozenSet[str]:
    """Min vertex A-B cut via unit-capacity augmentation on the split graph."""
    if a & b:
        raise GraphError("sides overlap")
    # nodes: ("in", v) / ("out", v) for middle vertices; "A", "B" contracted.
    def node_out(v):
        return "A" if v in a else ("B" if v in b else ("out", v))

    def node_in(v):
        return "A" if v in a else ("B" if v in b else ("in", v))

    arcs: Dict[object, Set[object]] = {}

    def add(x, y):
        arcs.setdefault(x, set()).add(y)

    middles = sorted(h.vertices - a - b)
    for v in middles:
        add(("in", v), ("out", v))
    seen_pairs = set()
    for e in sorted(h.edges):
        u, w = h.edges[e]
        if (u, w) in seen_pairs or (w, u) in seen_pairs:
            continue
        seen_pairs.add((u, w))
        if (u in a and w in b) or (u in b and w in a):
            raise GraphError("sides are adjacent; no separator exists")
        for x, y in ((u, w), (w, u)):
            nx, ny = node_out(x), node_in(y)
            if nx == ny:
                continue
            add(nx, ny)

    # unit capacities on ("in",v)->("out",v); infinite elsewhere, realized by
    # allowing residual reversal only across used arcs.
    flow_used: Set[Tuple[object, object]] = set()
    INFCAP = len(middles) + 1

    def bfs():
        prev = {"A": None}
        q = ["A"]
        while q:
            x = q.pop(0)
            if x == "B":
                break
            for y in sorted(arcs.get(x, ()), key=repr):
                if y in prev:
                    continue
                if isinstance(x, tuple) and isinstance(y, tuple) and x[1] == y[1] and x[0] == "in":
                    if (x, y) in flow_used:
                        continue
                prev[y] = x
                q.append(y)
            # residual arcs: reversed used arcs
            for (p, qq) in flow_used:
                if qq == x and p not in prev:
                    prev[p] = x
                    q.append(p)
        if "B" not in prev:
            return None
        path = ["B"]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return list(reversed(path))

    while True:
        path = bfs()
        if path is None:
            break
        for x, y in zip(path, path[1:]):
            if (y, x) in flow_used:
                flow_used.discard((y, x))
            else:
                flow_used.add((x, y))
        if len(flow_used) > 4 * INFCAP * INFCAP:
            raise GraphError("flow failed to terminate")

    # min cut: vertices v with ("in",v) reachable and ("out",v) not
    reach = {"A"}
    stack = ["A"]
    while stack:
        x = stack.pop()
        for y in arcs.get(x, ()):
            blocked = (
                isinstance(x, tuple) and isinstance(y, tuple)
                and x[1] == y[1] and x[0] == "in" and (x, y) in flow_used
            )
            if not blocked and y not in reach:
                reach.add(y)
                stack.append(y)
        for (p, q) in flow_used:
            if q == x and p not in reach:
                reach.add(p)
                stack.append(p)
    cut = frozenset(
        v for v in middles if ("in", v) in reach and ("out", v) not in reach
    )
    if not cut:
        raise GraphError("empty separator")
    return cut


def order_cycle(h: PlaneGraph, sep: FrozenSet[str]) -> Tuple[str, ...]:
    """Order a separator as the cycle it induces (2-vertex via parallel pair ok)."""
    if len(sep) == 1:
        return tuple(sep)
    if len(sep) == 2:
        u, v = sorted(sep)
        links = [e for e in h.rotation[u] if h.other_end(e, u) == v]
        if len(links) < 2:
            raise GraphError("two-vertex separator induces no 2-gon")
        return (u, v)
    adj: Dict[str, List[str]] = {v: [] for v in sep}
    for v in sorted(sep):
        for e in h.rotation[v]:
            w = h.other_end(e, v)
            if w in sep and w not in adj[v]:
                adj[v].append(w)
    for v in sep:
        if len(adj[v]) != 2:
            raise GraphError(f"separator does not induce a cycle at {v!r}")
    start = min(sep)
    cycle = [start, min(adj[start])]
    while True:
        a, b = cycle[-2], cycle[-1]
        nxt = adj[b][0] if adj[b][1] == a else adj[b][1]
        if nxt == start:
            break
        cycle.append(nxt)
    if len(cycle) != len(sep):
        raise GraphError("separator induces more than one cycle")
    return tuple(cycle)


def separates(h: PlaneGraph, sep: Iterable[str], a: Iterable[str], b: Iterable[str]) -> bool:
    """BFS reachability check that sep parts a from b in h."""
    blocked = set(sep)
    a_side = [x for x in sorted(set(a)) if x not in blocked]
    b_set = set(b) - blocked
    seen = set(a_side)
    stack = list(a_side)
    while stack:
        v = stack.pop()
        if v in b_set:
            return False
        for w in h.neighbors(v):
            if w not in blocked and w not in seen:
                seen.add(w)
                stack.append(w)
    return True


# -- Step IV: concentric cycles, flows, replacement paths --------------------


def cycle_edge_set(h: PlaneGraph, cycle: Sequence[str]) -> List[str]:
    if len(cycle) == 1:
        return []
    if len(cycle) == 2:
        links = sorted(e for e in h.rotation[cycle[0]] if h.other_end(e, cycle[0]) == cycle[1])
        return links[:2]
    return [_any_edge(h, a, b) for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]])]


def concentric_cycles(
    h: PlaneGraph,
    sep_inner: Sequence[str],
    sep_outer: Sequence[str],
) -> Tuple[List[Tuple[str, ...]], Tuple[str, ...]]:
    """Peel base-vertex cycles separating the two separator cycles, inner first.

    Returns the concentric sequence together with a reference path through
    one base vertex per cycle, connected via radial vertices.
    """
    base = h.vertices - h.radial_vertices
    inner_set, outer_set = set(sep_inner), set(sep_outer)
    ring = _ring_vertices(h, tuple(sep_inner), tuple(sep_outer))
    current = sorted((ring & base) - inner_set - outer_set)
    alive = set(current)
    cycles: List[Tuple[str, ...]] = []
    while True:
        _prune_low_degree(h, alive, base)
        cyc = _outer_boundary_cycle(h, alive, base, inner_set)
        if cyc is None:
            break
        cycles.append(cyc)
        alive -= set(cyc)
    cycles.reverse()  # innermost first
    if not cycles:
        raise EmptyRing("no base cycle separates the two interfaces")
    eta = _reference_path(h, list(sep_inner), list(sep_outer), cycles, ring)
    return cycles, eta


def _ring_vertices(h: PlaneGraph, inner: Tuple[str, ...], outer: Tuple[str, ...]) -> Set[str]:
    """Vertices on or between two nested cycles (given in cycle order)."""
    inside_inner = h.cycle_interior_faces(cycle_edge_set(h, inner))
    inside_outer = h.cycle_interior_faces(cycle_edge_set(h, outer))
    hidden = set()
    for f in inside_inner:
        hidden.update(h.face_vertices[f])
    visible = set()
    for f in inside_outer:
        if f not in inside_inner:
            visible.update(h.face_vertices[f])
    return (visible - hidden) | set(inner) | set(outer)


def _prune_low_degree(h: PlaneGraph, alive: Set[str], base: FrozenSet[str]) -> None:
    changed = True
    while changed:
        changed = False
        for v in sorted(alive):
            deg = sum(
                1 for e in h.rotation[v]
                if h.copy_index(e) == 0 and h.other_end(e, v) in alive and h.base_edge(e) == e
            )
            if deg <= 1:
                alive.discard(v)
                changed = True


def _outer_boundary_cycle(
    h: PlaneGraph, alive: Set[str], base: FrozenSet[str], inner_set: Set[str]
) -> Optional[Tuple[str, ...]]:
    """Outermost simple cycle of the surviving base subgraph enclosing inner_set."""
    edges = [
        e for e in sorted(h.edges)
        if h.base_edge(e) == e
        and h.edges[e][0] in alive and h.edges[e][1] in alive
    ]
    if not edges:
        return None
    for cyc in _boundary_cycles(h, set(edges)):
        if h.cycle_encloses(cycle_edge_set(h, cyc), inner_set):
            return cyc
    return None


def _boundary_cycles(h: PlaneGraph, edges: Set[str]):
    """Simple cycles on the outer boundary of the kept sub-embedding."""
    keep_vertices = frozenset(v for e in edges for v in h.edges[e])
    regions = h.face_regions(keep_vertices, frozenset(edges))
    outer_region = regions[h.outer_face]
    # darts whose face lies in the outer region but whose edge is kept
    bound = [
        (e, s) for e in sorted(edges) for s in (0, 1)
        if regions[h.dart_face[(e, s)]] == outer_region
    ]
    seen = set()
    for d0 in bound:
        if d0 in seen:
            continue
        walk = []
        cur = d0
        while cur not in seen:
            seen.add(cur)
            walk.append(cur)
            # next boundary dart: rotate from reverse(cur) at head until a kept edge
            v = h.dart_head(cur)
            e = cur[0]
            while True:
                e = h.rot_prev(v, e)
                if e in edges:
                    break
            cur = h.dart_from(e, v)
        # peel simple cycles from the closed walk
        stack: List[str] = []
        pos: Dict[str, int] = {}
        for d in walk + [walk[0]]:
            v = h.dart_tail(d)
            if v in pos:
                cyc = stack[pos[v]:]
                if len(cyc) >= 3:
                    yield tuple(cyc)
                for x in stack[pos[v] + 1:]:
                    pos.pop(x, None)
                del stack[pos[v] + 1:]
            else:
                pos[v] = len(stack)
                stack.append(v)


def _reference_path(
    h: PlaneGraph,
    sep_inner: List[str],
    sep_outer: List[str],
    cycles: List[Tuple[str, ...]],
    ring: Set[str],
) -> Tuple[str, ...]:
    """Layered path: one base vertex per cycle, radial connectors between."""
    base = h.vertices - h.radial_vertices
    layers: List[List[str]] = [sorted(set(sep_inner))]
    layers += [sorted(set(c)) for c in cycles]
    layers.append(sorted(set(sep_outer)))
    special = set(sep_inner) | set(sep_outer)
    for c in cycles:
        special |= set(c)
    connectors_ok = (ring - base) - set(sep_inner) - set(sep_outer)

    # step relation: direct edge, or two edges via an unused radial vertex
    prev: Dict[Tuple[int, str], Tuple[Optional[Tuple[int, str]], Tuple[str, ...]]] = {}
    frontier = [(0, v) for v in layers[0]]
    for node in frontier:
        prev[node] = (None, (node[1],))
    found = None
    li = 0
    while li < len(layers) - 1 and frontier:
        nxt = []
        for node in frontier:
            _, v = node
            for w in layers[li + 1]:
                hop = _hop(h, v, w, connectors_ok, special)
                if hop is None:
                    continue
                tgt = (li + 1, w)
                if tgt in prev:
                    continue
                prev[tgt] = (node, hop)
                nxt.append(tgt)
        frontier = nxt
        li += 1
    finals = [n for n in prev if n[0] == len(layers) - 1]
    if not finals:
        raise EmptyRing("no reference path through the cycles")
    end = min(finals)
    out: List[str] = []
    node = end
    while node is not None:
        back, hop = prev[node]
        out = list(hop if back is None else hop[1:])[::-1] + out
        node = back
    # drop accidental duplicate connectors (distinct by construction)
    if len(set(out)) != len(out):
        raise EmptyRing("reference path self-intersects")
    return tuple(out)


def _hop(
    h: PlaneGraph, v: str, w: str, connectors: Set[str], special: Set[str]
) -> Optional[Tuple[str, ...]]:
    direct = None
    for e in h.rotation[v]:
        if h.other_end(e, v) == w:
            direct = (v, w)
            break
    if direct:
        return direct
    nv = set()
    for e in h.rotation[v]:
        x = h.other_end(e, v)
        if x in connectors and x not in special:
            nv.add(x)
    for x in sorted(nv):
        for e in h.rotation[x]:
            if h.other_end(e, x) == w:
                return (v, x, w)
    return None


def min_flow_linkage(
    h: PlaneGraph,
    ring: Set[str],
    sep_inner: Sequence[str],
    sep_outer: Sequence[str],
    cycles: Sequence[Tuple[str, ...]],
) -> List[Tuple[str, ...]]:
    """Maximum vertex-disjoint base-path family between the two interfaces.

    Among maximum families, minimizes the number of traversed edges that do
    not lie on the concentric cycles (min-cost flow, unit vertex caps).
    """
    base = h.vertices - h.radial_vertices
    allowed = (ring & base)
    src_set = sorted(set(sep_inner) & base)
    dst_set = sorted(set(sep_outer) & base)
    cycle_edges = set()
    for c in cycles:
        cycle_edges.update(cycle_edge_set(h, c))

    # arcs: (node -> {node: cost}); unit capacities throughout
    SRC, DST = ("S",), ("T",)
    arcs: Dict[object, Dict[object, int]] = {}

    def add(x, y, c):
        arcs.setdefault(x, {})[y] = c

    for v in sorted(allowed):
        add(("i", v), ("o", v), 0)
    for v in src_set:
        add(SRC, ("i", v), 0)
    for v in dst_set:
        add(("o", v), DST, 0)
    seen = set()
    for e in sorted(h.edges):
        u, w = h.edges[e]
        if u not in allowed or w not in allowed:
            continue
        if h.base_edge(e) != e:
            continue
        cost = 0 if e in cycle_edges else 1
        key = (u, w) if u < w else (w, u)
        if key in seen:
            continue
        seen.add(key)
        add(("o", u), ("i", w), cost)
        add(("o", w), ("i", u), cost)

    flow: Dict[Tuple[object, object], int] = {}

    def shortest_augment() -> bool:
        # Bellman-Ford over the residual graph (costs are 0/1, graphs small)
        dist = {SRC: 0}
        prev = {}
        nodes = set(arcs) | {DST}
        for _ in range(len(nodes) + len(allowed)):
            changed = False
            for x in list(dist):
                for y, c in arcs.get(x, {}).items():
                    if flow.get((x, y), 0) == 0 and dist[x] + c < dist.get(y, 10 ** 9):
                        dist[y] = dist[x] + c
                        prev[y] = x
                        changed = True
                for (p, q), f in list(flow.items()):
                    if q == x and f and dist[x] - arcs[p][q] < dist.get(p, 10 ** 9):
                        dist[p] = dist[x] - arcs[p][q]
                        prev[p] = x
                        changed = True
            if not changed:
                break
        if DST not in dist:
            return False
        node = DST
        while node != SRC:
            p = prev[node]
            if flow.get((node, p), 0):
                flow[(node, p)] = 0
            else:
                flow[(p, node)] = 1
            node = p
        return True

    while shortest_augment():
        pass

    # decompose into vertex paths
    nxt: Dict[str, str] = {}
    starts = []
    for (x, y), f in flow.items():
        if not f:
            continue
        if x == SRC:
            starts.append(y[1])
        elif x[0] == "o" and y != DST:
            nxt[x[1]] = y[1]
    paths = []
    for s in sorted(starts):
        path = [s]
        while path[-1] in nxt:
            path.append(nxt[path[-1]])
        paths.append(tuple(path))
    return paths


def flow_linkage_cost(h: PlaneGraph, paths: Sequence[Tuple[str, ...]], cycles) -> int:
    cycle_edges = set()
    for c in cycles:
        cycle_edges.update(cycle_edge_set(h, c))
    cost = 0
    for p in paths:
        for a, b in zip(p, p[1:]):
            if _any_edge(h, a, b) not in cycle_edges:
                cost += 1
    return cost


def path_through_flow(
    h: PlaneGraph,
    allowed: Set[str],
    flow_paths: Sequence[Tuple[str, ...]],
    a_start: str,
    a_end: str,
) -> Tuple[str, ...]:
    """Replacement route crossing each flow path at most once.

    Starts from any route in the allowed region, then repeatedly splices in
    flow-path stretches while a forbidden in-between-out pattern survives;
    the number of offending flow paths strictly decreases every round.
    """
    route = _bfs_path(h, allowed, a_start, a_end)
    if route is None:
        raise GraphError(f"{a_start!r} and {a_end!r} disconnected in the ring region")
    membership = {}
    for i, q in enumerate(flow_paths):
        for v in q:
            membership[v] = i

    def offenders(r) -> List[int]:
        hits: Dict[int, List[int]] = {}
        for pos, v in enumerate(r):
            if v in membership:
                hits.setdefault(membership[v], []).append(pos)
        bad = []
        for qi, positions in hits.items():
            lo, hi = positions[0], positions[-1]
            if any(
                membership.get(r[p]) not in (None, qi) for p in range(lo + 1, hi)
            ):
                bad.append(qi)
        return sorted(bad)

    bad = offenders(route)
    while bad:
        qi = bad[0]
        q = flow_paths[qi]
        pos = [p for p, v in enumerate(route) if membership.get(v) == qi]
        lo, hi = pos[0], pos[-1]
        x, z = route[lo], route[hi]
        qpos = {v: i for i, v in enumerate(q)}
        qa, qb = qpos[x], qpos[z]
        mid = q[qa:qb + 1] if qa <= qb else tuple(reversed(q[qb:qa + 1]))
        spliced = list(route[:lo]) + list(mid) + list(route[hi + 1:])
        # drop any loops created by the splice
        seen: Dict[str, int] = {}
        out: List[str] = []
        for v in spliced:
            if v in seen:
                del out[seen[v] + 1:]
                for w in list(seen):
                    if seen[w] > seen[v]:
                        del seen[w]
            else:
                seen[v] = len(out)
                out.append(v)
        route = tuple(out)
        nxt = offenders(route)
        if len(nxt) >= len(bad):
            raise GraphError("splice loop failed to make progress")
        bad = nxt
    return tuple(route)


def _bfs_path(h: PlaneGraph, allowed: Set[str], a: str, b: str) -> Optional[Tuple[str, ...]]:
    if a not in allowed or b not in allowed:
        return None
    prev: Dict[str, Optional[str]] = {a: None}
    frontier = [a]
    while frontier and b not in prev:
        nxt = []
        for v in frontier:
            for e in h.rotation[v]:
                w = h.other_end(e, v)
                if w in allowed and w not in prev:
                    prev[w] = v
                    nxt.append(w)
        frontier = sorted(nxt)
    if b not in prev:
        return None
    out = [b]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return tuple(reversed(out))


def crossing_edge_count(h: PlaneGraph, route: Sequence[str], q: Sequence[str]) -> int:
    """Edges of the route with exactly one endpoint on the path q."""
    qs = set(q)
    n = 0
    for a, b in zip(route, route[1:]):
        if (a in qs) != (b in qs):
            n += 1
    return n


def build_backbone(
    h: PlaneGraph, inst: Instance, constants: AlgorithmConstants
) -> BackboneTree:
    """Steps I-IV composed; every structural claim is asserted on the way."""
    if inst.star is None:
        raise GraphError("instance must be niced first (no outer terminal)")
    r1 = initial_steiner_tree(h, inst.terminals)
    r2 = undetour_to_fixpoint(h, r1)
    records: List[LongPathRecord] = []
    for path in r2.maximal_degree2_paths():
        if len(path) - 1 < constants.alpha_long:
            continue
        u, v = path[0], path[-1]
        side_u = _tree_component(r2, u, set(path[1:-1]))
        star_side_v = inst.star in _tree_component(r2, v, set(path[1:-1])) or inst.star == v
        if not star_side_v and (inst.star in side_u or inst.star == u):
            u, v = v, u
            path = list(reversed(path))
        sep_u = compute_separator(h, r2, path, u, constants)
        sep_v = compute_separator(h, r2, path, v, constants)
        if not h.cycle_encloses(cycle_edge_set(h, sep_v), sep_u):
            raise GraphError("inner separator not enclosed by outer separator")
        u_prime = next(x for x in path if x in set(sep_u))
        v_prime = next(x for x in reversed(path) if x in set(sep_v))
        iu = path.index(u_prime)
        iv = len(path) - 1 - list(reversed(path)).index(v_prime)
        pat = constants.alpha_pat
        if not (pat // 2 <= iu + 1 <= pat and pat // 2 <= len(path) - iv <= pat):
            raise GraphError("anchor fell outside the expected window")
        cycles, eta = concentric_cycles(h, sep_u, sep_v)
        ring = _ring_vertices(h, sep_u, sep_v)
        flow_paths = min_flow_linkage(h, ring, sep_u, sep_v, cycles)
        comp_u = _component(h, set(sep_u) | set(sep_v), u)
        comp_v = _component(h, set(sep_u) | set(sep_v), v)
        allowed = set(h.vertices) - comp_u - comp_v
        p_star = path_through_flow(h, allowed, flow_paths, u_prime, v_prime)
        for q in flow_paths:
            if crossing_edge_count(h, p_star, q) > 2:
                raise GraphError("replacement path crosses a flow path twice")
        records.append(
            LongPathRecord(
                inner=u, outer=v, path=tuple(path),
                sep_inner=sep_u, sep_outer=sep_v,
                anchor_inner=u_prime, anchor_outer=v_prime,
                cycles=tuple(cycles), eta=eta,
                flow_paths=tuple(flow_paths), replacement=p_star,
            )
        )
    if not records:
        return BackboneTree(tree=r2, pre_tree=r2, constants=constants)
    keep = set(r2.edges)
    for rec in records:
        path = list(rec.path)
        iu, iv = path.index(rec.anchor_inner), path.index(rec.anchor_outer)
        mid = path[iu:iv + 1]
        for e in r2.path_edges(mid):
            keep.discard(e)
        for a, b in zip(rec.replacement, rec.replacement[1:]):
            keep.add(_any_edge(h, a, b))
    r3 = SteinerTree(h, keep, inst.terminals)
    for rec in records:
        a_star = _a_star_side(r3, rec)
        b_star = set(r3.vertices) - a_star
        if not separates(h, rec.sep_inner, a_star - set(rec.sep_inner), b_star - set(rec.sep_inner)):
            raise GraphError("separator stopped separating after the rewrite")
    rings = [
        _ring_vertices(h, rec.sep_inner, rec.sep_outer) for rec in records
    ]
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            if rings[i] & rings[j]:
                raise GraphError("rings of two long paths intersect")
    return BackboneTree(tree=r3, pre_tree=r2, constants=constants, records=records)


def _component(h: PlaneGraph, removed: Set[str], root: str) -> Set[str]:
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in h.neighbors(v):
            if w not in removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _a_star_side(r3: SteinerTree, rec: LongPathRecord) -> Set[str]:
    """Vertices of R^3 on the inner endpoint's side of the rewritten path."""
    u = rec.inner
    path = list(rec.path)
    iu = path.index(rec.anchor_inner)
    prefix = path[: iu + 1]
    comp = _tree_component(r3, u, set(prefix) - {u})
    return set(prefix) | comp
