"""Embedding of the enriched graph around a tree: colors and copy orders.

Tree vertices are 2-colored; parallel bundles of tree edges are flipped so
that red vertices read copy indices ascending clockwise and green vertices
ascending counter-clockwise.  Every tree vertex then gets ``order_v``: the
enumeration of all tree-parallel copies starting at the lowest copy of its
lexicographically least tree edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Set, Tuple

from .plane_graph import NotATree, ParallelClass, PlaneGraph, _outer_corner
from .steiner import SteinerTree


@dataclass
class TreeEmbedding:
    graph: PlaneGraph                      # enriched, re-embedded
    tree: SteinerTree                      # 0-copies only
    colors: Dict[str, str]                 # tree vertex -> red | green
    order_v: Dict[str, Tuple[str, ...]]
    star: Optional[str] = None
    pairs: Optional[Tuple[Tuple[str, str], ...]] = None
    _order_pos: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def __post_init__(self):
        self._order_pos = {
            v: {e: i for i, e in enumerate(seq)} for v, seq in self.order_v.items()
        }

    @property
    def tree_edges(self) -> FrozenSet[str]:
        return self.tree.edges

    def on_tree(self, v: str) -> bool:
        return v in self.tree.vertices

    def is_tree_parallel(self, e: str) -> bool:
        return self.graph.base_edge(e) in self.tree.edges

    def order_pos(self, v: str, e: str) -> int:
        return self._order_pos[v][e]

    def copy(self, base: str, index: int) -> str:
        return self.graph.parallel_classes[base].copy(index)

    @property
    def half_width(self) -> int:
        any_class = next(iter(self.graph.parallel_classes.values()))
        return any_class.half_width

    def hub_vertices(self) -> FrozenSet[str]:
        t = self.tree
        return t.vertices_of_degree(1) | t.branch_vertices()

    def deg2_paths(self) -> List[List[str]]:
        return self.tree.maximal_degree2_paths()


def two_color_tree(tree_adj: Mapping[str, List[str]]) -> Dict[str, str]:
    root = min(tree_adj)
    colors = {root: "red"}
    frontier = [root]
    while frontier:
        nxt = []
        for v in frontier:
            for w in tree_adj[v]:
                if w not in colors:
                    colors[w] = "green" if colors[v] == "red" else "red"
                    nxt.append(w)
        frontier = sorted(nxt)
    return colors


def orient_edges_order(
    h: PlaneGraph, tree_edges: Iterable[str], terminals: Iterable[str],
    star: Optional[str] = None,
    pairs: Optional[Tuple[Tuple[str, str], ...]] = None,
) -> TreeEmbedding:
    """Re-embed bundles of tree edges so both endpoints agree on copy order."""
    tree_edges = sorted(set(tree_edges))
    for e in tree_edges:
        if e not in h.parallel_classes:
            raise NotATree(f"tree edge {e!r} is not a 0-copy of the enrichment")
    adj: Dict[str, List[str]] = {}
    for e in tree_edges:
        u, w = h.edges[e]
        adj.setdefault(u, []).append(w)
        adj.setdefault(w, []).append(u)
    if len(tree_edges) != len(adj) - 1:
        raise NotATree("edge count does not match a tree")
    colors = two_color_tree({v: sorted(ws) for v, ws in adj.items()})
    if len(colors) != len(adj):
        raise NotATree("tree is disconnected")

    flips: Set[str] = set()
    classes = dict(h.parallel_classes)
    for e in tree_edges:
        cls = h.parallel_classes[e]
        if colors[cls.asc_endpoint] != "red":
            flips.add(e)
            u, w = h.edges[e]
            other = w if cls.asc_endpoint == u else u
            classes[e] = ParallelClass(e, cls.copies, other)

    if flips:
        rotation: Dict[str, List[str]] = {}
        for v in h.vertices:
            rot = list(h.rotation[v])
            i = 0
            while i < len(rot):
                base = h.base_edge(rot[i])
                if base in flips:
                    width = len(h.parallel_classes[base].copies)
                    rot[i:i + width] = list(reversed(rot[i:i + width]))
                    i += width
                else:
                    i += 1
            rotation[v] = rot
        # outer face: re-anchor a witness corner between two distinct bundles
        witness = None
        for v in sorted(h.vertices):
            for e in h.rotation[v]:
                if h.corner_face(v, e) != h.outer_face:
                    continue
                if h.base_edge(e) != h.base_edge(h.rot_next(v, e)):
                    witness = (v, e)
                    break
            if witness:
                break
        if witness is None:
            raise NotATree("no usable outer corner")
        wv, we = witness
        base = h.base_edge(we)
        if base in flips:
            we = h.parallel_classes[base].copy(-h.copy_index(we))
        h = PlaneGraph(
            h.vertices, h.edges, rotation, outer_face=None,
            radial_vertices=h.radial_vertices, parallel_classes=classes,
        )
        h = h.with_outer(h.corner_face(wv, we))

    order_v: Dict[str, Tuple[str, ...]] = {}
    tree_set = set(tree_edges)
    for v in sorted(adj):
        entries = [e for e in h.rotation[v] if h.base_edge(e) in tree_set]
        if colors[v] == "green":
            entries = list(reversed(entries))
        least = min(e for e in tree_set if v in h.edges[e])
        m = h.parallel_classes[least].half_width
        start = entries.index(h.parallel_classes[least].copy(-m))
        order_v[v] = tuple(entries[start:] + entries[:start])

    tree = SteinerTree(h, tree_set, terminals)
    return TreeEmbedding(h, tree, colors, order_v, star=star, pairs=pairs)
