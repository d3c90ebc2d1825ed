"""Walks in a plane graph: explicit vertex and edge sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .plane_graph import PlaneGraph


@dataclass(frozen=True)
class Walk:
    vertices: Tuple[str, ...]
    edges: Tuple[str, ...]

    def __post_init__(self):
        if len(self.vertices) != len(self.edges) + 1:
            raise ValueError("walk shape mismatch")

    @staticmethod
    def from_edges(g: PlaneGraph, edges: Sequence[str], start: str) -> "Walk":
        verts = [start]
        for e in edges:
            verts.append(g.other_end(e, verts[-1]))
        return Walk(tuple(verts), tuple(edges))

    @staticmethod
    def from_vertices(g: PlaneGraph, vertices: Sequence[str]) -> "Walk":
        edges: List[str] = []
        for a, b in zip(vertices, vertices[1:]):
            for e in g.rotation[a]:
                if g.other_end(e, a) == b:
                    edges.append(e)
                    break
            else:
                raise KeyError((a, b))
        return Walk(tuple(vertices), tuple(edges))

    def check(self, g: PlaneGraph) -> None:
        for i, e in enumerate(self.edges):
            if set(g.edges[e]) != {self.vertices[i], self.vertices[i + 1]} and (
                g.edges[e][0] != g.edges[e][1]
            ):
                if g.other_end(e, self.vertices[i]) != self.vertices[i + 1]:
                    raise ValueError(f"edge {e!r} does not join walk step {i}")

    @property
    def start(self) -> str:
        return self.vertices[0]

    @property
    def end(self) -> str:
        return self.vertices[-1]

    def reversed(self) -> "Walk":
        return Walk(tuple(reversed(self.vertices)), tuple(reversed(self.edges)))

    def is_closed(self) -> bool:
        return len(self.edges) > 0 and self.start == self.end

    def __len__(self) -> int:
        return len(self.edges)
