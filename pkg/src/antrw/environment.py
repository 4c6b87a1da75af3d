"""Crossing-number field and the quantities derived from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .graph import Graph, GraphError


class CrossingField:
    """Net signed crossing counts on the directed edges of a graph.

    One integer is stored per undirected edge ``{u, v}`` with ``u < v`` and
    read as ``c(u, v)``; ``c(v, u)`` is its negation, so antisymmetry holds by
    construction. Fields are mutable and owned by a single walker.
    """

    __slots__ = ("graph", "values")

    def __init__(self, graph: Graph, values: np.ndarray | None = None):
        self.graph = graph
        if values is None:
            values = np.zeros(graph.num_edges, dtype=np.int64)
        else:
            values = np.array(values, dtype=np.int64)
            if values.shape != (graph.num_edges,):
                raise ValueError(f"expected {graph.num_edges} edge values, got shape {values.shape}")
        self.values = values

    @classmethod
    def from_crossings(cls, graph: Graph, crossings: Mapping[tuple[int, int], int]) -> "CrossingField":
        """Field with ``c(u, v) = crossings[(u, v)]`` for each listed directed edge."""
        f = cls(graph)
        for (u, v), c in crossings.items():
            e, sign = graph.edge_id(u, v)
            f.values[e] = sign * int(c)
        return f

    def crossing(self, u: int, v: int) -> int:
        e, sign = self.graph.edge_id(u, v)
        return sign * int(self.values[e])

    def record_step(self, frm: int, to: int) -> "CrossingField":
        """Count one jump ``frm -> to`` in place; returns ``self``."""
        e, sign = self.graph.edge_id(frm, to)
        self.values[e] += sign
        return self

    def copy(self) -> "CrossingField":
        return CrossingField(self.graph, self.values.copy())

    def is_zero(self) -> bool:
        return not self.values.any()

    def nonzero(self) -> dict[tuple[int, int], int]:
        """Non-zero entries keyed by ``(u, v)`` with ``u < v``."""
        return {(int(self.graph.edges[e, 0]), int(self.graph.edges[e, 1])): int(self.values[e])
                for e in np.flatnonzero(self.values)}

    def to_json(self) -> dict[str, int]:
        return {f"{u}-{v}": c for (u, v), c in self.nonzero().items()}

    @classmethod
    def from_json(cls, graph: Graph, data: Mapping[str, int]) -> "CrossingField":
        f = cls(graph)
        for key, c in data.items():
            u, v = (int(p) for p in key.split("-"))
            if u >= v:
                raise ValueError(f"field key {key!r} must have u < v")
            e, _ = graph.edge_id(u, v)
            f.values[e] = int(c)
        return f

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CrossingField):
            return NotImplemented
        return self.graph is other.graph and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"CrossingField({self.to_json()})"

    def slot_crossings(self) -> np.ndarray:
        """Crossing number along every adjacency slot (CSR order)."""
        g = self.graph
        return g.slot_sign * self.values[g.slot_edge]

    def incident(self, u: int) -> tuple[list[int], np.ndarray]:
        """Neighbours of ``u`` and ``c(u, .)`` towards each of them."""
        g = self.graph
        nbrs = g.neighbors(u)
        lo, hi = g.indptr[u], g.indptr[u + 1]
        return nbrs, g.slot_sign[lo:hi] * self.values[g.slot_edge[lo:hi]]


def crossing(f: CrossingField, u: int, v: int) -> int:
    return f.crossing(u, v)


def record_step(f: CrossingField, frm: int, to: int) -> CrossingField:
    return f.record_step(frm, to)


def flow(f: CrossingField, u: int) -> int:
    """Total flow out of ``u``: the sum of ``c(u, v)`` over neighbours."""
    return int(f.incident(u)[1].sum())


def flows(f: CrossingField) -> np.ndarray:
    g = f.graph
    out = np.zeros(g.num_vertices, dtype=np.int64)
    np.add.at(out, np.repeat(np.arange(g.num_vertices), g.degrees()), f.slot_crossings())
    return out


def flow_pattern_holds(f: CrossingField, start: int, position: int) -> bool:
    """Flow pattern of a field produced by a walk from ``start`` now at
    ``position``: ``+1`` at the start and ``-1`` at the position when they
    differ, zero everywhere else."""
    expected = np.zeros(f.graph.num_vertices, dtype=np.int64)
    if start != position:
        expected[start] = 1
        expected[position] = -1
    return bool(np.array_equal(flows(f), expected))


def positivity_violations(f: CrossingField, closed: bool) -> list[tuple[str, int]]:
    """Vertices where a good-edge positivity statement fails.

    ``"nonzero"``: on a closed trajectory, a vertex with a non-zero incident
    crossing must have all good edges strictly positive. ``"minus2"``: a
    vertex with an incident crossing <= -2 must have all good edges >= 1.
    Meaningful for reachable fields only.
    """
    bad = []
    for u in range(f.graph.num_vertices):
        _, c = f.incident(u)
        top = int(c.max())
        if closed and c.any() and top <= 0:
            bad.append(("nonzero", u))
        if int(c.min()) <= -2 and top < 1:
            bad.append(("minus2", u))
    return bad


def good_edges(f: CrossingField, u: int) -> list[int]:
    """Neighbours ``v`` maximising ``c(u, v)``, ascending; never empty."""
    nbrs, c = f.incident(u)
    top = c.max()
    return [v for v, cv in zip(nbrs, c) if cv == top]


def heavy_set(f: CrossingField) -> set[int]:
    """Vertices touching an edge whose crossing has absolute value >= 2."""
    heavy = f.graph.edges[np.abs(f.values) >= 2]
    return set(heavy.ravel().tolist())


@dataclass(frozen=True)
class Circuit:
    """Closed path of distinct vertices ``u_0 -> ... -> u_{l-1} -> u_0``.

    The vertex order is the direction of travel. Adjacency is checked
    against a graph with :meth:`validate`.
    """

    vertices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        if len(self.vertices) < 3:
            raise ValueError(f"a circuit needs at least 3 vertices, got {self.vertices}")
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError(f"circuit vertices must be distinct, got {self.vertices}")

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i: int) -> int:
        return self.vertices[i % len(self.vertices)]

    def validate(self, g: Graph) -> "Circuit":
        for u, v in self.directed_edges():
            if not g.has_edge(u, v):
                raise GraphError(f"circuit {self.vertices} uses non-edge ({u}, {v})")
        return self

    def directed_edges(self) -> list[tuple[int, int]]:
        vs = self.vertices
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    def rotated_to(self, v: int) -> "Circuit":
        i = self.vertices.index(v)
        return Circuit(self.vertices[i:] + self.vertices[:i])

    def reversed(self) -> "Circuit":
        return Circuit(self.vertices[::-1])

    def canonical(self) -> "Circuit":
        """Undirected class representative: smallest vertex first, then the
        direction with the smaller second vertex."""
        fwd = self.rotated_to(min(self.vertices))
        back = fwd.reversed().rotated_to(fwd.vertices[0])
        return fwd if fwd.vertices[1] < back.vertices[1] else back

    def same_class(self, other: "Circuit") -> bool:
        return self.canonical() == other.canonical()


def circuit_gap(f: CrossingField, c: Circuit | Sequence[int]) -> int:
    """Smallest advantage of a circuit edge over a competing edge.

    ``min_j min_{y ~ u_j, y != u_{j+1}} c(u_j, u_{j+1}) - c(u_j, y)``.
    """
    if not isinstance(c, Circuit):
        c = Circuit(tuple(c))
    c.validate(f.graph)
    best = None
    for u, nxt in c.directed_edges():
        nbrs, cs = f.incident(u)
        c_next = f.crossing(u, nxt)
        for y, cy in zip(nbrs, cs):
            if y != nxt:
                d = c_next - int(cy)
                best = d if best is None else min(best, d)
    # u_{j-1} always competes with u_{j+1} on a circuit
    assert best is not None
    return best
