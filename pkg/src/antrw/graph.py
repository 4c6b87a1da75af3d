"""Undirected simple graphs in CSR form, generators and the edge-list format."""

from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Invalid graph, vertex or generator request."""


class EdgeListError(GraphError):
    """Malformed edge-list file; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(eq=False)
class Graph:
    """Immutable finite graph with sorted adjacency.

    Build through :meth:`from_edges` or :func:`generate`; the CSR arrays and
    slot tables are what the kernels consume.
    """

    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray
    slot_edge: np.ndarray
    slot_sign: np.ndarray
    slot_rev: np.ndarray
    name: str = "custom"
    params: dict = field(default_factory=dict)
    coords: np.ndarray | None = None
    _edge_index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable[tuple[int, int]], *,
                   name: str = "custom", params: dict | None = None,
                   coords: np.ndarray | None = None) -> "Graph":
        if num_vertices < 1:
            raise GraphError("graph needs at least one vertex")
        seen: set[tuple[int, int]] = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise GraphError(f"edge ({u}, {v}) outside vertex range 0..{num_vertices - 1}")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
        edge_arr = np.array(sorted(seen), dtype=np.int64).reshape(-1, 2)
        adj: list[list[int]] = [[] for _ in range(num_vertices)]
        for u, v in edge_arr:
            adj[u].append(int(v))
            adj[v].append(int(u))
        for nbrs in adj:
            nbrs.sort()
        indptr = np.zeros(num_vertices + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in adj])
        indices = np.array([v for a in adj for v in a], dtype=np.int64)
        edge_index = {(int(u), int(v)): e for e, (u, v) in enumerate(edge_arr)}
        slot_edge = np.empty(len(indices), dtype=np.int64)
        slot_sign = np.empty(len(indices), dtype=np.int64)
        slot_rev = np.empty(len(indices), dtype=np.int64)
        slot_of: dict[tuple[int, int], int] = {}
        for u in range(num_vertices):
            for s in range(indptr[u], indptr[u + 1]):
                v = int(indices[s])
                slot_edge[s] = edge_index[(min(u, v), max(u, v))]
                slot_sign[s] = 1 if u < v else -1
                slot_of[(u, v)] = s
        for (u, v), s in slot_of.items():
            slot_rev[s] = slot_of[(v, u)]
        g = cls(indptr, indices, edge_arr, slot_edge, slot_sign, slot_rev,
                name=name, params=dict(params or {}), coords=coords,
                _edge_index=edge_index)
        if not g.is_connected():
            raise GraphError("graph is not connected")
        for arr in (indptr, indices, edge_arr, slot_edge, slot_sign, slot_rev):
            arr.setflags(write=False)
        return g

    @property
    def num_vertices(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def _check(self, u: int) -> int:
        u = int(u)
        if not 0 <= u < self.num_vertices:
            raise GraphError(f"unknown vertex {u}")
        return u

    def neighbors(self, u: int) -> list[int]:
        u = self._check(u)
        return self.indices[self.indptr[u]:self.indptr[u + 1]].tolist()

    def degree(self, u: int) -> int:
        u = self._check(u)
        return int(self.indptr[u + 1] - self.indptr[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def max_degree(self) -> int:
        return int(self.degrees().max())

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_index

    def edge_id(self, u: int, v: int) -> tuple[int, int]:
        """``(edge id, sign)`` with ``c(u, v) = sign * field[edge id]``."""
        try:
            e = self._edge_index[(min(u, v), max(u, v))]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None
        return e, (1 if u < v else -1)

    def is_connected(self) -> bool:
        return len(bfs_distances(self, [0])) == self.num_vertices

    def is_tree(self) -> bool:
        return self.num_edges == self.num_vertices - 1

    def edge_list(self) -> list[tuple[int, int]]:
        return [(int(u), int(v)) for u, v in self.edges]

    # lattice helpers, only for generators that set ``coords``

    def coord(self, u: int) -> tuple[int, ...]:
        if self.coords is None:
            raise GraphError(f"{self.name} graph has no lattice coordinates")
        return tuple(int(c) for c in self.coords[self._check(u)])

    def vertex_at(self, point: Sequence[int]) -> int:
        if self.coords is None:
            raise GraphError(f"{self.name} graph has no lattice coordinates")
        lookup = self.params.get("_lookup")
        if lookup is None:
            lookup = {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}
            self.params["_lookup"] = lookup
        try:
            return lookup[tuple(int(c) for c in point)]
        except KeyError:
            raise GraphError(f"{tuple(point)} is not a vertex of {self.name}") from None

    def norms(self) -> np.ndarray:
        """l1 norm of every vertex's lattice coordinates."""
        if self.coords is None:
            raise GraphError(f"{self.name} graph has no lattice coordinates")
        return np.abs(self.coords).sum(axis=1)

    @property
    def origin(self) -> int:
        return self.vertex_at((0,) * self.coords.shape[1]) if self.coords is not None else 0

    def inner_boundary(self, radius: int | None = None) -> frozenset[int]:
        """Vertices at l1 distance ``radius`` (default: the ball's radius)."""
        if radius is None:
            radius = self.params.get("r", self.params.get("L"))
        return frozenset(np.flatnonzero(self.norms() == radius).tolist())

    def describe(self) -> str:
        public = {k: v for k, v in self.params.items() if not k.startswith("_")}
        if not public:
            public = {"n": self.num_vertices, "m": self.num_edges}
        args = ",".join(f"{k}={v}" for k, v in public.items())
        return f"{self.name}({args})"


def neighbors(g: Graph, u: int) -> list[int]:
    return g.neighbors(u)


def max_degree(g: Graph) -> int:
    return g.max_degree()


def bfs_distances(g: Graph, sources: Iterable[int]) -> dict[int, int]:
    dist: dict[int, int] = {}
    queue: deque[int] = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    indptr, indices = g.indptr, g.indices
    while queue:
        u = queue.popleft()
        for v in indices[indptr[u]:indptr[u + 1]]:
            v = int(v)
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path(g: Graph, v: int, targets: Iterable[int]) -> list[int]:
    """Shortest path from ``v`` to the nearest vertex of ``targets``.

    Deterministic: each step goes to the smallest-id neighbour that is one
    step closer to the target set.
    """
    v = g._check(v)
    targets = {g._check(t) for t in targets}
    if not targets:
        raise GraphError("target set is empty")
    dist = bfs_distances(g, sorted(targets))
    if v not in dist:
        raise GraphError(f"no path from {v} to target set")
    path = [v]
    while dist[path[-1]] > 0:
        here = path[-1]
        path.append(next(w for w in g.neighbors(here) if dist.get(w) == dist[here] - 1))
    return path


# generators

def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], name="cycle", params={"n": n})


def complete(n: int) -> Graph:
    if n < 2:
        raise GraphError("complete graph needs n >= 2")
    return Graph.from_edges(n, itertools.combinations(range(n), 2), name="complete", params={"n": n})


def path(n: int) -> Graph:
    if n < 2:
        raise GraphError("path needs n >= 2")
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], name="path", params={"n": n})


def star(leaves: int) -> Graph:
    if leaves < 1:
        raise GraphError("star needs at least one leaf")
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)],
                            name="star", params={"leaves": leaves})


def _lattice_rect(w: int, h: int, wrap: bool) -> Graph:
    edges = []
    for y in range(h):
        for x in range(w):
            u = y * w + x
            if wrap or x + 1 < w:
                edges.append((u, y * w + (x + 1) % w))
            if wrap or y + 1 < h:
                edges.append((u, ((y + 1) % h) * w + x))
    coords = np.array([(x, y) for y in range(h) for x in range(w)], dtype=np.int64)
    name = "torus" if wrap else "grid"
    return Graph.from_edges(w * h, edges, name=name, params={"w": w, "h": h},
                            coords=None if wrap else coords)


def torus(w: int, h: int) -> Graph:
    if w < 3 or h < 3:
        raise GraphError("torus needs both sides >= 3")
    return _lattice_rect(w, h, wrap=True)


def grid(w: int, h: int) -> Graph:
    if w < 1 or h < 1 or w * h < 2:
        raise GraphError("grid needs at least two vertices")
    return _lattice_rect(w, h, wrap=False)


def zd_ball(d: int, r: int, *, name: str = "zd_ball") -> Graph:
    """Closed l1 ball of radius ``r`` in Z^d.

    Vertices are numbered in lexicographic order of their coordinates, so a
    smaller ball's numbering induces the same neighbour order as a larger
    one's; coupled walkers on nested balls rely on this.
    """
    if d < 1 or r < 1:
        raise GraphError("zd_ball needs d >= 1 and r >= 1")
    points = [p for p in itertools.product(range(-r, r + 1), repeat=d)
              if sum(abs(c) for c in p) <= r]
    index = {p: i for i, p in enumerate(points)}
    edges = []
    for p, i in index.items():
        for axis in range(d):
            q = p[:axis] + (p[axis] + 1,) + p[axis + 1:]
            j = index.get(q)
            if j is not None:
                edges.append((i, j))
    params = {"d": d, "r": r} if name == "zd_ball" else {"L": r}
    g = Graph.from_edges(len(points), edges, name=name, params=params,
                         coords=np.array(points, dtype=np.int64))
    g.params["_lookup"] = index
    return g


def z_path(L: int) -> Graph:
    """Integers ``-L..L``; vertex ``i`` sits at coordinate ``i - L``."""
    return zd_ball(1, L, name="z_path")


def triangle_leaf(L: int) -> Graph:
    """Triangle 0-1-2 with a pendant path of ``L`` edges hanging off vertex 2."""
    if L < 0:
        raise GraphError("leaf length must be >= 0")
    edges = [(0, 1), (1, 2), (0, 2)] + [(2 + i, 3 + i) for i in range(L)]
    return Graph.from_edges(3 + L, edges, name="triangle_leaf", params={"L": L})


# edge-list files

def parse_edge_list(text: str, *, name: str = "file") -> Graph:
    """Parse the edge-list format.

    One ``u v`` pair per line, ``#`` comments and blank lines skipped; ids are
    re-indexed densely in order of first appearance.
    """
    relabel: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    lines: list[int] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"expected two vertex ids, got {line!r}", lineno)
        try:
            u, v = (int(p) for p in parts)
        except ValueError:
            raise EdgeListError(f"vertex ids must be integers, got {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise EdgeListError("vertex ids must be non-negative", lineno)
        if u == v:
            raise EdgeListError(f"self-loop at vertex {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise EdgeListError(f"duplicate edge {u} {v} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        for w in (u, v):
            relabel.setdefault(w, len(relabel))
        edges.append((relabel[u], relabel[v]))
        lines.append(lineno)
    if not edges:
        raise EdgeListError("no edges found")
    n = len(relabel)
    reach = _reachable(n, edges)
    if len(reach) < n:
        bad = next(i for i, (u, _) in enumerate(edges) if u not in reach)
        raise EdgeListError("graph is disconnected: edge not reachable from the first vertex",
                            lines[bad])
    g = Graph.from_edges(n, edges, name=name)
    g.params["_original_ids"] = sorted(relabel, key=relabel.get)
    return g


def _reachable(n: int, edges: list[tuple[int, int]]) -> set[int]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def read_edge_list(path_: str | os.PathLike) -> Graph:
    with open(path_, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), name="file")


def format_edge_list(g: Graph) -> str:
    header = f"# {g.describe()}: {g.num_vertices} vertices, {g.num_edges} edges\n"
    return header + "".join(f"{u} {v}\n" for u, v in g.edge_list())


def write_edge_list(g: Graph, path_: str | os.PathLike) -> None:
    with open(path_, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g))


# compact spec strings: cycle:3, complete:4, path:5, star:4, torus:3x3,
# grid:3x3, zdball:2,9, zpath:100, triangleleaf:50, file:<path>

def _ints(arg: str, sep: str, count: int, kind: str) -> list[int]:
    parts = arg.split(sep)
    if len(parts) != count:
        raise GraphError(f"{kind} expects {count} integer(s) separated by {sep!r}, got {arg!r}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise GraphError(f"{kind} arguments must be integers, got {arg!r}") from None


def generate(spec: str) -> Graph:
    """Build a graph from a compact spec string such as ``torus:3x3``."""
    kind, sep, arg = spec.partition(":")
    kind = kind.strip().lower().replace("_", "").replace("-", "")
    if not sep:
        if kind == "triangle":
            return cycle(3)
        raise GraphError(f"graph spec {spec!r} needs the form kind:args")
    if kind == "file":
        return read_edge_list(arg)
    one = {"cycle": cycle, "complete": complete, "path": path, "star": star,
           "zpath": z_path, "triangleleaf": triangle_leaf}
    if kind in one:
        (n,) = _ints(arg, ",", 1, kind)
        g = one[kind](n)
    elif kind in ("torus", "grid"):
        w, h = _ints(arg.lower(), "x", 2, kind)
        g = torus(w, h) if kind == "torus" else grid(w, h)
    elif kind == "zdball":
        d, r = _ints(arg, ",", 2, kind)
        g = zd_ball(d, r)
    else:
        raise GraphError(f"unknown graph kind {kind!r}")
    g.params["_spec"] = spec
    return g
