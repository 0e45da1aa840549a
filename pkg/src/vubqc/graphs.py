"""Open graphs, flows and the graph families used by the hiding protocols.

Vertices are plain integers. Edges are stored as canonical ``(i, j)`` pairs
with ``i < j``. All values are immutable; every transform returns a new graph.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

__all__ = [
    "GraphError",
    "OpenGraph",
    "Flow",
    "DottedGraph",
    "ReductionPlan",
    "BRIDGE",
    "BREAK",
    "line_graph",
    "complete_graph",
    "build_brickwork",
    "brickwork_index",
    "brickwork_flow",
    "line_flow",
    "dot_transform",
    "dotted_complete",
    "bridge",
    "break_vertex",
    "reduction_plan",
    "apply_plan",
    "partition_plan",
    "validate_flow",
    "connected_components",
]

BRIDGE = "bridge"
BREAK = "break"


class GraphError(ValueError):
    """Raised for invalid graph constructions.

    ``kind`` is one of ``invalid-dimension``, ``invalid-degree``,
    ``size-mismatch``, ``invalid-partition`` or ``invalid-graph``.
    """

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def _canon(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class OpenGraph:
    """An undirected simple graph with ordered input and output lists."""

    vertices: tuple[int, ...]
    edges: frozenset
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()

    def __post_init__(self):
        verts = tuple(sorted(set(self.vertices)))
        object.__setattr__(self, "vertices", verts)
        vset = set(verts)
        canon = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise GraphError("invalid-graph", f"self-loop on {i}")
            if i not in vset or j not in vset:
                raise GraphError("invalid-graph", f"edge {e} references unknown vertex")
            canon.add(_canon(i, j))
        object.__setattr__(self, "edges", frozenset(canon))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        for v in self.inputs + self.outputs:
            if v not in vset:
                raise GraphError("invalid-graph", f"input/output {v} is not a vertex")
        adj: dict[int, set] = {v: set() for v in verts}
        for i, j in canon:
            adj[i].add(j)
            adj[j].add(i)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})

    @classmethod
    def from_edges(cls, m: int, edges: Iterable, inputs=(), outputs=()) -> "OpenGraph":
        if m < 0:
            raise GraphError("invalid-graph", "negative vertex count")
        return cls(tuple(range(m)), frozenset(tuple(e) for e in edges), tuple(inputs), tuple(outputs))

    @property
    def m(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: int) -> frozenset:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def has_edge(self, i: int, j: int) -> bool:
        return _canon(i, j) in self.edges

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def without(self, vs: Iterable[int]) -> "OpenGraph":
        """Induced subgraph with ``vs`` deleted (inputs/outputs filtered)."""
        drop = set(vs)
        keep = tuple(v for v in self.vertices if v not in drop)
        edges = frozenset(e for e in self.edges if e[0] not in drop and e[1] not in drop)
        return OpenGraph(
            keep,
            edges,
            tuple(v for v in self.inputs if v not in drop),
            tuple(v for v in self.outputs if v not in drop),
        )

    def with_io(self, inputs=(), outputs=()) -> "OpenGraph":
        return OpenGraph(self.vertices, self.edges, tuple(inputs), tuple(outputs))

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        d: dict = {"m": self.m}
        if self.vertices != tuple(range(self.m)):
            d["vertices"] = list(self.vertices)
        d["edges"] = [list(e) for e in self.sorted_edges()]
        d["inputs"] = list(self.inputs)
        d["outputs"] = list(self.outputs)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "OpenGraph":
        verts = d.get("vertices")
        if verts is None:
            verts = range(int(d["m"]))
        elif len(verts) != int(d["m"]):
            raise GraphError("invalid-graph", "vertex list does not match m")
        return cls(
            tuple(int(v) for v in verts),
            frozenset(tuple(int(x) for x in e) for e in d["edges"]),
            tuple(int(v) for v in d.get("inputs", ())),
            tuple(int(v) for v in d.get("outputs", ())),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, s: str) -> "OpenGraph":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class Flow:
    """Flow function ``f`` together with a total measurement order."""

    f: Mapping[int, int]
    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "f", dict(self.f))
        object.__setattr__(self, "order", tuple(self.order))

    def inverse(self) -> dict[int, int]:
        return {v: k for k, v in self.f.items()}

    def to_dict(self) -> dict:
        return {"f": [[k, self.f[k]] for k in sorted(self.f)], "order": list(self.order)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Flow":
        return cls({int(a): int(b) for a, b in d["f"]}, tuple(int(v) for v in d["order"]))


@dataclass(frozen=True)
class DottedGraph:
    """Result of subdividing every edge of a graph with a new vertex.

    ``edge_of`` maps each added vertex to the two original endpoints.
    """

    graph: OpenGraph
    p_vertices: frozenset
    a_vertices: frozenset
    edge_of: Mapping[int, tuple[int, int]] = field(default_factory=dict)

    def a_vertex(self, i: int, j: int) -> int:
        """Added vertex sitting between P-vertices ``i`` and ``j``."""
        key = _canon(i, j)
        for a, e in self.edge_of.items():
            if e == key:
                return a
        raise KeyError(key)


@dataclass(frozen=True)
class ReductionPlan:
    assignment: Mapping[int, str]

    def bridges(self) -> frozenset:
        return frozenset(a for a, op in self.assignment.items() if op == BRIDGE)

    def breaks(self) -> frozenset:
        return frozenset(a for a, op in self.assignment.items() if op == BREAK)


# ---------------------------------------------------------------------------
# graph families


def line_graph(m: int, with_input: bool = True) -> OpenGraph:
    """Path ``0 - 1 - ... - m-1`` with vertex 0 as input and m-1 as output."""
    if m < 1:
        raise GraphError("invalid-dimension", "line needs at least one vertex")
    g = OpenGraph.from_edges(m, [(i, i + 1) for i in range(m - 1)])
    return g.with_io((0,) if with_input else (), (m - 1,))


def line_flow(m: int) -> Flow:
    return Flow({i: i + 1 for i in range(m - 1)}, tuple(range(m)))


def complete_graph(n: int) -> OpenGraph:
    return OpenGraph.from_edges(n, itertools.combinations(range(n), 2))


def brickwork_index(rows: int, i: int, j: int) -> int:
    """Vertex id of brickwork site (row ``i``, column ``j``), both 1-based.

    Labels run column by column so that label order is a valid measurement
    order.
    """
    return (j - 1) * rows + (i - 1)


def build_brickwork(rows: int, cols: int) -> OpenGraph:
    if rows < 1 or cols < 1:
        raise GraphError("invalid-dimension", f"bad brickwork size {rows}x{cols}")
    if cols % 8 != 5:
        raise GraphError("invalid-dimension", f"columns must be 5 mod 8, got {cols}")
    idx = lambda i, j: brickwork_index(rows, i, j)  # noqa: E731
    edges = set()
    for i in range(1, rows + 1):
        for j in range(1, cols):
            edges.add((idx(i, j), idx(i, j + 1)))
    for j in range(1, cols + 1):
        for i in range(1, rows):
            if (j % 8 == 3 and i % 2 == 1) or (j % 8 == 7 and i % 2 == 0):
                for jj in (j, j + 2):
                    if jj <= cols:
                        edges.add((idx(i, jj), idx(i + 1, jj)))
    inputs = tuple(idx(i, 1) for i in range(1, rows + 1))
    outputs = tuple(idx(i, cols) for i in range(1, rows + 1))
    return OpenGraph(tuple(range(rows * cols)), frozenset(edges), inputs, outputs)


def brickwork_flow(rows: int, cols: int) -> Flow:
    build_brickwork(rows, cols)  # validates dimensions
    f = {}
    for i in range(1, rows + 1):
        for j in range(1, cols):
            f[brickwork_index(rows, i, j)] = brickwork_index(rows, i, j + 1)
    return Flow(f, tuple(range(rows * cols)))


# ---------------------------------------------------------------------------
# dotted graphs, bridge and break


def dot_transform(g: OpenGraph) -> DottedGraph:
    """Subdivide every edge; new vertices get the next free labels."""
    nxt = max(g.vertices, default=-1) + 1
    edges = set()
    edge_of = {}
    for k, (i, j) in enumerate(g.sorted_edges()):
        a = nxt + k
        edge_of[a] = (i, j)
        edges.add((i, a))
        edges.add((j, a))
    verts = g.vertices + tuple(edge_of)
    graph = OpenGraph(verts, frozenset(edges), g.inputs, g.outputs)
    return DottedGraph(graph, frozenset(g.vertices), frozenset(edge_of), edge_of)


def dotted_complete(n: int) -> DottedGraph:
    """K~_n: P-vertices ``0..n-1``, A-vertices after them in pair order."""
    return dot_transform(complete_graph(n))


def bridge(g: OpenGraph, v: int) -> OpenGraph:
    """Join the two neighbours of the degree-2 vertex ``v`` and remove ``v``.

    If the neighbours are already adjacent the edge is toggled off, which is
    what the corresponding Pauli-Y measurement does to the graph state.
    """
    if g.degree(v) != 2:
        raise GraphError("invalid-degree", f"vertex {v} has degree {g.degree(v)}")
    a, b = sorted(g.neighbors(v))
    h = g.without([v])
    edges = set(h.edges) ^ {_canon(a, b)}
    return OpenGraph(h.vertices, frozenset(edges), h.inputs, h.outputs)


def break_vertex(g: OpenGraph, v: int) -> OpenGraph:
    if v not in g.vertices:
        raise GraphError("invalid-graph", f"unknown vertex {v}")
    return g.without([v])


def reduction_plan(n: int, target: OpenGraph) -> ReductionPlan:
    """Canonical plan reducing K~_n to ``target``: bridge iff the edge is wanted.

    Target vertex ``k`` (in sorted order) corresponds to P-vertex ``k``.
    """
    if target.m != n:
        raise GraphError("size-mismatch", f"target has {target.m} vertices, expected {n}")
    dotted = dotted_complete(n)
    label = {v: k for k, v in enumerate(target.vertices)}
    wanted = {_canon(label[i], label[j]) for i, j in target.edges}
    return ReductionPlan(
        {a: (BRIDGE if e in wanted else BREAK) for a, e in sorted(dotted.edge_of.items())}
    )


def apply_plan(g: OpenGraph, plan: ReductionPlan) -> OpenGraph:
    for a in sorted(plan.assignment):
        g = bridge(g, a) if plan.assignment[a] == BRIDGE else break_vertex(g, a)
    return g


def partition_plan(n: int, parts: Sequence[Iterable[int]]) -> frozenset:
    """A-vertices of K~_{3n} to break so that each part becomes its own K~_n."""
    parts = [frozenset(p) for p in parts]
    total = 3 * n
    if len(parts) != 3 or any(len(p) != n for p in parts):
        raise GraphError("invalid-partition", "need three parts of equal size n")
    union = frozenset().union(*parts)
    if len(union) != total or union != frozenset(range(total)):
        raise GraphError("invalid-partition", "parts must be disjoint and cover P(K~_3n)")
    where = {v: k for k, p in enumerate(parts) for v in p}
    dotted = dotted_complete(total)
    return frozenset(a for a, (i, j) in dotted.edge_of.items() if where[i] != where[j])


def validate_flow(g: OpenGraph, flow: Flow) -> bool:
    """Check the flow conditions against the stored total order."""
    if sorted(flow.order) != list(g.vertices):
        return False
    pos = {v: k for k, v in enumerate(flow.order)}
    outputs, inputs = set(g.outputs), set(g.inputs)
    for i, fi in flow.f.items():
        if i not in pos or fi not in pos:
            return False
        if i in outputs or fi in inputs:
            return False
        if not g.has_edge(i, fi):
            return False
        if pos[i] >= pos[fi]:
            return False
        for j in g.neighbors(fi):
            if j != i and pos[i] >= pos[j]:
                return False
    measured = set(g.vertices) - outputs
    return measured <= set(flow.f)


def connected_components(g: OpenGraph) -> list[frozenset]:
    seen: set = set()
    comps = []
    for v in g.vertices:
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(g.neighbors(u) - comp)
        seen |= comp
        comps.append(frozenset(comp))
    return comps
