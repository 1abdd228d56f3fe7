"""Finite strategy graphs: adjacency, components, strong products, factorization.

Nodes are ordered string labels; internally they are dense integer indices in
label-table order, which fixes every deterministic ordering downstream.
Self-loops are never stored: the adjacency predicate treats each node as
adjacent to itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

TUPLE_SEP = "|"


class GraphError(Exception):
    """Malformed graph data or unknown node identifier."""


class NotDecomposableError(GraphError):
    """A coalition-wise factorization was required but does not exist."""


class Graph:
    """Immutable undirected simple graph over ordered, labeled nodes."""

    __slots__ = ("labels", "_index", "_neighbors", "_edge_set")

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]] = ()):
        labels = tuple(nodes)
        if len(set(labels)) != len(labels):
            raise GraphError("duplicate node labels")
        index = {lab: i for i, lab in enumerate(labels)}
        neighbors: list[set[int]] = [set() for _ in labels]
        edge_set: set[tuple[int, int]] = set()
        for u, v in edges:
            if u not in index:
                raise GraphError(f"unknown node {u!r} in edge")
            if v not in index:
                raise GraphError(f"unknown node {v!r} in edge")
            i, j = index[u], index[v]
            if i == j:
                raise GraphError(f"self-loop on {u!r} (self-adjacency is implicit)")
            key = (i, j) if i < j else (j, i)
            if key in edge_set:
                raise GraphError(f"duplicate edge {{{u!r}, {v!r}}}")
            edge_set.add(key)
            neighbors[i].add(j)
            neighbors[j].add(i)
        self.labels = labels
        self._index = index
        self._neighbors = tuple(frozenset(s) for s in neighbors)
        self._edge_set = frozenset(edge_set)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def edge_indices(self) -> frozenset[tuple[int, int]]:
        """Stored edges as (i, j) index pairs with i < j."""
        return self._edge_set

    def edge_labels(self) -> frozenset[frozenset[str]]:
        return frozenset(
            frozenset((self.labels[i], self.labels[j])) for i, j in self._edge_set
        )

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise GraphError(f"unknown node {label!r}") from None

    def neighbors(self, i: int) -> frozenset[int]:
        """Strict neighbors of node index i (self excluded)."""
        return self._neighbors[i]

    def adjacent_indices(self, i: int, j: int) -> bool:
        """Adjacent-or-equal predicate on node indices."""
        return i == j or j in self._neighbors[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.labels == other.labels and self._edge_set == other._edge_set

    def __hash__(self) -> int:
        return hash((self.labels, self._edge_set))

    def __repr__(self) -> str:
        return f"Graph({len(self.labels)} nodes, {len(self._edge_set)} edges)"


@dataclass(frozen=True)
class Decomposition:
    """Per-coalition factor graphs whose strong product equals a joint graph."""

    factors: tuple[Graph, ...]
    axis_map: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        count = 1
        for f in self.factors:
            count *= f.n
        if count != len(self.axis_map):
            raise GraphError("factor node counts do not multiply to joint count")
        images = set(self.axis_map.values())
        if len(images) != len(self.axis_map):
            raise GraphError("axis map is not a bijection")


def are_adjacent(g: Graph, u: str, v: str) -> bool:
    """True iff {u, v} is an edge of g or u == v."""
    return g.adjacent_indices(g.index(u), g.index(v))


def connected_components(g: Graph) -> list[frozenset[str]]:
    """Partition of the nodes into maximal connected sets.

    Components are ordered by their smallest node index.
    """
    seen = [False] * g.n
    out: list[frozenset[str]] = []
    for start in range(g.n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = [start]
        while stack:
            cur = stack.pop()
            for nb in g.neighbors(cur):
                if not seen[nb]:
                    seen[nb] = True
                    comp.append(nb)
                    stack.append(nb)
        out.append(frozenset(g.labels[i] for i in comp))
    return out


def induced_subgraph(g: Graph, members: Iterable[str]) -> Graph:
    """Subgraph on `members` keeping exactly the edges of g inside it."""
    member_ids = {g.index(m) for m in members}
    labels = [g.labels[i] for i in sorted(member_ids)]
    edges = [
        (g.labels[i], g.labels[j])
        for i, j in g.edge_indices
        if i in member_ids and j in member_ids
    ]
    return Graph(labels, edges)


def strong_product(factors: Sequence[Graph]) -> Graph:
    """Product graph: distinct tuples are adjacent iff every coordinate pair is
    adjacent-or-equal in its factor."""
    if not factors:
        raise GraphError("strong product needs at least one factor")
    for f in factors:
        if f.n == 0:
            raise GraphError("strong product factors must be nonempty")
    combos = list(product(*(range(f.n) for f in factors)))
    labels = [
        TUPLE_SEP.join(factors[a].labels[i] for a, i in enumerate(combo))
        for combo in combos
    ]
    edges = []
    for x in range(len(combos)):
        cx = combos[x]
        for y in range(x + 1, len(combos)):
            cy = combos[y]
            if all(factors[a].adjacent_indices(cx[a], cy[a]) for a in range(len(factors))):
                edges.append((labels[x], labels[y]))
    return Graph(labels, edges)


def split_label(label: str) -> tuple[str, ...]:
    return tuple(label.split(TUPLE_SEP))


def factorize(
    g: Graph, axis_spec: Sequence[Sequence[str]]
) -> Decomposition | None:
    """Recover per-axis factor graphs whose strong product equals g.

    The nodes of g must be tuple labels over `axis_spec` and must cover the
    full Cartesian product of the axes. A candidate factor edge {x, y} on
    axis h is accepted only if every joint pair differing solely in axis h by
    x <-> y is adjacent in g; the candidates are then verified against the
    actual product. Returns None when no factorization exists.
    """
    axes = [tuple(axis) for axis in axis_spec]
    if not axes or any(not axis for axis in axes):
        raise GraphError("axis spec must contain nonempty axes")
    expected = 1
    for axis in axes:
        if len(set(axis)) != len(axis):
            raise GraphError("axis labels must be unique")
        expected *= len(axis)
    if g.n != expected:
        raise GraphError("joint node set is not the full product of the axes")
    seen: set[tuple[str, ...]] = set()
    for label in g.labels:
        parts = split_label(label)
        if len(parts) != len(axes):
            raise GraphError(f"node {label!r} is not a well-formed tuple")
        for h, part in enumerate(parts):
            if part not in axes[h]:
                raise GraphError(f"node {label!r} has unknown coordinate {part!r}")
        seen.add(parts)
    if len(seen) != expected:
        raise GraphError("joint node set is not the full product of the axes")

    candidates: list[Graph] = []
    for h, axis in enumerate(axes):
        other = [axes[j] for j in range(len(axes)) if j != h]
        edges = []
        for a in range(len(axis)):
            for b in range(a + 1, len(axis)):
                ok = True
                for rest in product(*other):
                    joint_a = list(rest)
                    joint_a.insert(h, axis[a])
                    joint_b = list(rest)
                    joint_b.insert(h, axis[b])
                    if not are_adjacent(
                        g, TUPLE_SEP.join(joint_a), TUPLE_SEP.join(joint_b)
                    ):
                        ok = False
                        break
                if ok:
                    edges.append((axis[a], axis[b]))
        candidates.append(Graph(axis, edges))

    rebuilt = strong_product(candidates)
    if set(rebuilt.labels) != set(g.labels) or rebuilt.edge_labels() != g.edge_labels():
        return None
    axis_map = {label: split_label(label) for label in g.labels}
    return Decomposition(factors=tuple(candidates), axis_map=axis_map)


def path_graph(labels: Sequence[str]) -> Graph:
    return Graph(labels, [(labels[i], labels[i + 1]) for i in range(len(labels) - 1)])


def cycle_graph(labels: Sequence[str]) -> Graph:
    if len(labels) < 3:
        raise GraphError("cycle needs at least 3 nodes")
    edges = [(labels[i], labels[(i + 1) % len(labels)]) for i in range(len(labels))]
    return Graph(labels, edges)


def star_graph(labels: Sequence[str]) -> Graph:
    """First label is the hub."""
    return Graph(labels, [(labels[0], leaf) for leaf in labels[1:]])


def complete_graph(labels: Sequence[str]) -> Graph:
    edges = [
        (labels[i], labels[j])
        for i in range(len(labels))
        for j in range(i + 1, len(labels))
    ]
    return Graph(labels, edges)


def edgeless_graph(labels: Sequence[str]) -> Graph:
    return Graph(labels, [])
