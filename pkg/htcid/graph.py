"""Mixed graphs G = (V, D, B) and their structural queries."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from functools import cache, cached_property
from itertools import combinations, permutations
from math import comb
from typing import Final

import igraph as ig
import numpy as np
from numpy.typing import NDArray

from .const import CANONICAL_MAX_NODES
from .exceptions import (
    CapabilityError,
    GraphParseError,
    InvalidGraphError,
    PreconditionError,
)

type NodeId = int
type Edge = tuple[NodeId, NodeId]
type Path = tuple[NodeId, ...]

EDGE_KINDS: Final = {"d": "directed", "b": "bidirected"}


def unordered(v: NodeId, w: NodeId) -> Edge:
    """Return the unordered pair {v, w} in its stored orientation."""
    return (v, w) if v < w else (w, v)


@dataclass(frozen=True)
class MixedGraph:
    """Represents a mixed graph on the nodes 1..m."""

    m: int
    directed: frozenset[Edge] = frozenset()
    bidirected: frozenset[Edge] = frozenset()

    def __post_init__(self) -> None:
        """Normalize and validate the edge sets."""
        if self.m < 1:
            raise InvalidGraphError(f"node count must be positive, got {self.m}")

        directed = frozenset((int(v), int(w)) for v, w in self.directed)
        bidirected = frozenset(unordered(int(v), int(w)) for v, w in self.bidirected)
        for v, w in directed | bidirected:
            if not (1 <= v <= self.m and 1 <= w <= self.m):
                raise InvalidGraphError(f"edge ({v}, {w}) outside nodes 1..{self.m}")
            if v == w:
                raise InvalidGraphError(f"self-loop at node {v}")

        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)

    @property
    def nodes(self) -> range:
        """Return the node range 1..m."""
        return range(1, self.m + 1)

    @property
    def edge_count(self) -> int:
        """Return |D| + |B|."""
        return len(self.directed) + len(self.bidirected)

    @cached_property
    def sorted_directed(self) -> tuple[Edge, ...]:
        """Return D in lexicographic order."""
        return tuple(sorted(self.directed))

    @cached_property
    def nonsibling_pairs(self) -> tuple[Edge, ...]:
        """Return the unordered pairs v < w with no bidirected edge."""
        return tuple(
            pair
            for pair in combinations(self.nodes, 2)
            if pair not in self.bidirected
        )

    @cached_property
    def _parents(self) -> tuple[frozenset[NodeId], ...]:
        parents: list[set[NodeId]] = [set() for _ in range(self.m + 1)]
        for v, w in self.directed:
            parents[w].add(v)
        return tuple(frozenset(p) for p in parents)

    @cached_property
    def _children(self) -> tuple[frozenset[NodeId], ...]:
        children: list[set[NodeId]] = [set() for _ in range(self.m + 1)]
        for v, w in self.directed:
            children[v].add(w)
        return tuple(frozenset(c) for c in children)

    @cached_property
    def _siblings(self) -> tuple[frozenset[NodeId], ...]:
        siblings: list[set[NodeId]] = [set() for _ in range(self.m + 1)]
        for v, w in self.bidirected:
            siblings[v].add(w)
            siblings[w].add(v)
        return tuple(frozenset(s) for s in siblings)

    @cached_property
    def _digraph(self) -> ig.Graph:
        return ig.Graph(
            n=self.m,
            edges=[(v - 1, w - 1) for v, w in self.sorted_directed],
            directed=True,
        )

    @cached_property
    def _reach(self) -> tuple[frozenset[NodeId], ...]:
        """Nodes reachable from each node, the node itself included."""
        reached = self._digraph.neighborhood(order=self.m, mode="out")
        return (frozenset(), *(frozenset(u + 1 for u in group) for group in reached))

    @cached_property
    def _paths(self) -> tuple[dict[NodeId, tuple[Path, ...]], ...]:
        """Simple directed paths grouped by start and end node."""
        paths: list[dict[NodeId, list[Path]]] = [{} for _ in range(self.m + 1)]
        for v in self.nodes:
            paths[v][v] = [(v,)]
            for found in self._digraph.get_all_simple_paths(v - 1, mode="out"):
                path = tuple(u + 1 for u in found)
                paths[v].setdefault(path[-1], []).append(path)
        return tuple(
            {end: tuple(sorted(group)) for end, group in by_end.items()}
            for by_end in paths
        )

    def parents(self, v: NodeId) -> frozenset[NodeId]:
        """Return pa(v)."""
        return self._parents[v]

    def children(self, v: NodeId) -> frozenset[NodeId]:
        """Return the nodes w with v -> w."""
        return self._children[v]

    def siblings(self, v: NodeId) -> frozenset[NodeId]:
        """Return sib(v)."""
        return self._siblings[v]

    def descendants(self, v: NodeId, proper: bool = True) -> frozenset[NodeId]:
        """Return the nodes reachable from v by directed paths.

        With proper set, only paths of at least one edge count, so v itself is
        included only when it lies on a directed cycle.
        """
        if not proper:
            return self._reach[v]
        return frozenset().union(*(self._reach[c] for c in self._children[v]))

    def htr(self, v: NodeId) -> frozenset[NodeId]:
        """Return the nodes reachable from v via a half-trek."""
        siblings = self._siblings[v]
        reached = self.descendants(v).union(*(self._reach[s] for s in siblings))
        return reached - siblings - {v}

    def directed_paths(self, start: NodeId, end: NodeId) -> tuple[Path, ...]:
        """Return every simple directed path from start to end.

        The trivial path (start,) is included when start equals end.
        """
        return self._paths[start].get(end, ())

    def is_acyclic(self) -> bool:
        """Return True if the directed part has no cycle."""
        return bool(self._digraph.is_dag())

    def is_simple(self) -> bool:
        """Return True if every node pair carries at most one edge."""
        return not any(
            (w, v) in self.directed or unordered(v, w) in self.bidirected
            for v, w in self.directed
        )

    def topological_order(self) -> list[NodeId]:
        """Return a topological order of an acyclic graph."""
        if not self.is_acyclic():
            raise PreconditionError("topological order requires an acyclic graph")
        return [u + 1 for u in self._digraph.topological_sorting(mode="out")]

    def relabel(self, mapping: Mapping[NodeId, NodeId]) -> MixedGraph:
        """Return the graph with node v renamed to mapping[v]."""
        return MixedGraph(
            self.m,
            frozenset((mapping[v], mapping[w]) for v, w in self.directed),
            frozenset((mapping[v], mapping[w]) for v, w in self.bidirected),
        )

    def canonical_key(self) -> tuple[int, int]:
        """Return an integer key shared exactly by isomorphic graphs."""
        table = slot_table(self.m)
        hi, lo, _ = table.minimum(*table.indices(self))
        return hi, lo

    def canonical_form(self) -> str:
        """Return the canonical string of the isomorphism class."""
        return slot_table(self.m).render(*self.canonical_key())

    def canonical_graph(self) -> MixedGraph:
        """Return the representative relabeling that attains the canonical form."""
        table = slot_table(self.m)
        _, _, index = table.minimum(*table.indices(self))
        return self.relabel(table.relabeling(index))

    @cached_property
    def _sibling_components(self) -> list[list[NodeId]]:
        bidirected_part = ig.Graph(
            n=self.m, edges=[(v - 1, w - 1) for v, w in sorted(self.bidirected)]
        )
        return sorted(
            sorted(u + 1 for u in members)
            for members in bidirected_part.connected_components()
        )

    def mixed_components(self) -> list[MixedComponent]:
        """Return the mixed components, ordered by their smallest node."""
        if not self.is_acyclic():
            raise PreconditionError("mixed components require an acyclic graph")

        components = []
        for members in self._sibling_components:
            internal = frozenset(members)
            parents = internal.union(*(self._parents[v] for v in internal))
            nodes = tuple(sorted(parents))
            local = {v: i for i, v in enumerate(nodes, start=1)}
            graph = MixedGraph(
                len(nodes),
                frozenset(
                    (local[v], local[w]) for v, w in self.directed if w in internal
                ),
                frozenset(
                    (local[v], local[w]) for v, w in self.bidirected if v in internal
                ),
            )
            components.append(MixedComponent(nodes, graph, internal))
        return components

    def serialize(self) -> str:
        """Return the graph in the graph file format."""
        lines = [f"nodes {self.m}"]
        lines += [f"d {v} {w}" for v, w in self.sorted_directed]
        lines += [f"b {v} {w}" for v, w in sorted(self.bidirected)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MixedComponent:
    """Represents one mixed component of an acyclic graph."""

    nodes: tuple[NodeId, ...]
    graph: MixedGraph
    internal: frozenset[NodeId]

    @property
    def origin(self) -> dict[NodeId, NodeId]:
        """Return the map from component-local to original nodes."""
        return dict(enumerate(self.nodes, start=1))

    @property
    def incoming(self) -> frozenset[NodeId]:
        """Return the parent-only nodes V_j minus C_j."""
        return frozenset(self.nodes) - self.internal


def parse_graph(text: str) -> MixedGraph:
    """Parse the graph file format."""
    m: int | None = None
    edges: dict[str, set[Edge]] = {"d": set(), "b": set()}

    for line_number, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue

        if m is None:
            if len(tokens) != 2 or tokens[0] != "nodes":
                raise GraphParseError(line_number, line, "expected 'nodes <m>'")
            m = _parse_int(line_number, line, tokens[1])
            if m < 1:
                raise GraphParseError(line_number, line, "node count must be positive")
            continue

        if len(tokens) != 3 or tokens[0] not in EDGE_KINDS:
            raise GraphParseError(
                line_number, line, "expected 'd <u> <v>' or 'b <u> <v>'"
            )
        u, v = (_parse_int(line_number, line, token) for token in tokens[1:])
        if not (1 <= u <= m and 1 <= v <= m):
            raise GraphParseError(line_number, line, f"index outside 1..{m}")
        if u == v:
            raise GraphParseError(line_number, line, "self-loop")
        edges[tokens[0]].add((u, v))

    if m is None:
        raise GraphParseError(1, text, "missing 'nodes <m>' line")
    return MixedGraph(m, frozenset(edges["d"]), frozenset(edges["b"]))


def _parse_int(line_number: int, line: str, token: str) -> int:
    try:
        return int(token)
    except ValueError as err:
        raise GraphParseError(line_number, line, f"not an integer: {token}") from err


@dataclass(frozen=True, eq=False)
class SlotTable:
    """Edge slot layout and permutation images for graphs on m nodes.

    A graph is a bit string over the directed slots (ordered pairs in
    lexicographic order) followed by the bidirected slots (pairs v < w). The
    canonical form is the smallest such string over all relabelings, compared
    as the integer pair (directed bits, bidirected bits).
    """

    m: int
    directed_slots: tuple[Edge, ...]
    bidirected_slots: tuple[Edge, ...]
    permutations: NDArray[np.int64]
    directed_weight: NDArray[np.int64]
    bidirected_weight: NDArray[np.int64]

    @cached_property
    def directed_index(self) -> dict[Edge, int]:
        """Return the slot index of each directed edge."""
        return {edge: i for i, edge in enumerate(self.directed_slots)}

    @cached_property
    def bidirected_index(self) -> dict[Edge, int]:
        """Return the slot index of each bidirected edge."""
        return {edge: i for i, edge in enumerate(self.bidirected_slots)}

    def indices(self, graph: MixedGraph) -> tuple[list[int], list[int]]:
        """Return the occupied slot indices of a graph."""
        return (
            [self.directed_index[edge] for edge in graph.directed],
            [self.bidirected_index[edge] for edge in graph.bidirected],
        )

    def minimum(
        self, directed: Iterable[int], bidirected: Iterable[int]
    ) -> tuple[int, int, int]:
        """Return the smallest (hi, lo) code and the permutation attaining it."""
        hi = self.directed_weight[:, list(directed)].sum(axis=1)
        lo = self.bidirected_weight[:, list(bidirected)].sum(axis=1)
        candidates = np.flatnonzero(hi == hi.min())
        index = int(candidates[np.argmin(lo[candidates])])
        return int(hi[index]), int(lo[index]), index

    def relabeling(self, index: int) -> dict[NodeId, NodeId]:
        """Return permutation number index as a node mapping."""
        perm = self.permutations[index]
        return {v: int(image) + 1 for v, image in enumerate(perm, start=1)}

    def render(self, hi: int, lo: int) -> str:
        """Return the canonical string for a code."""
        directed_bits = format(hi, "b").zfill(len(self.directed_slots))
        bidirected_bits = format(lo, "b").zfill(len(self.bidirected_slots))
        return f"{self.m}:{directed_bits}:{bidirected_bits}"

    def graph(self, directed: Iterable[int], bidirected: Iterable[int]) -> MixedGraph:
        """Build the graph occupying the given slots."""
        return MixedGraph(
            self.m,
            frozenset(self.directed_slots[i] for i in directed),
            frozenset(self.bidirected_slots[i] for i in bidirected),
        )


@cache
def slot_table(m: int) -> SlotTable:
    """Return the slot table for graphs on m nodes."""
    if m > CANONICAL_MAX_NODES:
        raise CapabilityError(
            f"canonical forms support at most {CANONICAL_MAX_NODES} nodes, got {m}"
        )

    nodes = range(1, m + 1)
    directed_slots = tuple((v, w) for v in nodes for w in nodes if v != w)
    bidirected_slots = tuple(combinations(nodes, 2))
    perms = np.array(list(permutations(range(m))), dtype=np.int64).reshape(-1, m)

    directed_lookup = np.full((m, m), -1, dtype=np.int64)
    for i, (v, w) in enumerate(directed_slots):
        directed_lookup[v - 1, w - 1] = i
    bidirected_lookup = np.full((m, m), -1, dtype=np.int64)
    for i, (v, w) in enumerate(bidirected_slots):
        bidirected_lookup[v - 1, w - 1] = bidirected_lookup[w - 1, v - 1] = i

    tails = np.array([v - 1 for v, _ in directed_slots], dtype=np.int64)
    heads = np.array([w - 1 for _, w in directed_slots], dtype=np.int64)
    directed_image = directed_lookup[perms[:, tails], perms[:, heads]]

    lefts = np.array([v - 1 for v, _ in bidirected_slots], dtype=np.int64)
    rights = np.array([w - 1 for _, w in bidirected_slots], dtype=np.int64)
    bidirected_image = bidirected_lookup[perms[:, lefts], perms[:, rights]]

    n_directed = m * (m - 1)
    n_bidirected = comb(m, 2)
    return SlotTable(
        m=m,
        directed_slots=directed_slots,
        bidirected_slots=bidirected_slots,
        permutations=perms,
        directed_weight=np.left_shift(1, n_directed - 1 - directed_image),
        bidirected_weight=np.left_shift(1, n_bidirected - 1 - bidirected_image),
    )
