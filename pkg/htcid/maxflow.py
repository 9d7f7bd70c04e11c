"""Integer maximum flow on networks with node and edge capacities."""

from __future__ import annotations

from collections.abc import Hashable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from itertools import pairwise

import igraph as ig
import structlog

from .exceptions import FlowValidationError, PreconditionError

type Capacity = int | None
type FlowEdge = tuple[Hashable, Hashable]
type FlowPath = tuple[Hashable, ...]

_LOGGER = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class FlowNetwork:
    """Represents a directed network with a source and a sink.

    Capacities missing from the maps, or given as None, are unbounded.
    """

    nodes: tuple[Hashable, ...]
    edges: tuple[FlowEdge, ...]
    source: Hashable
    sink: Hashable
    node_capacity: Mapping[Hashable, Capacity] = field(default_factory=dict)
    edge_capacity: Mapping[FlowEdge, Capacity] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate the network."""
        if self.source == self.sink:
            raise PreconditionError("source and sink must differ")
        if len(self.index) != len(self.nodes):
            raise PreconditionError("duplicate network node")
        for terminal in (self.source, self.sink):
            if terminal not in self.index:
                raise PreconditionError(f"unknown terminal {terminal!r}")
            if self.node_capacity.get(terminal) is not None:
                raise PreconditionError(f"terminal {terminal!r} must be unbounded")
        if len(set(self.edges)) != len(self.edges):
            raise PreconditionError("duplicate network edge")
        for u, v in self.edges:
            if u == v:
                raise PreconditionError(f"self-loop at {u!r}")
            if u not in self.index or v not in self.index:
                raise PreconditionError(f"edge ({u!r}, {v!r}) has an unknown end")
        for capacity in (*self.node_capacity.values(), *self.edge_capacity.values()):
            if capacity is not None and capacity < 0:
                raise PreconditionError("capacities must be nonnegative")

    @cached_property
    def index(self) -> dict[Hashable, int]:
        """Return the position of each node."""
        return {node: i for i, node in enumerate(self.nodes)}

    @cached_property
    def ordered_edges(self) -> tuple[FlowEdge, ...]:
        """Return the edges ordered lexicographically by node position."""
        return tuple(
            sorted(self.edges, key=lambda e: (self.index[e[0]], self.index[e[1]]))
        )


@dataclass(frozen=True)
class FlowResult:
    """Represents an integral flow and its size."""

    size: int
    edge_flow: Mapping[FlowEdge, int]


def max_flow(net: FlowNetwork, bound: int) -> FlowResult:
    """Compute an integral maximum flow.

    Every unbounded capacity is replaced by bound, which must be at least the
    size of a maximum flow. Capacitated nodes are split into an in-copy and an
    out-copy joined by an edge carrying the node capacity.
    """
    if not net.edges:
        return FlowResult(0, {})

    n = len(net.nodes)
    out_copy = list(range(n))
    edges: list[tuple[int, int]] = []
    capacity: list[int] = []
    for i, node in enumerate(net.nodes):
        if (node_capacity := net.node_capacity.get(node)) is not None:
            out_copy[i] = n + len(edges)
            edges.append((i, out_copy[i]))
            capacity.append(node_capacity)

    offset = len(edges)
    for u, v in net.ordered_edges:
        edges.append((out_copy[net.index[u]], net.index[v]))
        edge_capacity = net.edge_capacity.get((u, v))
        capacity.append(bound if edge_capacity is None else edge_capacity)

    graph = ig.Graph(n=n + offset, edges=edges, directed=True)
    flow = graph.maxflow(net.index[net.source], net.index[net.sink], capacity=capacity)
    values = flow.flow
    return FlowResult(
        size=round(flow.value),
        edge_flow={
            edge: round(values[offset + j]) for j, edge in enumerate(net.ordered_edges)
        },
    )


def flow_paths(net: FlowNetwork, result: FlowResult) -> list[FlowPath]:
    """Decompose a flow into unit source-to-sink paths.

    Cycles met along the way are cancelled and discarded.
    """
    _validate_flow(net, result)

    remaining = {edge: result.edge_flow.get(edge, 0) for edge in net.ordered_edges}
    outgoing: dict[Hashable, list[FlowEdge]] = {}
    for edge in net.ordered_edges:
        outgoing.setdefault(edge[0], []).append(edge)

    paths: list[FlowPath] = []
    while len(paths) < result.size:
        walk = [net.source]
        position = {net.source: 0}
        while walk[-1] != net.sink:
            edge = next(
                (e for e in outgoing.get(walk[-1], ()) if remaining[e] > 0), None
            )
            if edge is None:
                raise FlowValidationError(f"flow stops at {walk[-1]!r}")

            if (start := position.get(edge[1])) is not None:
                for cycle_edge in pairwise([*walk[start:], edge[1]]):
                    remaining[cycle_edge] -= 1
                for node in walk[start + 1 :]:
                    del position[node]
                del walk[start + 1 :]
                continue

            position[edge[1]] = len(walk)
            walk.append(edge[1])

        for path_edge in pairwise(walk):
            remaining[path_edge] -= 1
        paths.append(tuple(walk))

    _LOGGER.debug("Decomposed flow", size=result.size, paths=len(paths))
    return paths


def _validate_flow(net: FlowNetwork, result: FlowResult) -> None:
    """Check capacity, conservation and size of a flow."""
    known = set(net.edges)
    inflow = dict.fromkeys(net.nodes, 0)
    outflow = dict.fromkeys(net.nodes, 0)

    for edge, value in result.edge_flow.items():
        if edge not in known:
            raise FlowValidationError(f"flow on unknown edge {edge!r}")
        limit = net.edge_capacity.get(edge)
        if value < 0 or (limit is not None and value > limit):
            raise FlowValidationError(f"flow {value} violates capacity of {edge!r}")
        outflow[edge[0]] += value
        inflow[edge[1]] += value

    for node in net.nodes:
        if node in (net.source, net.sink):
            continue
        if inflow[node] != outflow[node]:
            raise FlowValidationError(f"flow not conserved at {node!r}")
        limit = net.node_capacity.get(node)
        if limit is not None and inflow[node] > limit:
            raise FlowValidationError(f"flow exceeds capacity of {node!r}")

    if outflow[net.source] - inflow[net.source] != result.size:
        raise FlowValidationError(
            f"flow size {result.size} differs from source outflow "
            f"{outflow[net.source] - inflow[net.source]}"
        )
