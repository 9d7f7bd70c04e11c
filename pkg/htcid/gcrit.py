"""G-criterion checker for small acyclic mixed graphs."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property

import structlog

from .const import GC_MAX_NODES
from .exceptions import CapabilityError, PreconditionError
from .graph import MixedGraph, NodeId, Path

_LOGGER = structlog.get_logger(__name__)


class Condition(StrEnum):
    """Which side condition a G-criterion witness satisfies."""

    DEPTH = "C1"
    ORDERING = "C2"


@dataclass(frozen=True)
class Trek:
    """Represents a simple trek by its two sides.

    Both sides are stored as directed paths read downwards: left ends at the
    trek's source, right ends at its target. The sides share their first node
    unless they hang off a bidirected edge.
    """

    left: Path
    right: Path
    bidirected: bool = False

    @property
    def source(self) -> NodeId:
        """Return the node the trek starts at."""
        return self.left[-1]

    @property
    def target(self) -> NodeId:
        """Return the node the trek ends at."""
        return self.right[-1]

    @cached_property
    def left_nodes(self) -> frozenset[NodeId]:
        """Return Left(pi)."""
        return frozenset(self.left)

    @cached_property
    def right_nodes(self) -> frozenset[NodeId]:
        """Return Right(pi)."""
        return frozenset(self.right)

    @property
    def is_half_trek(self) -> bool:
        """Return True if the left side is a single node."""
        return len(self.left) == 1


@dataclass(frozen=True)
class NodeSystem:
    """Represents the trek systems chosen for one node."""

    parent_treks: tuple[Trek, ...]
    sibling_treks: tuple[Trek, ...]

    @property
    def y(self) -> frozenset[NodeId]:
        """Return Y, the sources of the treks to the parents."""
        return frozenset(trek.source for trek in self.parent_treks)

    @property
    def z(self) -> frozenset[NodeId]:
        """Return Z, the sources of the treks to the earlier siblings."""
        return frozenset(trek.source for trek in self.sibling_treks)


@dataclass(frozen=True)
class GcWitness:
    """Represents a topological order and per-node systems meeting the G-criterion."""

    order: tuple[NodeId, ...]
    condition: Condition
    systems: Mapping[NodeId, NodeSystem]
    precedence: tuple[NodeId, ...] = field(default=())

    def as_dict(self) -> dict[str, object]:
        """Return the JSON form of the witness."""
        return {
            "order": list(self.order),
            "condition": self.condition.value,
            "precedence": list(self.precedence),
            "A": {
                str(v): {"Y": sorted(system.y), "Z": sorted(system.z)}
                for v, system in sorted(self.systems.items())
            },
        }


def depths(graph: MixedGraph) -> dict[NodeId, int]:
    """Return the length of the longest directed path into every node."""
    result = dict.fromkeys(graph.nodes, 0)
    for v in graph.topological_order():
        for w in graph.children(v):
            result[w] = max(result[w], result[v] + 1)
    return result


def depth(graph: MixedGraph, v: NodeId) -> int:
    """Return the length of the longest directed path terminating at v."""
    return depths(graph)[v]


def topological_orders(graph: MixedGraph) -> Iterator[tuple[NodeId, ...]]:
    """Yield every topological order of an acyclic graph."""
    indegree = {v: len(graph.parents(v)) for v in graph.nodes}
    prefix: list[NodeId] = []

    def extend() -> Iterator[tuple[NodeId, ...]]:
        if len(prefix) == graph.m:
            yield tuple(prefix)
            return
        for v in graph.nodes:
            if indegree[v] or v in prefix:
                continue
            prefix.append(v)
            for w in graph.children(v):
                indegree[w] -= 1
            yield from extend()
            for w in graph.children(v):
                indegree[w] += 1
            prefix.pop()

    yield from extend()


class _Search:
    """Memoized per-node trek system search on one graph."""

    def __init__(self, graph: MixedGraph) -> None:
        """Initialize a new search."""
        self.graph = graph
        self._memo: dict[tuple[object, ...], NodeSystem | None] = {}
        self._parent_treks = {p: self._treks_to(p) for p in graph.nodes}

    def _treks_to(self, target: NodeId) -> list[Trek]:
        graph = self.graph
        treks = [
            Trek(left, right)
            for top in graph.nodes
            for right in graph.directed_paths(top, target)
            for source in graph.nodes
            for left in graph.directed_paths(top, source)
        ]
        for a, b in sorted(graph.bidirected):
            for start, end in ((a, b), (b, a)):
                treks += [
                    Trek(left, right, bidirected=True)
                    for right in graph.directed_paths(end, target)
                    for source in graph.nodes
                    for left in graph.directed_paths(start, source)
                ]
        return treks

    def _sibling_treks_to(self, sibling: NodeId) -> list[Trek]:
        """Treks ending at sibling without an arrowhead there."""
        return [
            Trek(left, (sibling,))
            for source in self.graph.nodes
            for left in self.graph.directed_paths(sibling, source)
        ]

    def system(
        self,
        v: NodeId,
        earlier: frozenset[NodeId],
        allowed: frozenset[NodeId],
        half_only: frozenset[NodeId],
    ) -> NodeSystem | None:
        """Find trek systems for v onto pa(v) and its earlier siblings.

        Sources in allowed may start any trek; sources in half_only may start
        half-treks only.
        """
        key = (v, earlier, allowed, half_only)
        if key not in self._memo:
            self._memo[key] = self._find(v, earlier, allowed, half_only)
        return self._memo[key]

    def _find(
        self,
        v: NodeId,
        earlier: frozenset[NodeId],
        allowed: frozenset[NodeId],
        half_only: frozenset[NodeId],
    ) -> NodeSystem | None:
        def usable(trek: Trek) -> bool:
            if trek.source == v:
                return False
            return trek.source in allowed or (
                trek.source in half_only and trek.is_half_trek
            )

        parents = sorted(self.graph.parents(v))
        options = [
            [trek for trek in self._parent_treks[p] if usable(trek)] for p in parents
        ]
        options += [
            [trek for trek in self._sibling_treks_to(s) if usable(trek)]
            for s in sorted(earlier)
        ]

        chosen: list[Trek] = []

        def assign(k: int, lefts: frozenset[NodeId], rights: frozenset[NodeId]) -> bool:
            if k == len(options):
                return True
            for trek in options[k]:
                if trek.left_nodes & lefts:
                    continue
                right = trek.right_nodes if k < len(parents) else frozenset()
                if right & rights:
                    continue
                chosen.append(trek)
                if assign(k + 1, lefts | trek.left_nodes, rights | right):
                    return True
                chosen.pop()
            return False

        if not assign(0, frozenset(), frozenset()):
            return None
        return NodeSystem(tuple(chosen[: len(parents)]), tuple(chosen[len(parents) :]))


def gc_identifiable(graph: MixedGraph) -> tuple[bool, GcWitness | None]:
    """Decide the G-criterion by searching every topological order."""
    if graph.m > GC_MAX_NODES:
        raise CapabilityError(
            f"the G-criterion search supports at most {GC_MAX_NODES} nodes, "
            f"got {graph.m}"
        )
    if not graph.is_acyclic():
        raise PreconditionError("the G-criterion is defined for acyclic graphs only")

    search = _Search(graph)
    node_depth = depths(graph)
    everything = frozenset(graph.nodes)
    reachable = {v: graph.htr(v) for v in graph.nodes}
    shallower = {
        v: frozenset(w for w in everything if node_depth[w] < node_depth[v])
        for v in graph.nodes
    }
    no_nodes: frozenset[NodeId] = frozenset()
    seen: set[tuple[frozenset[NodeId], ...]] = set()

    for order in topological_orders(graph):
        position = {v: i for i, v in enumerate(order)}
        earlier = {
            v: frozenset(s for s in graph.siblings(v) if position[s] < position[v])
            for v in graph.nodes
        }
        signature = tuple(earlier[v] for v in graph.nodes)
        if signature in seen:
            continue
        seen.add(signature)

        systems: dict[NodeId, NodeSystem] = {}
        for v in graph.nodes:
            if (system := search.system(v, earlier[v], shallower[v], no_nodes)) is None:
                break
            systems[v] = system
        else:
            _LOGGER.debug("G-criterion holds", order=order, condition="C1")
            return True, GcWitness(order, Condition.DEPTH, systems, order)

        if witness := _ordering_condition(graph, search, order, earlier, reachable):
            _LOGGER.debug("G-criterion holds", order=order, condition="C2")
            return True, witness

    return False, None


def _ordering_condition(
    graph: MixedGraph,
    search: _Search,
    order: tuple[NodeId, ...],
    earlier: Mapping[NodeId, frozenset[NodeId]],
    reachable: Mapping[NodeId, frozenset[NodeId]],
) -> GcWitness | None:
    """Grow a precedence order node by node under the ordering condition."""
    position = {v: i for i, v in enumerate(order)}
    everything = frozenset(graph.nodes)
    restricted = {
        v: reachable[v]
        | frozenset(s for s in graph.siblings(v) if position[s] > position[v])
        for v in graph.nodes
    }

    precedence: list[NodeId] = []
    systems: dict[NodeId, NodeSystem] = {}
    changed = True
    while changed and len(precedence) < graph.m:
        changed = False
        for v in order:
            if v in systems:
                continue
            done = frozenset(precedence)
            system = search.system(
                v,
                earlier[v],
                everything - restricted[v] - {v},
                restricted[v] & done,
            )
            if system is not None:
                systems[v] = system
                precedence.append(v)
                changed = True

    if len(precedence) < graph.m:
        return None
    return GcWitness(order, Condition.ORDERING, systems, tuple(precedence))
