"""Half-trek criterion decisions for mixed graphs."""

from __future__ import annotations

from collections.abc import Collection, Iterable, Iterator, Mapping
from dataclasses import dataclass
from math import comb
from typing import Any, Final

import structlog

from .const import BRUTE_FORCE_MAX_NODES, Verdict
from .exceptions import CapabilityError, PreconditionError
from .graph import MixedComponent, MixedGraph, NodeId
from .maxflow import FlowNetwork, flow_paths, max_flow

SOURCE: Final = "s"
SINK: Final = "t"

_LOGGER = structlog.get_logger(__name__)


@dataclass(frozen=True)
class HtcWitness:
    """Represents the solve order and the sets Y_v of solved nodes.

    A witness covering every node certifies HTC-identifiability. A partial one
    certifies the incoming edge coefficients of the nodes it covers.
    """

    order: tuple[NodeId, ...]
    sources: Mapping[NodeId, frozenset[NodeId]]

    def is_complete(self, m: int) -> bool:
        """Return True if every node of an m-node graph is solved."""
        return len(self.order) == m

    def as_dict(self) -> dict[str, Any]:
        """Return the JSON form of the witness."""
        return {
            "order": list(self.order),
            "Y": {str(v): sorted(self.sources[v]) for v in self.order},
        }


@dataclass(frozen=True)
class Classification:
    """Represents the HTC verdict for a graph."""

    verdict: Verdict
    solved: HtcWitness

    @property
    def solved_nodes(self) -> frozenset[NodeId]:
        """Return the nodes whose incoming edges are HTC-identified."""
        return frozenset(self.solved.order)

    @property
    def witness(self) -> HtcWitness | None:
        """Return the witness of an identifiable verdict."""
        return self.solved if self.verdict is Verdict.IDENTIFIABLE else None

    def as_dict(self) -> dict[str, Any]:
        """Return the JSON classification record."""
        return {
            "verdict": self.verdict.value,
            "solved_nodes": sorted(self.solved_nodes),
            "witness": None if self.witness is None else self.witness.as_dict(),
        }


@dataclass(frozen=True)
class DecompositionReport:
    """Represents per-component verdicts and their combination."""

    components: tuple[tuple[MixedComponent, Classification], ...]
    verdict: Verdict

    def as_dict(self) -> dict[str, Any]:
        """Return the JSON form of the report."""
        return {
            "verdict": self.verdict.value,
            "components": [
                {
                    "nodes": list(component.nodes),
                    "internal": sorted(component.internal),
                    **classification.as_dict(),
                }
                for component, classification in self.components
            ],
        }


def _check_candidates(
    graph: MixedGraph, v: NodeId, candidates: Collection[NodeId]
) -> None:
    blocked = graph.siblings(v) | {v}
    if bad := sorted(set(candidates) - (set(graph.nodes) - blocked)):
        raise PreconditionError(
            f"candidates {bad} are not allowed for node {v}: "
            "they must be nodes other than v and its siblings"
        )


def build_ht_network(
    graph: MixedGraph, v: NodeId, candidates: Collection[NodeId]
) -> FlowNetwork:
    """Build the flow network testing the half-trek criterion at v."""
    _check_candidates(graph, v, candidates)

    left = [("L", a) for a in sorted(candidates)]
    right = [("R", w) for w in graph.nodes]
    edges: list[tuple[Any, Any]] = []
    for node in left:
        a = node[1]
        edges.append((SOURCE, node))
        edges.append((node, ("R", a)))
        edges.extend((node, ("R", w)) for w in sorted(graph.siblings(a)))
    edges.extend((("R", w), ("R", u)) for w, u in graph.sorted_directed)
    edges.extend((("R", w), SINK) for w in sorted(graph.parents(v)))

    return FlowNetwork(
        nodes=(SOURCE, SINK, *left, *right),
        edges=tuple(edges),
        source=SOURCE,
        sink=SINK,
        node_capacity=dict.fromkeys((*left, *right), 1),
    )


def ht_criterion_holds(
    graph: MixedGraph, v: NodeId, candidates: Collection[NodeId]
) -> tuple[bool, frozenset[NodeId] | None]:
    """Test whether some subset of candidates satisfies the half-trek criterion.

    On success the subset is read off the source edges of a maximum flow.
    """
    net = build_ht_network(graph, v, candidates)
    n_parents = len(graph.parents(v))
    result = max_flow(net, bound=n_parents)
    if result.size < n_parents:
        return False, None
    return True, frozenset(path[1][1] for path in flow_paths(net, result))


def _half_trek_rights(
    graph: MixedGraph, source: NodeId, target: NodeId
) -> list[frozenset[NodeId]]:
    """Right sides of the simple half-treks from source to target."""
    rights = [frozenset(path) for path in graph.directed_paths(source, target)]
    for sibling in sorted(graph.siblings(source)):
        rights += [frozenset(path) for path in graph.directed_paths(sibling, target)]
    return rights


def brute_force_ht_criterion(
    graph: MixedGraph, v: NodeId, candidates: Collection[NodeId]
) -> bool:
    """Search half-trek systems exhaustively for the half-trek criterion at v."""
    if graph.m > BRUTE_FORCE_MAX_NODES:
        raise CapabilityError(
            f"brute force supports at most {BRUTE_FORCE_MAX_NODES} nodes, "
            f"got {graph.m}"
        )
    _check_candidates(graph, v, candidates)

    parents = sorted(graph.parents(v))
    options = [
        [
            (a, right)
            for a in sorted(candidates)
            for right in _half_trek_rights(graph, a, p)
        ]
        for p in parents
    ]

    def assign(k: int, used: frozenset[NodeId], covered: frozenset[NodeId]) -> bool:
        if k == len(parents):
            return True
        return any(
            assign(k + 1, used | {a}, covered | right)
            for a, right in options[k]
            if a not in used and not right & covered
        )

    return assign(0, frozenset(), frozenset())


def solve_sweeps(
    graph: MixedGraph, visit_order: Iterable[NodeId] | None = None
) -> Iterator[HtcWitness]:
    """Run the HTC-identification sweeps and yield the solved nodes after each.

    Nodes without parents start solved and make up the first snapshot. Each
    sweep visits the unsolved nodes in visit_order, testing the half-trek
    criterion against the solved nodes and the nodes outside htr(v); a node
    solved during a sweep is usable by the nodes visited after it. Sweeps stop
    once a sweep solves nothing.
    """
    order = list(graph.nodes if visit_order is None else visit_order)
    if sorted(order) != list(graph.nodes):
        raise PreconditionError("visit order must be a permutation of the nodes")

    everything = frozenset(graph.nodes)
    solved = [v for v in order if not graph.parents(v)]
    solved_set = set(solved)
    sources: dict[NodeId, frozenset[NodeId]] = dict.fromkeys(solved, frozenset())
    reachable = {v: graph.htr(v) for v in order}
    yield HtcWitness(tuple(solved), dict(sources))

    sweep = 0
    changed = True
    while changed and len(solved) < graph.m:
        changed = False
        sweep += 1
        for v in order:
            if v in solved_set:
                continue
            candidates = (solved_set | (everything - reachable[v])) - graph.siblings(v)
            holds, found = ht_criterion_holds(graph, v, candidates - {v})
            if holds and found is not None:
                solved.append(v)
                solved_set.add(v)
                sources[v] = found
                changed = True
                _LOGGER.debug("Solved node", node=v, sweep=sweep, sources=sorted(found))
        if changed:
            yield HtcWitness(tuple(solved), dict(sources))


def solve_nodes(
    graph: MixedGraph, visit_order: Iterable[NodeId] | None = None
) -> HtcWitness:
    """Return the solved nodes once the sweeps stop changing them."""
    *_, witness = solve_sweeps(graph, visit_order)
    return witness


def htc_identifiable(
    graph: MixedGraph, visit_order: Iterable[NodeId] | None = None
) -> HtcWitness | None:
    """Return a witness if the graph is HTC-identifiable."""
    witness = solve_nodes(graph, visit_order)
    return witness if witness.is_complete(graph.m) else None


def _has_system(graph: MixedGraph, v: NodeId, sources: frozenset[NodeId]) -> bool:
    """Search half-trek systems exhaustively up to the brute force bound."""
    if graph.m <= BRUTE_FORCE_MAX_NODES:
        return brute_force_ht_criterion(graph, v, sources)
    return ht_criterion_holds(graph, v, sources)[0]


def check_witness(graph: MixedGraph, witness: HtcWitness) -> list[str]:
    """Return the violated witness conditions; empty when the witness is valid."""
    problems = []
    position = {v: i for i, v in enumerate(witness.order)}
    if len(position) != len(witness.order) or not set(position) <= set(graph.nodes):
        problems.append("order repeats a node or names an unknown node")
    if set(witness.sources) != set(position):
        problems.append("solved nodes and Y sets disagree")

    for v in witness.order:
        sources = witness.sources.get(v, frozenset())
        if len(sources) != len(graph.parents(v)):
            problems.append(f"|Y_{v}| differs from |pa({v})|")
        if sources & (graph.siblings(v) | {v}):
            problems.append(f"Y_{v} meets {v} or its siblings")
            continue
        late = len(position)
        if any(position.get(w, late) > position[v] for w in sources & graph.htr(v)):
            problems.append(f"Y_{v} uses a half-trek reachable node solved after {v}")
        if not _has_system(graph, v, sources):
            problems.append(f"Y_{v} admits no half-trek system onto pa({v})")
    return problems


def build_global_network(graph: MixedGraph) -> FlowNetwork:
    """Build the flow network testing HTC-infinite-to-one."""
    nodes = list(graph.nodes)
    left = [("L", v, w) for v, w in graph.nonsibling_pairs]
    right = [("R", v, w) for v in nodes for w in nodes]
    edges: list[tuple[Any, Any]] = []
    for node in left:
        _, v, w = node
        edges.append((SOURCE, node))
        edges.append((node, ("R", v, w)))
        edges.append((node, ("R", w, v)))
        edges.extend((node, ("R", v, u)) for u in sorted(graph.siblings(w)))
        edges.extend((node, ("R", w, u)) for u in sorted(graph.siblings(v)))
    for v in nodes:
        edges.extend((("R", v, a), ("R", v, b)) for a, b in graph.sorted_directed)
        edges.extend((("R", v, p), SINK) for p in sorted(graph.parents(v)))

    return FlowNetwork(
        nodes=(SOURCE, SINK, *left, *right),
        edges=tuple(edges),
        source=SOURCE,
        sink=SINK,
        node_capacity=dict.fromkeys((*left, *right), 1),
    )


def htc_infinite_to_one(graph: MixedGraph) -> bool:
    """Return True if the graph is HTC-infinite-to-one."""
    result = max_flow(build_global_network(graph), bound=graph.m**2)
    _LOGGER.debug("Global flow", size=result.size, directed=len(graph.directed))
    return result.size < len(graph.directed)


def classify(graph: MixedGraph) -> Classification:
    """Classify a graph as HTC-identifiable, HTC-infinite-to-one or neither."""
    if graph.edge_count > comb(graph.m, 2):
        return Classification(Verdict.INFINITE_TO_ONE, solve_nodes(graph))

    solved = solve_nodes(graph)
    if solved.is_complete(graph.m):
        verdict = Verdict.IDENTIFIABLE
    elif htc_infinite_to_one(graph):
        verdict = Verdict.INFINITE_TO_ONE
    else:
        verdict = Verdict.INCONCLUSIVE
    return Classification(verdict, solved)


def combine_verdicts(verdicts: Iterable[Verdict]) -> Verdict:
    """Combine component verdicts into a verdict for the whole graph."""
    collected = list(verdicts)
    if Verdict.INFINITE_TO_ONE in collected:
        return Verdict.INFINITE_TO_ONE
    if all(verdict is Verdict.IDENTIFIABLE for verdict in collected):
        return Verdict.IDENTIFIABLE
    return Verdict.INCONCLUSIVE


def classify_via_decomposition(graph: MixedGraph) -> DecompositionReport:
    """Classify each mixed component of an acyclic graph."""
    components = tuple(
        (component, classify(component.graph))
        for component in graph.mixed_components()
    )
    return DecompositionReport(
        components=components,
        verdict=combine_verdicts(c.verdict for _, c in components),
    )
