"""Test mixed graph queries, parsing and canonical forms."""

from __future__ import annotations

from itertools import pairwise

import numpy as np
import pytest

from htcid.const import GraphClass
from htcid.enumeration import enumerate_unlabeled
from htcid.exceptions import (
    CapabilityError,
    GraphParseError,
    InvalidGraphError,
    PreconditionError,
)
from htcid.graph import MixedGraph, parse_graph, slot_table

from .conftest import random_graph


def test_parse_graph(iv_graph: MixedGraph) -> None:
    """Test parsing the graph file format."""
    assert parse_graph("nodes 3\nd 1 2\nd 2 3\nb 2 3") == iv_graph
    assert parse_graph("# header\n\nnodes 1  # one node\n") == MixedGraph(1)
    assert parse_graph("nodes 2\nb 1 2\nb 2 1").bidirected == {(1, 2)}


@pytest.mark.parametrize(
    ("text", "line_number"),
    [
        ("nodes 3\nd 1 4", 2),
        ("nodes 3\nd 1 1", 2),
        ("nodes 3\nx 1 2", 2),
        ("nodes 3\nd 1 two", 2),
        ("nodes\nd 1 2", 1),
        ("\n# only comments\n", 1),
    ],
)
def test_parse_graph_errors(text: str, line_number: int) -> None:
    """Test that parse errors name the offending line."""
    with pytest.raises(GraphParseError) as excinfo:
        parse_graph(text)

    assert excinfo.value.line_number == line_number
    assert f"line {line_number}" in str(excinfo.value)


def test_invalid_graph() -> None:
    """Test graph validation."""
    with pytest.raises(InvalidGraphError, match="self-loop"):
        MixedGraph(2, frozenset({(1, 1)}))
    with pytest.raises(InvalidGraphError, match="outside"):
        MixedGraph(2, bidirected=frozenset({(1, 3)}))
    with pytest.raises(InvalidGraphError):
        MixedGraph(0)


def test_serialize(chain_graph: MixedGraph) -> None:
    """Test that serialization sorts edges and parses back."""
    text = chain_graph.serialize()

    assert text.splitlines() == [
        "nodes 5",
        "d 1 2",
        "d 2 3",
        "d 3 4",
        "d 4 5",
        "b 1 4",
        "b 1 5",
    ]
    assert parse_graph(text) == chain_graph


def test_neighborhoods(iv_graph: MixedGraph, chain_graph: MixedGraph) -> None:
    """Test parents and siblings."""
    assert iv_graph.parents(3) == {2}
    assert iv_graph.parents(1) == set()
    assert chain_graph.parents(2) == {1}
    assert iv_graph.siblings(3) == {2}
    assert iv_graph.siblings(1) == set()
    assert chain_graph.siblings(1) == {4, 5}


def test_descendants(
    iv_graph: MixedGraph, chain_graph: MixedGraph, three_cycle: MixedGraph
) -> None:
    """Test proper descendants, including nodes on cycles."""
    assert chain_graph.descendants(2) == {3, 4, 5}
    assert iv_graph.descendants(3) == set()
    assert three_cycle.descendants(1) == {1, 2, 3}
    assert iv_graph.descendants(3, proper=False) == {3}


def test_htr(iv_graph: MixedGraph, chain_graph: MixedGraph) -> None:
    """Test half-trek reachable sets."""
    assert chain_graph.htr(2) == {3, 4, 5}
    assert chain_graph.htr(4) == {2, 3, 5}
    assert iv_graph.htr(3) == set()


def _htr_by_half_treks(graph: MixedGraph, v: int) -> set[int]:
    """Collect the ends of simple half-treks from v by path enumeration."""
    reached = set()
    for start in {v} | graph.siblings(v):
        for end in graph.nodes:
            for path in graph.directed_paths(start, end):
                if start == v and len(path) == 1:
                    continue
                reached.add(end)
    return reached - graph.siblings(v) - {v}


def test_htr_matches_half_trek_enumeration() -> None:
    """Test htr against enumerating half-treks on random graphs."""
    rng = np.random.default_rng(7)
    for _ in range(60):
        graph = random_graph(rng, int(rng.integers(2, 7)), acyclic=False)
        for v in graph.nodes:
            assert graph.htr(v) == _htr_by_half_treks(graph, v)
            assert not graph.htr(v) & (graph.siblings(v) | {v})


def test_directed_paths(chain_graph: MixedGraph) -> None:
    """Test simple directed path enumeration."""
    assert chain_graph.directed_paths(2, 2) == ((2,),)
    assert chain_graph.directed_paths(1, 4) == ((1, 2, 3, 4),)
    assert chain_graph.directed_paths(4, 1) == ()
    for path in chain_graph.directed_paths(1, 5):
        assert all(edge in chain_graph.directed for edge in pairwise(path))


def test_acyclicity_and_simplicity(
    iv_graph: MixedGraph, three_cycle: MixedGraph
) -> None:
    """Test the acyclic and simple predicates."""
    assert iv_graph.is_acyclic()
    assert not three_cycle.is_acyclic()
    assert MixedGraph(2, bidirected=frozenset({(1, 2)})).is_acyclic()

    assert not iv_graph.is_simple()
    assert MixedGraph(3, frozenset({(1, 2), (2, 3)})).is_simple()
    assert not MixedGraph(2, frozenset({(1, 2), (2, 1)})).is_simple()


def test_topological_order(chain_graph: MixedGraph, three_cycle: MixedGraph) -> None:
    """Test topological sorting."""
    assert chain_graph.topological_order() == [1, 2, 3, 4, 5]
    with pytest.raises(PreconditionError):
        three_cycle.topological_order()


def test_canonical_form(iv_graph: MixedGraph) -> None:
    """Test canonical forms of isomorphic and distinct graphs."""
    permuted = iv_graph.relabel({1: 3, 2: 1, 3: 2})
    chain = MixedGraph(3, frozenset({(1, 2), (2, 3)}))

    assert iv_graph.canonical_form() == iv_graph.canonical_form()
    assert permuted.canonical_form() == iv_graph.canonical_form()
    assert chain.canonical_form() != iv_graph.canonical_form()
    assert iv_graph.canonical_graph().canonical_form() == iv_graph.canonical_form()
    assert iv_graph.canonical_form().startswith("3:")


def test_canonical_form_invariance() -> None:
    """Test canonical forms under random relabelings."""
    rng = np.random.default_rng(11)
    for _ in range(40):
        m = int(rng.integers(2, 7))
        graph = random_graph(rng, m, acyclic=bool(rng.integers(2)))
        images = rng.permutation(m) + 1
        mapping = {v: int(images[v - 1]) for v in graph.nodes}

        relabeled = graph.relabel(mapping)
        assert relabeled.canonical_key() == graph.canonical_key()
        assert relabeled.canonical_form() == graph.canonical_form()
        assert relabeled.canonical_graph() == graph.canonical_graph()


def test_canonical_form_follows_key() -> None:
    """Test that canonical forms and keys separate the same classes."""
    graphs = list(enumerate_unlabeled(3, GraphClass.ALL))
    keys = {graph.canonical_key() for graph in graphs}
    forms = {graph.canonical_form() for graph in graphs}

    assert len(keys) == len(forms) == len(graphs)
    for graph in graphs:
        assert graph.canonical_form() == slot_table(3).render(*graph.canonical_key())


def test_canonical_form_capability() -> None:
    """Test the canonical form size bound."""
    with pytest.raises(CapabilityError):
        MixedGraph(9).canonical_form()
    assert slot_table(8).m == 8


def test_mixed_components() -> None:
    """Test the mixed component construction."""
    graph = MixedGraph(3, frozenset({(1, 2), (2, 3)}), frozenset({(1, 3)}))

    first, second = graph.mixed_components()

    assert first.internal == {1, 3}
    assert first.nodes == (1, 2, 3)
    assert first.incoming == {2}
    assert first.graph.directed == {(2, 3)}
    assert first.graph.bidirected == {(1, 3)}
    assert second.internal == {2}
    assert second.nodes == (1, 2)
    assert second.origin == {1: 1, 2: 2}
    assert second.graph.directed == {(1, 2)}
    assert second.graph.bidirected == set()


def test_mixed_components_partition_edges() -> None:
    """Test that mixed components partition the edges of random graphs."""
    rng = np.random.default_rng(3)
    for _ in range(50):
        graph = random_graph(rng, int(rng.integers(1, 7)), acyclic=True)
        components = graph.mixed_components()

        directed = set()
        bidirected = set()
        for component in components:
            origin = component.origin
            directed |= {(origin[v], origin[w]) for v, w in component.graph.directed}
            bidirected |= {
                tuple(sorted((origin[v], origin[w])))
                for v, w in component.graph.bidirected
            }
        assert directed == graph.directed
        assert bidirected == graph.bidirected
        assert sum(len(c.graph.directed) for c in components) == len(graph.directed)


def test_mixed_components_singletons() -> None:
    """Test that a graph without bidirected edges splits into singletons."""
    graph = MixedGraph(3, frozenset({(1, 2), (1, 3), (2, 3)}))

    components = graph.mixed_components()

    assert [c.internal for c in components] == [{1}, {2}, {3}]
    assert [c.nodes for c in components] == [(1,), (1, 2), (1, 2, 3)]


def test_mixed_components_cyclic(three_cycle: MixedGraph) -> None:
    """Test that cyclic graphs have no mixed components."""
    with pytest.raises(PreconditionError):
        three_cycle.mixed_components()
