"""Test the half-trek criterion decisions."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from htcid.const import Verdict
from htcid.exceptions import CapabilityError, PreconditionError
from htcid.graph import MixedGraph
from htcid.htc import (
    SINK,
    SOURCE,
    HtcWitness,
    brute_force_ht_criterion,
    build_global_network,
    build_ht_network,
    check_witness,
    classify,
    classify_via_decomposition,
    combine_verdicts,
    ht_criterion_holds,
    htc_identifiable,
    htc_infinite_to_one,
    solve_nodes,
    solve_sweeps,
)
from htcid.maxflow import max_flow

from .conftest import random_graph


def test_build_ht_network(chain_graph: MixedGraph) -> None:
    """Test the per-node network at node 2 with candidate 5."""
    net = build_ht_network(chain_graph, 2, {5})

    assert len(net.nodes) == 8
    assert set(net.edges) == {
        (SOURCE, ("L", 5)),
        (("L", 5), ("R", 5)),
        (("L", 5), ("R", 1)),
        (("R", 1), ("R", 2)),
        (("R", 2), ("R", 3)),
        (("R", 3), ("R", 4)),
        (("R", 4), ("R", 5)),
        (("R", 1), SINK),
    }
    assert max_flow(net, bound=1).size == 1


def test_build_ht_network_source_node(iv_graph: MixedGraph) -> None:
    """Test that a node without parents has no edges into the sink."""
    net = build_ht_network(iv_graph, 1, set())

    assert not [edge for edge in net.edges if edge[1] == SINK]
    assert max_flow(net, bound=0).size == 0


def test_build_ht_network_rejects_siblings(iv_graph: MixedGraph) -> None:
    """Test that candidates may not contain v or its siblings."""
    with pytest.raises(PreconditionError):
        build_ht_network(iv_graph, 3, {2})
    with pytest.raises(PreconditionError):
        ht_criterion_holds(iv_graph, 3, {3})


def test_ht_criterion_holds(iv_graph: MixedGraph, chain_graph: MixedGraph) -> None:
    """Test the flow-based half-trek criterion."""
    assert ht_criterion_holds(chain_graph, 2, {5}) == (True, frozenset({5}))
    assert ht_criterion_holds(chain_graph, 4, {2}) == (True, frozenset({2}))
    assert ht_criterion_holds(iv_graph, 1, set()) == (True, frozenset())
    assert ht_criterion_holds(iv_graph, 3, {1}) == (True, frozenset({1}))
    assert ht_criterion_holds(iv_graph, 3, set()) == (False, None)


def test_brute_force_ht_criterion(
    iv_graph: MixedGraph, chain_graph: MixedGraph
) -> None:
    """Test the exhaustive half-trek system search."""
    assert brute_force_ht_criterion(chain_graph, 2, {5})
    assert brute_force_ht_criterion(iv_graph, 2, {1})
    assert not brute_force_ht_criterion(iv_graph, 3, set())
    with pytest.raises(CapabilityError):
        brute_force_ht_criterion(MixedGraph(8), 1, set())


def test_flow_agrees_with_brute_force() -> None:
    """Test the flow criterion against exhaustive search on random instances."""
    rng = np.random.default_rng(2012)
    checked = 0
    while checked < 1000:
        graph = random_graph(rng, int(rng.integers(2, 6)), acyclic=rng.random() < 0.5)
        v = int(rng.integers(1, graph.m + 1))
        allowed = [a for a in graph.nodes if a != v and a not in graph.siblings(v)]
        candidates = {a for a in allowed if rng.random() < 0.6}

        holds, found = ht_criterion_holds(graph, v, candidates)

        assert holds == brute_force_ht_criterion(graph, v, candidates)
        if found is not None:
            assert found <= candidates
            assert len(found) == len(graph.parents(v))
            assert brute_force_ht_criterion(graph, v, found)
        checked += 1


def test_chain_graph_is_identifiable(chain_graph: MixedGraph) -> None:
    """Test the identifiable five node example and its witness."""
    witness = htc_identifiable(chain_graph)

    assert witness is not None
    assert witness.is_complete(5)
    assert check_witness(chain_graph, witness) == []
    assert witness.sources[1] == frozenset()
    assert not htc_infinite_to_one(chain_graph)
    assert classify(chain_graph).verdict is Verdict.IDENTIFIABLE


def test_three_cycle(three_cycle: MixedGraph) -> None:
    """Test that the directed three-cycle is inconclusive."""
    assert htc_identifiable(three_cycle) is None
    assert not htc_infinite_to_one(three_cycle)

    classification = classify(three_cycle)

    assert classification.verdict is Verdict.INCONCLUSIVE
    assert classification.solved_nodes == frozenset()
    assert classification.witness is None


def test_over_edged(over_edged: MixedGraph) -> None:
    """Test that graphs with more edges than node pairs are infinite-to-one."""
    assert htc_infinite_to_one(over_edged)
    assert classify(over_edged).verdict is Verdict.INFINITE_TO_ONE


@pytest.mark.parametrize(
    ("graph", "size"),
    [
        (MixedGraph(1), 0),
        (MixedGraph(2, frozenset({(1, 2)})), 1),
        (
            MixedGraph(
                3,
                frozenset({(1, 2), (1, 3), (2, 3)}),
                frozenset(combinations(range(1, 4), 2)),
            ),
            0,
        ),
    ],
)
def test_global_network(graph: MixedGraph, size: int) -> None:
    """Test the global network on small graphs."""
    net = build_global_network(graph)

    assert max_flow(net, bound=graph.m**2).size == size
    assert len(net.nodes) <= 3 * graph.m**2 // 2 + 2 + graph.m**2


def test_full_graph_is_infinite_to_one() -> None:
    """Test a graph with every directed and bidirected edge of an order."""
    graph = MixedGraph(
        3, frozenset({(1, 2), (1, 3), (2, 3)}), frozenset(combinations(range(1, 4), 2))
    )

    assert htc_infinite_to_one(graph)


def test_classification_as_dict(iv_graph: MixedGraph) -> None:
    """Test the JSON form of a classification."""
    document = classify(iv_graph).as_dict()

    assert document["verdict"] == "identifiable"
    assert document["solved_nodes"] == [1, 2, 3]
    assert document["witness"]["order"][0] == 1
    assert document["witness"]["Y"]["3"] == [1]


def test_solve_nodes_visit_order(chain_graph: MixedGraph) -> None:
    """Test that the visiting order does not change the solved nodes."""
    rng = np.random.default_rng(1)
    for _ in range(5):
        graph = random_graph(rng, 5, acyclic=False)
        expected = frozenset(solve_nodes(graph).order)
        for _ in range(4):
            order = [int(v) + 1 for v in rng.permutation(graph.m)]
            witness = solve_nodes(graph, order)
            assert frozenset(witness.order) == expected
            assert check_witness(graph, witness) == []

    assert solve_nodes(chain_graph, [5, 4, 3, 2, 1]).is_complete(5)
    with pytest.raises(PreconditionError):
        solve_nodes(chain_graph, [1, 2, 3])


def test_partial_witness() -> None:
    """Test that nodes outside a cycle are solved around it."""
    graph = MixedGraph(4, frozenset({(1, 2), (2, 3), (3, 1), (3, 4)}))

    classification = classify(graph)

    assert classification.verdict is not Verdict.IDENTIFIABLE
    assert 4 in classification.solved_nodes
    assert check_witness(graph, classification.solved) == []


def test_check_witness_detects_problems(iv_graph: MixedGraph) -> None:
    """Test witness re-verification on broken witnesses."""
    witness = HtcWitness(
        (1, 2, 3),
        {1: frozenset(), 2: frozenset({1}), 3: frozenset({2})},
    )
    short = HtcWitness((1, 2), {1: frozenset(), 2: frozenset()})

    assert any("siblings" in problem for problem in check_witness(iv_graph, witness))
    assert any("|Y_2|" in problem for problem in check_witness(iv_graph, short))


def test_check_witness_searches_systems_directly(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    """Test a witness without half-trek system fails whatever the flow says."""
    graph = MixedGraph(3, frozenset({(1, 3)}))
    witness = HtcWitness(
        (1, 2, 3), {1: frozenset(), 2: frozenset(), 3: frozenset({2})}
    )
    monkeypatch.setattr(
        "htcid.htc.ht_criterion_holds", lambda *_: (True, frozenset())
    )

    assert check_witness(graph, witness) == [
        "Y_3 admits no half-trek system onto pa(3)"
    ]


def test_solve_sweeps_grow_monotonically() -> None:
    """Test every sweep extends the solved prefix of the previous one."""
    rng = np.random.default_rng(7)
    for _ in range(60):
        m = int(rng.integers(2, 7))
        graph = random_graph(rng, m, acyclic=rng.random() < 0.5)
        order = [int(v) for v in rng.permutation(np.arange(1, m + 1))]
        snapshots = list(solve_sweeps(graph, order))

        assert snapshots[0].order == tuple(v for v in order if not graph.parents(v))
        for before, after in zip(snapshots, snapshots[1:], strict=False):
            assert len(after.order) > len(before.order)
            assert after.order[: len(before.order)] == before.order
            assert all(after.sources[v] == before.sources[v] for v in before.order)
        assert snapshots[-1] == solve_nodes(graph, order)
        assert check_witness(graph, snapshots[-1]) == []


def test_random_graph_properties() -> None:
    """Test witness validity and verdict properties on random graphs."""
    rng = np.random.default_rng(42)
    for _ in range(150):
        m = int(rng.integers(2, 7))
        graph = random_graph(rng, m, acyclic=rng.random() < 0.5)
        classification = classify(graph)

        assert check_witness(graph, classification.solved) == []
        witness = htc_identifiable(graph)
        assert not (witness is not None and htc_infinite_to_one(graph))
        if graph.edge_count > m * (m - 1) // 2:
            assert classification.verdict is Verdict.INFINITE_TO_ONE
            assert htc_infinite_to_one(graph)
        if graph.is_acyclic() and graph.is_simple():
            assert classification.verdict is Verdict.IDENTIFIABLE
        assert (classification.verdict is Verdict.IDENTIFIABLE) == (
            witness is not None
        )


@pytest.mark.parametrize(
    ("verdicts", "expected"),
    [
        ([Verdict.IDENTIFIABLE, Verdict.IDENTIFIABLE], Verdict.IDENTIFIABLE),
        ([Verdict.IDENTIFIABLE, Verdict.INCONCLUSIVE], Verdict.INCONCLUSIVE),
        ([Verdict.INCONCLUSIVE, Verdict.INFINITE_TO_ONE], Verdict.INFINITE_TO_ONE),
        ([], Verdict.IDENTIFIABLE),
    ],
)
def test_combine_verdicts(verdicts: list[Verdict], expected: Verdict) -> None:
    """Test combining component verdicts."""
    assert combine_verdicts(iter(verdicts)) is expected


def test_decomposition_simple_graph() -> None:
    """Test that a simple acyclic graph has identifiable components."""
    graph = MixedGraph(4, frozenset({(1, 2), (2, 3)}), frozenset({(1, 4), (3, 4)}))

    report = classify_via_decomposition(graph)

    assert report.verdict is Verdict.IDENTIFIABLE
    assert all(c.verdict is Verdict.IDENTIFIABLE for _, c in report.components)
    assert report.as_dict()["components"][0]["internal"] == [1, 3, 4]


def test_decomposition_over_edged_component() -> None:
    """Test that an over-edged component makes the graph infinite-to-one."""
    graph = MixedGraph(
        4,
        frozenset({(1, 2), (1, 3), (2, 3), (1, 4)}),
        frozenset({(2, 3)}),
    )

    report = classify_via_decomposition(graph)

    assert report.verdict is Verdict.INFINITE_TO_ONE
    assert classify(graph).verdict is Verdict.INFINITE_TO_ONE


def test_decomposition_cyclic(three_cycle: MixedGraph) -> None:
    """Test that decomposition needs an acyclic graph."""
    with pytest.raises(PreconditionError):
        classify_via_decomposition(three_cycle)


def test_decomposition_laws() -> None:
    """Test the relation between component and whole graph verdicts."""
    rng = np.random.default_rng(8)
    for _ in range(500):
        graph = random_graph(rng, int(rng.integers(2, 7)), acyclic=True, density=0.5)
        verdict = classify(graph).verdict
        report = classify_via_decomposition(graph)
        components = [c.verdict for _, c in report.components]

        if verdict is Verdict.IDENTIFIABLE:
            assert all(v is Verdict.IDENTIFIABLE for v in components)
        assert (verdict is Verdict.INFINITE_TO_ONE) == (
            Verdict.INFINITE_TO_ONE in components
        )
