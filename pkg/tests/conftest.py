"""Fixtures for the half-trek identifiability tests."""

from __future__ import annotations

from collections.abc import Iterator
from itertools import combinations
import logging

import numpy as np
import pytest

from htcid import configure_logging
from htcid.const import Verdict
from htcid.graph import MixedGraph
from htcid.htc import classify
from htcid.numeric import jacobian, numeric_rank, sample_params


@pytest.fixture(autouse=True)
def structured_logging() -> Iterator[None]:
    """Send log events to the stderr of the running test."""
    configure_logging(logging.INFO)
    yield


@pytest.fixture
def iv_graph() -> MixedGraph:
    """Return the instrumental variable graph."""
    return MixedGraph(3, frozenset({(1, 2), (2, 3)}), frozenset({(2, 3)}))


@pytest.fixture
def chain_graph() -> MixedGraph:
    """Return a five node chain with two bidirected edges out of node 1."""
    return MixedGraph(
        5,
        frozenset({(1, 2), (2, 3), (3, 4), (4, 5)}),
        frozenset({(1, 4), (1, 5)}),
    )


@pytest.fixture
def three_cycle() -> MixedGraph:
    """Return the directed cycle 1 -> 2 -> 3 -> 1."""
    return MixedGraph(3, frozenset({(1, 2), (2, 3), (3, 1)}))


@pytest.fixture
def over_edged() -> MixedGraph:
    """Return a three node graph with more edges than node pairs."""
    return MixedGraph(3, frozenset({(1, 2), (1, 3), (2, 3)}), frozenset({(1, 2)}))


def random_graph(
    rng: np.random.Generator, m: int, acyclic: bool, density: float = 0.35
) -> MixedGraph:
    """Draw a labeled graph with independent edges."""
    pairs = list(combinations(range(1, m + 1), 2))
    directed = set()
    for v, w in pairs:
        if rng.random() < density:
            directed.add((v, w))
        if not acyclic and rng.random() < density / 2:
            directed.add((w, v))
    bidirected = {pair for pair in pairs if rng.random() < density}
    return MixedGraph(m, frozenset(directed), frozenset(bidirected))



def assert_rank_matches_verdict(graph: MixedGraph, key: int, points: int = 5) -> None:
    """Assert full Jacobian rank exactly when the graph is HTC-identifiable."""
    verdict = classify(graph).verdict
    if verdict is Verdict.INCONCLUSIVE:
        return
    for point in range(points):
        params = sample_params(graph, (key, point))
        rank = numeric_rank(jacobian(graph, params), 1e-7)
        if verdict is Verdict.IDENTIFIABLE:
            assert rank == len(graph.directed), graph.serialize()
        else:
            assert rank < len(graph.directed), graph.serialize()
