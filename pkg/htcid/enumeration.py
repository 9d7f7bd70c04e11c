"""Isomorph-free graph enumeration, census tables and random graph simulation."""

from __future__ import annotations

import asyncio
from collections import Counter
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Any

import ijson
import numpy as np
import structlog

from . import configure_logging
from .const import (
    CENSUS_MAX_NODES,
    DEFAULT_WORKERS,
    ENUMERATE_MAX_NODES,
    GraphClass,
    Verdict,
)
from .exceptions import CapabilityError, PreconditionError
from .graph import Edge, MixedGraph, SlotTable, slot_table
from .htc import classify

CHUNKS_PER_WORKER = 8

_LOGGER = structlog.get_logger(__name__)


@dataclass(frozen=True)
class CensusRow:
    """Represents the HTC verdict counts over one class of unlabeled graphs."""

    m: int
    graph_class: GraphClass
    total: int
    htc_identifiable: int
    htc_infinite: int
    inconclusive: int

    @property
    def acyclic_only(self) -> bool:
        """Return True if the row covers acyclic graphs only."""
        return self.graph_class is GraphClass.ACYCLIC

    @classmethod
    def from_counts(
        cls, m: int, graph_class: GraphClass, counts: Counter[Verdict]
    ) -> CensusRow:
        """Build a row from verdict counts."""
        return cls(
            m=m,
            graph_class=graph_class,
            total=counts.total(),
            htc_identifiable=counts[Verdict.IDENTIFIABLE],
            htc_infinite=counts[Verdict.INFINITE_TO_ONE],
            inconclusive=counts[Verdict.INCONCLUSIVE],
        )

    def as_csv_row(self) -> tuple[Any, ...]:
        """Return the CSV fields of the row."""
        return (
            self.m,
            self.graph_class.value,
            self.total,
            self.htc_identifiable,
            self.htc_infinite,
            self.inconclusive,
        )


@dataclass(frozen=True)
class SimulationRow:
    """Represents HTC verdict fractions over random labeled graphs."""

    m: int
    n_edges: int
    samples: int
    acyclic_only: bool
    seed: int
    frac_id: float
    frac_inf: float
    frac_inc: float

    def as_csv_row(self) -> tuple[Any, ...]:
        """Return the CSV fields of the row."""
        return (
            self.m,
            self.n_edges,
            self.samples,
            self.seed,
            self.frac_id,
            self.frac_inf,
            self.frac_inc,
        )


def _decode(table: SlotTable, hi: int, lo: int) -> tuple[list[int], list[int]]:
    """Return the slots set in a canonical code."""
    n_directed = len(table.directed_slots)
    n_bidirected = len(table.bidirected_slots)
    return (
        [i for i in range(n_directed) if hi >> (n_directed - 1 - i) & 1],
        [i for i in range(n_bidirected) if lo >> (n_bidirected - 1 - i) & 1],
    )


def _augment(table: SlotTable, max_edges: int, acyclic: bool) -> Iterator[MixedGraph]:
    """Yield canonical representatives level by level in the edge count.

    Every class with k + 1 edges arises from a class with k edges by adding
    one edge, so extending each representative by each free slot and keeping
    one graph per canonical code reaches every class exactly once.
    """
    empty = table.minimum([], [])
    level = {empty[:2]}
    for size in range(max_edges + 1):
        codes = sorted(level)
        _LOGGER.debug("Enumerated level", m=table.m, edges=size, classes=len(codes))
        following: set[tuple[int, int]] = set()
        for hi, lo in codes:
            directed, bidirected = _decode(table, hi, lo)
            graph = table.graph(directed, bidirected)
            yield graph
            if size == max_edges:
                continue

            occupied = set(directed)
            for slot, (v, w) in enumerate(table.directed_slots):
                closes_cycle = acyclic and v in graph.descendants(w, proper=False)
                if slot in occupied or closes_cycle:
                    continue
                following.add(table.minimum([*directed, slot], bidirected)[:2])

            occupied = set(bidirected)
            for slot in range(len(table.bidirected_slots)):
                if slot not in occupied:
                    following.add(table.minimum(directed, [*bidirected, slot])[:2])
        level = following


def enumerate_unlabeled(
    m: int, graph_class: GraphClass, max_edges: int | None = None
) -> Iterator[MixedGraph]:
    """Yield one graph per isomorphism class with at most max_edges edges.

    Graphs come ordered by edge count and then by canonical code. The cyclic
    class is all graphs minus the acyclic ones.
    """
    if m > ENUMERATE_MAX_NODES:
        raise CapabilityError(
            f"enumeration supports at most {ENUMERATE_MAX_NODES} nodes, got {m}"
        )
    limit = comb(m, 2) if max_edges is None else max_edges
    table = slot_table(m)

    if graph_class is GraphClass.CYCLIC:
        graphs = _augment(table, limit, acyclic=False)
        yield from (graph for graph in graphs if not graph.is_acyclic())
        return
    yield from _augment(table, limit, acyclic=graph_class is GraphClass.ACYCLIC)


def count_verdicts(graphs: Sequence[MixedGraph]) -> Counter[Verdict]:
    """Classify graphs and count the verdicts."""
    return Counter(classify(graph).verdict for graph in graphs)


async def _async_fan_out[T](
    work: Callable[[T], Counter[Verdict]], items: Sequence[T], workers: int
) -> Counter[Verdict]:
    """Run work over items in a process pool and merge the counts."""
    counts: Counter[Verdict] = Counter()
    if workers <= 1:
        for item in items:
            counts += work(item)
        return counts

    loop = asyncio.get_running_loop()
    pool = ProcessPoolExecutor(max_workers=workers, initializer=configure_logging)
    with pool:
        pending = [loop.run_in_executor(pool, work, item) for item in items]
        for done, future in enumerate(asyncio.as_completed(pending), start=1):
            counts += await future
            _LOGGER.info(
                "Progress", chunks=done, of=len(pending), graphs=counts.total()
            )
    return counts


def _chunks[T](items: Sequence[T], workers: int) -> list[Sequence[T]]:
    size = max(1, -(-len(items) // (max(workers, 1) * CHUNKS_PER_WORKER)))
    return [items[i : i + size] for i in range(0, len(items), size)] or [items]


async def async_tabulate(
    m: int, graph_class: GraphClass, workers: int = DEFAULT_WORKERS
) -> CensusRow:
    """Classify every unlabeled graph of a class and count the verdicts."""
    if m > CENSUS_MAX_NODES:
        raise CapabilityError(
            f"census supports at most {CENSUS_MAX_NODES} nodes, got {m}"
        )

    graphs = list(enumerate_unlabeled(m, graph_class))
    _LOGGER.info(
        "Classifying", m=m, graph_class=str(graph_class), graphs=len(graphs)
    )
    counts = await _async_fan_out(count_verdicts, _chunks(graphs, workers), workers)
    return CensusRow.from_counts(m, graph_class, counts)


def tabulate(
    m: int, graph_class: GraphClass, workers: int = DEFAULT_WORKERS
) -> CensusRow:
    """Return the census row of a graph class."""
    return asyncio.run(async_tabulate(m, graph_class, workers))


def edge_slots(m: int, acyclic_only: bool) -> tuple[list[Edge], list[Edge]]:
    """Return the directed and bidirected slots a random graph draws from."""
    pairs = list(combinations(range(1, m + 1), 2))
    if acyclic_only:
        return pairs, pairs
    return [edge for v, w in pairs for edge in ((v, w), (w, v))], pairs


def sample_graph(
    m: int, n_edges: int, acyclic_only: bool, seed: int | Sequence[int]
) -> MixedGraph:
    """Draw a labeled graph with n_edges edges uniformly at random."""
    directed, bidirected = edge_slots(m, acyclic_only)
    if not 0 <= n_edges <= len(directed) + len(bidirected):
        raise PreconditionError(
            f"{n_edges} edges do not fit into "
            f"{len(directed) + len(bidirected)} edge slots"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(directed) + len(bidirected), size=n_edges, replace=False)
    return MixedGraph(
        m,
        frozenset(directed[i] for i in chosen if i < len(directed)),
        frozenset(
            bidirected[i - len(directed)] for i in chosen if i >= len(directed)
        ),
    )


@dataclass(frozen=True)
class _SampleBatch:
    """Picklable batch of simulation samples."""

    m: int
    n_edges: int
    acyclic_only: bool
    seed: int
    indices: Sequence[int]


def _simulate_batch(batch: _SampleBatch) -> Counter[Verdict]:
    return count_verdicts(
        [
            sample_graph(batch.m, batch.n_edges, batch.acyclic_only, (batch.seed, i))
            for i in batch.indices
        ]
    )


async def async_simulate(
    m: int,
    n_edges: int,
    samples: int,
    acyclic_only: bool,
    seed: int,
    workers: int = DEFAULT_WORKERS,
) -> SimulationRow:
    """Classify random labeled graphs and report the verdict fractions.

    Sample i is drawn from the seed sequence (seed, i), so rows do not
    depend on the number of workers.
    """
    if samples < 1:
        raise PreconditionError("simulation needs at least one sample")
    sample_graph(m, n_edges, acyclic_only, (seed, 0))

    batches = [
        _SampleBatch(m, n_edges, acyclic_only, seed, indices)
        for indices in _chunks(range(samples), workers)
    ]
    counts = await _async_fan_out(_simulate_batch, batches, workers)
    return SimulationRow(
        m=m,
        n_edges=n_edges,
        samples=samples,
        acyclic_only=acyclic_only,
        seed=seed,
        frac_id=counts[Verdict.IDENTIFIABLE] / samples,
        frac_inf=counts[Verdict.INFINITE_TO_ONE] / samples,
        frac_inc=counts[Verdict.INCONCLUSIVE] / samples,
    )


def simulate(
    m: int,
    n_edges: int,
    samples: int,
    acyclic_only: bool,
    seed: int,
    workers: int = DEFAULT_WORKERS,
) -> SimulationRow:
    """Return the verdict fractions over random labeled graphs."""
    return asyncio.run(
        async_simulate(m, n_edges, samples, acyclic_only, seed, workers)
    )


def published_record(m: int, graph_class: GraphClass) -> dict[str, int] | None:
    """Return the published census counts of a graph class, if any."""
    key = f"{graph_class}:{m}"
    with Path(__file__).with_name("published_census.json").open("rb") as f:
        for name, value in ijson.kvitems(f, ""):
            if name == key:
                return {field: int(count) for field, count in value.items()}
    return None


def published_row(m: int, graph_class: GraphClass) -> CensusRow | None:
    """Return the published HTC census row of a graph class, if any."""
    if (record := published_record(m, graph_class)) is None:
        return None
    return CensusRow(
        m=m,
        graph_class=graph_class,
        total=record["total"],
        htc_identifiable=record["htc_identifiable"],
        htc_infinite=record["htc_infinite"],
        inconclusive=record["total"]
        - record["htc_identifiable"]
        - record["htc_infinite"],
    )
