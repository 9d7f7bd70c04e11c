#!/usr/bin/env python3
"""Recomputes the small census rows and diffs them against the published table."""

from difflib import unified_diff
import sys
from typing import Final

from htcid.const import GraphClass
from htcid.enumeration import CensusRow, published_row, tabulate

FILENAME: Final = "published_census.json"
ROWS: Final = [
    (m, graph_class)
    for graph_class in (GraphClass.ACYCLIC, GraphClass.CYCLIC)
    for m in (3, 4)
]


def render(rows: list[CensusRow | None]) -> list[str]:
    """Return one line per census row."""
    return [
        "missing\n" if row is None else ",".join(map(str, row.as_csv_row())) + "\n"
        for row in rows
    ]


print("Recomputing census rows...")
PUBLISHED = render([published_row(m, graph_class) for m, graph_class in ROWS])
COMPUTED = render([tabulate(m, graph_class) for m, graph_class in ROWS])
diff = list(
    unified_diff(
        PUBLISHED,
        COMPUTED,
        fromfile=f"{FILENAME}-published",
        tofile=f"{FILENAME}-computed",
        n=0,
    )
)
sys.stdout.writelines(diff)
sys.exit(1 if diff else 0)
