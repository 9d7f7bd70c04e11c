"""Contains constants for the half-trek identifiability package."""

from __future__ import annotations

from enum import IntEnum, StrEnum
from typing import Final

DOMAIN: Final = "htcid"

# Configuration
CONF_ACYCLIC: Final = "acyclic"
CONF_DECOMPOSE: Final = "decompose"
CONF_EDGES: Final = "edges"
CONF_EXPORT: Final = "export"
CONF_JSON: Final = "json"
CONF_NODES: Final = "nodes"
CONF_OUT: Final = "out"
CONF_PARAMS: Final = "params"
CONF_PATH: Final = "path"
CONF_SAMPLES: Final = "samples"
CONF_SEED: Final = "seed"
CONF_THREADS: Final = "threads"
CONF_TOLERANCE: Final = "tol"
CONF_TRIALS: Final = "trials"
CONF_VERBOSE: Final = "verbose"

ENV_THREADS: Final = "HTC_THREADS"

# Defaults
DEFAULT_RANK_TOLERANCE: Final = 1e-7
DEFAULT_SAMPLES: Final = 500
DEFAULT_SEED: Final = 0
DEFAULT_TOLERANCE: Final = 1e-6
DEFAULT_TRIALS: Final = 20
DEFAULT_WORKERS: Final = 1

# Limits
BRUTE_FORCE_MAX_NODES: Final = 7
CANONICAL_MAX_NODES: Final = 8
CENSUS_MAX_NODES: Final = 5
CONDITION_LIMIT: Final = 1e10
ENUMERATE_MAX_NODES: Final = 6
GC_MAX_NODES: Final = 7
TREK_RULE_MAX_NODES: Final = 6
VERIFY_RETRIES: Final = 3

# Sampling
DETERMINANT_FLOOR: Final = 1e-6
LAMBDA_RANGE: Final = (0.1, 1.0)
MAX_RESAMPLE_ATTEMPTS: Final = 100
OMEGA_RANGE: Final = 0.3

# Output
CSV_SIGNIFICANT_DIGITS: Final = 17
CENSUS_CSV_HEADER: Final = (
    "m",
    "mode",
    "total",
    "htc_identifiable",
    "htc_infinite",
    "inconclusive",
)
SIMULATION_CSV_HEADER: Final = (
    "m",
    "n_edges",
    "samples",
    "seed",
    "frac_id",
    "frac_inf",
    "frac_inc",
)


class Verdict(StrEnum):
    """HTC classification verdict."""

    IDENTIFIABLE = "identifiable"
    INFINITE_TO_ONE = "infinite_to_one"
    INCONCLUSIVE = "inconclusive"


class GraphClass(StrEnum):
    """Which part of the graph space an enumeration covers."""

    ACYCLIC = "acyclic"
    CYCLIC = "cyclic"
    ALL = "all"


class ExitStatus(IntEnum):
    """Process exit codes of the command line tool."""

    OK = 0
    USAGE = 1
    CAPABILITY = 2
    NONGENERIC = 3
