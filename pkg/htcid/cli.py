"""Command line interface for half-trek identifiability analysis."""

from __future__ import annotations

import argparse
from collections.abc import Callable, Iterable, Mapping, Sequence
from contextlib import nullcontext
import csv
import json
import logging
import os
from pathlib import Path
import sys
from typing import Any, NoReturn

import structlog
import voluptuous as vol

from . import configure_logging
from .const import (
    CENSUS_CSV_HEADER,
    CONF_ACYCLIC,
    CONF_DECOMPOSE,
    CONF_EDGES,
    CONF_EXPORT,
    CONF_JSON,
    CONF_NODES,
    CONF_OUT,
    CONF_PARAMS,
    CONF_PATH,
    CONF_SAMPLES,
    CONF_SEED,
    CONF_THREADS,
    CONF_TOLERANCE,
    CONF_TRIALS,
    CONF_VERBOSE,
    DEFAULT_RANK_TOLERANCE,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_TOLERANCE,
    DEFAULT_TRIALS,
    DOMAIN,
    ENV_THREADS,
    SIMULATION_CSV_HEADER,
    VERIFY_RETRIES,
    ExitStatus,
    GraphClass,
    Verdict,
)
from .enumeration import published_row, simulate, tabulate
from .exceptions import (
    CapabilityError,
    GraphParseError,
    InvalidGraphError,
    NongenericPointError,
    PreconditionError,
    SamplingError,
)
from .gcrit import gc_identifiable
from .graph import MixedGraph, parse_graph
from .htc import Classification, HtcWitness, classify, classify_via_decomposition
from .numeric import (
    Params,
    RoundTrip,
    jacobian,
    load_params,
    numeric_rank,
    round_trip,
    sample_params,
    write_matrix_csv,
)

_LOGGER = structlog.get_logger(__name__)

PATH_SCHEMA = vol.All(str, vol.Coerce(Path))
OPTIONAL_PATH_SCHEMA = vol.Any(None, PATH_SCHEMA)
SEED_SCHEMA = vol.All(vol.Coerce(int), vol.Range(min=0))
POSITIVE_INT_SCHEMA = vol.All(vol.Coerce(int), vol.Range(min=1))
NODES_SCHEMA = vol.All(vol.Coerce(int), vol.Range(min=1))

CLASSIFY_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_PATH): PATH_SCHEMA,
        vol.Required(CONF_JSON, default=False): bool,
        vol.Required(CONF_DECOMPOSE, default=False): bool,
    },
    extra=vol.REMOVE_EXTRA,
)
VERIFY_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_PATH): PATH_SCHEMA,
        vol.Required(CONF_TRIALS, default=DEFAULT_TRIALS): POSITIVE_INT_SCHEMA,
        vol.Required(CONF_SEED, default=DEFAULT_SEED): SEED_SCHEMA,
        vol.Required(CONF_TOLERANCE, default=DEFAULT_TOLERANCE): vol.All(
            vol.Coerce(float), vol.Range(min=0, min_included=False)
        ),
        vol.Optional(CONF_PARAMS): OPTIONAL_PATH_SCHEMA,
        vol.Optional(CONF_EXPORT): OPTIONAL_PATH_SCHEMA,
        vol.Required(CONF_JSON, default=False): bool,
    },
    extra=vol.REMOVE_EXTRA,
)
ENUMERATE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NODES): NODES_SCHEMA,
        vol.Required(CONF_ACYCLIC, default=False): bool,
        vol.Optional(CONF_OUT): OPTIONAL_PATH_SCHEMA,
    },
    extra=vol.REMOVE_EXTRA,
)
SIMULATE_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_NODES): NODES_SCHEMA,
        vol.Required(CONF_EDGES): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Required(CONF_SAMPLES, default=DEFAULT_SAMPLES): POSITIVE_INT_SCHEMA,
        vol.Required(CONF_SEED, default=DEFAULT_SEED): SEED_SCHEMA,
        vol.Required(CONF_ACYCLIC, default=False): bool,
        vol.Optional(CONF_OUT): OPTIONAL_PATH_SCHEMA,
    },
    extra=vol.REMOVE_EXTRA,
)
GC_SCHEMA = vol.Schema({vol.Required(CONF_PATH): PATH_SCHEMA}, extra=vol.REMOVE_EXTRA)
THREADS_SCHEMA = vol.Schema({vol.Required(CONF_THREADS): POSITIVE_INT_SCHEMA})

type Options = Mapping[str, Any]


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with the usage status."""

    def error(self, message: str) -> NoReturn:
        """Print usage and exit with the usage status."""
        self.print_usage(sys.stderr)
        self.exit(ExitStatus.USAGE, f"{self.prog}: error: {message}\n")


def worker_count(environ: Mapping[str, str] | None = None) -> int:
    """Return the worker count from HTC_THREADS, or the logical CPU count."""
    environ = os.environ if environ is None else environ
    if (value := environ.get(ENV_THREADS)) is None:
        return os.cpu_count() or 1
    try:
        return int(THREADS_SCHEMA({CONF_THREADS: value})[CONF_THREADS])
    except vol.Invalid as err:
        raise vol.Invalid(f"{ENV_THREADS} must be a positive integer") from err


def read_graph(path: Path) -> MixedGraph:
    """Read and parse a UTF-8 graph file."""
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as err:
        line_number = raw.count(b"\n", 0, err.start) + 1
        line = raw.split(b"\n")[line_number - 1].decode("utf-8", "replace")
        raise GraphParseError(
            line_number, line, f"invalid UTF-8 at byte {err.start}"
        ) from err
    return parse_graph(text)


def _write(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else f"{text}\n")


def _write_json(document: Any) -> None:
    _write(json.dumps(document, indent=2, sort_keys=True))


def _write_csv(path: Path | None, header: Sequence[str], row: Iterable[Any]) -> None:
    target = nullcontext(sys.stdout) if path is None else path.open(
        "w", newline="", encoding="utf-8"
    )
    with target as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerow(row)


def _nodes(nodes: Iterable[int]) -> str:
    return " ".join(map(str, sorted(nodes))) or "-"


def _describe(classification: Classification) -> list[str]:
    lines = [
        f"verdict: {classification.verdict}",
        f"solved nodes: {_nodes(classification.solved_nodes)}",
    ]
    if (witness := classification.witness) is not None:
        lines.append(f"witness order: {' '.join(map(str, witness.order))}")
        lines.extend(f"  Y_{v}: {_nodes(witness.sources[v])}" for v in witness.order)
    return lines


def cmd_classify(options: Options) -> ExitStatus:
    """Print the HTC verdict of a graph file."""
    graph = read_graph(options[CONF_PATH])
    classification = classify(graph)
    report = (
        classify_via_decomposition(graph) if options[CONF_DECOMPOSE] else None
    )

    if options[CONF_JSON]:
        document = classification.as_dict()
        if report is not None:
            document["decomposition"] = report.as_dict()
        _write_json(document)
        return ExitStatus.OK

    lines = _describe(classification)
    if report is not None:
        for component, result in report.components:
            lines.append(
                f"component {_nodes(component.internal)} "
                f"(incoming {_nodes(component.incoming)}): {result.verdict}"
            )
        lines.append(f"combined verdict: {report.verdict}")
    _write("\n".join(lines))
    return ExitStatus.OK


def cmd_decompose(options: Options) -> ExitStatus:
    """Print per-component verdicts of an acyclic graph file."""
    return cmd_classify({**options, CONF_DECOMPOSE: True})


def _trial(
    graph: MixedGraph,
    solved: HtcWitness,
    given: Params | None,
    seed: int,
    trial: int,
) -> tuple[Params, RoundTrip]:
    """Run one round trip, resampling nongeneric draws."""
    for attempt in range(VERIFY_RETRIES + 1):
        params = (
            given if given is not None else sample_params(graph, (seed, trial, attempt))
        )
        try:
            return params, round_trip(graph, solved, params)
        except NongenericPointError as err:
            if given is not None or attempt == VERIFY_RETRIES:
                raise
            _LOGGER.warning(
                "Nongeneric draw, resampling",
                trial=trial,
                attempt=attempt,
                node=err.node,
            )
    raise AssertionError("unreachable")


def jacobian_ranks(
    graph: MixedGraph, given: Params | None, seed: int, trials: int
) -> list[int]:
    """Return the numeric rank of the constraint Jacobian at each trial point."""
    ranks = []
    for trial in range(trials):
        params = given if given is not None else sample_params(graph, (seed, trial))
        ranks.append(numeric_rank(jacobian(graph, params), DEFAULT_RANK_TOLERANCE))
    return ranks


def cmd_verify(options: Options) -> ExitStatus:
    """Confirm a verdict numerically.

    Identifiable and inconclusive graphs run round trips over the solved
    nodes. Graphs that are not identifiable also get the Jacobian rank of the
    nonsibling constraints at every trial point.
    """
    graph = read_graph(options[CONF_PATH])
    classification = classify(graph)
    given = (
        load_params(path, graph)
        if (path := options.get(CONF_PARAMS)) is not None
        else None
    )
    trials: int = options[CONF_TRIALS]
    seed: int = options[CONF_SEED]
    tolerance: float = options[CONF_TOLERANCE]
    n_directed = len(graph.directed)

    max_error: float | None = None
    if classification.verdict is not Verdict.INFINITE_TO_ONE:
        errors = []
        for trial in range(trials):
            params, result = _trial(graph, classification.solved, given, seed, trial)
            errors.append(result.error)
            if trial == 0 and (export := options.get(CONF_EXPORT)) is not None:
                export.mkdir(parents=True, exist_ok=True)
                write_matrix_csv(export / "sigma.csv", result.sigma)
                write_matrix_csv(export / "lambda.csv", result.Lambda)
                write_matrix_csv(export / "omega.csv", result.Omega)
                _LOGGER.debug("Exported first trial", directory=str(export))
        max_error = max(errors)

    ranks = None
    if classification.verdict is not Verdict.IDENTIFIABLE:
        ranks = jacobian_ranks(graph, given, seed, trials)

    passed = (max_error is None or max_error <= tolerance) and (
        classification.verdict is not Verdict.INFINITE_TO_ONE
        or all(rank < n_directed for rank in ranks or ())
    )

    if options[CONF_JSON]:
        _write_json(
            {
                "verdict": classification.verdict.value,
                "solved_nodes": sorted(classification.solved_nodes),
                "trials": trials,
                "seed": seed,
                "tolerance": tolerance,
                "max_error": max_error,
                "jacobian_ranks": ranks,
                "directed_edges": n_directed,
                "constraints": len(graph.nonsibling_pairs),
                "passed": passed,
            }
        )
    else:
        lines = [
            f"verdict: {classification.verdict}",
            f"solved nodes: {_nodes(classification.solved_nodes)}",
        ]
        if max_error is not None:
            lines.append(
                f"max relative error: {max_error:.3e} over {trials} trials "
                f"(tolerance {tolerance:g})"
            )
        if ranks is not None:
            lines.append(
                f"rank(J): {min(ranks)}..{max(ranks)} with |D| = {n_directed} "
                f"and {len(graph.nonsibling_pairs)} nonsibling constraints"
            )
        lines.append(f"result: {'pass' if passed else 'fail'}")
        _write("\n".join(lines))

    return ExitStatus.OK if passed else ExitStatus.NONGENERIC


def cmd_enumerate(options: Options) -> ExitStatus:
    """Write the HTC census row of unlabeled graphs as CSV."""
    m: int = options[CONF_NODES]
    graph_class = GraphClass.ACYCLIC if options[CONF_ACYCLIC] else GraphClass.CYCLIC
    row = tabulate(m, graph_class, worker_count())
    _write_csv(options.get(CONF_OUT), CENSUS_CSV_HEADER, row.as_csv_row())

    if (published := published_row(m, graph_class)) is None:
        _LOGGER.info("No published census row", m=m, graph_class=str(graph_class))
    elif published == row:
        _LOGGER.info(
            "Census matches published table", m=m, graph_class=str(graph_class)
        )
    else:
        _LOGGER.warning(
            "Census differs from published table",
            computed=row.as_csv_row(),
            published=published.as_csv_row(),
        )
    return ExitStatus.OK


def cmd_simulate(options: Options) -> ExitStatus:
    """Write HTC verdict fractions over random labeled graphs as CSV."""
    row = simulate(
        options[CONF_NODES],
        options[CONF_EDGES],
        options[CONF_SAMPLES],
        options[CONF_ACYCLIC],
        options[CONF_SEED],
        worker_count(),
    )
    _write_csv(options.get(CONF_OUT), SIMULATION_CSV_HEADER, row.as_csv_row())
    return ExitStatus.OK


def cmd_gc(options: Options) -> ExitStatus:
    """Print the G-criterion verdict of an acyclic graph file."""
    holds, witness = gc_identifiable(read_graph(options[CONF_PATH]))
    if not holds or witness is None:
        _write("not GC-identifiable")
        return ExitStatus.OK

    lines = [
        "GC-identifiable",
        f"order: {' '.join(map(str, witness.order))}",
        f"condition: {witness.condition}",
        f"precedence: {' '.join(map(str, witness.precedence))}",
    ]
    lines.extend(
        f"  A_{v}: Y = {_nodes(system.y)}, Z = {_nodes(system.z)}"
        for v, system in sorted(witness.systems.items())
    )
    _write("\n".join(lines))
    return ExitStatus.OK


COMMANDS: dict[str, tuple[Callable[[Options], ExitStatus], vol.Schema]] = {
    "classify": (cmd_classify, CLASSIFY_SCHEMA),
    "decompose": (cmd_decompose, CLASSIFY_SCHEMA),
    "verify": (cmd_verify, VERIFY_SCHEMA),
    "enumerate": (cmd_enumerate, ENUMERATE_SCHEMA),
    "simulate": (cmd_simulate, SIMULATE_SCHEMA),
    "gc": (cmd_gc, GC_SCHEMA),
}


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per operation."""
    parser = _Parser(prog=DOMAIN, description=__doc__)
    parser.add_argument(
        f"--{CONF_VERBOSE}", action="store_true", help="log debug events"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("classify", "print the HTC verdict of a graph"),
        ("decompose", "classify each mixed component of an acyclic graph"),
    ):
        command = commands.add_parser(name, help=help_text)
        command.add_argument(CONF_PATH, help="graph file")
        command.add_argument("--json", action="store_true", help="print JSON")
        if name == "classify":
            command.add_argument(
                "--decompose", action="store_true", help="add per-component verdicts"
            )

    verify = commands.add_parser("verify", help="confirm a verdict numerically")
    verify.add_argument(CONF_PATH, help="graph file")
    verify.add_argument("--trials", default=DEFAULT_TRIALS, help="parameter draws")
    verify.add_argument("--seed", default=DEFAULT_SEED, help="random seed")
    verify.add_argument(
        "--tol", default=DEFAULT_TOLERANCE, help="largest accepted relative error"
    )
    verify.add_argument("--params", help="JSON file with Lambda and Omega")
    verify.add_argument("--export", help="directory for the first trial's matrices")
    verify.add_argument("--json", action="store_true", help="print JSON")

    enumerate_ = commands.add_parser("enumerate", help="census of unlabeled graphs")
    enumerate_.add_argument("--nodes", required=True, help="number of nodes")
    enumerate_.add_argument(
        "--acyclic", action="store_true", help="acyclic graphs instead of cyclic"
    )
    enumerate_.add_argument("--out", help="CSV file, stdout by default")

    sim = commands.add_parser("simulate", help="verdicts of random labeled graphs")
    sim.add_argument("--nodes", required=True, help="number of nodes")
    sim.add_argument("--edges", required=True, help="number of edges")
    sim.add_argument("--samples", default=DEFAULT_SAMPLES, help="number of graphs")
    sim.add_argument("--seed", default=DEFAULT_SEED, help="random seed")
    sim.add_argument("--acyclic", action="store_true", help="acyclic graphs only")
    sim.add_argument("--out", help="CSV file, stdout by default")

    gc = commands.add_parser("gc", help="check the G-criterion")
    gc.add_argument(CONF_PATH, help="graph file")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line tool and return its exit status."""
    args = build_parser().parse_args(argv)
    options = vars(args)
    configure_logging(logging.DEBUG if options.pop(CONF_VERBOSE) else logging.INFO)
    handler, schema = COMMANDS[options.pop("command")]

    try:
        return handler(schema(options))
    except (InvalidGraphError, vol.Invalid, OSError) as err:
        _LOGGER.error("Invalid input", error=str(err))
        return ExitStatus.USAGE
    except (CapabilityError, PreconditionError) as err:
        _LOGGER.error("Unsupported input", error=str(err))
        return ExitStatus.CAPABILITY
    except (NongenericPointError, SamplingError) as err:
        _LOGGER.error("Nongeneric parameters", error=str(err))
        return ExitStatus.NONGENERIC
