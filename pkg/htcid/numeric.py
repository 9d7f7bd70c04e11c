"""Numerical semantics of the linear structural equation model of a graph."""

from __future__ import annotations

from collections.abc import Callable, Sequence
import csv
from dataclasses import dataclass
from itertools import pairwise
from math import prod
from pathlib import Path
from typing import Any

import ijson
import numpy as np
from numpy.typing import NDArray
import structlog
import voluptuous as vol

from .const import (
    CONDITION_LIMIT,
    CSV_SIGNIFICANT_DIGITS,
    DETERMINANT_FLOOR,
    LAMBDA_RANGE,
    MAX_RESAMPLE_ATTEMPTS,
    OMEGA_RANGE,
    TREK_RULE_MAX_NODES,
)
from .exceptions import (
    CapabilityError,
    NongenericPointError,
    PreconditionError,
    SamplingError,
)
from .graph import Edge, MixedComponent, MixedGraph, NodeId, unordered
from .htc import HtcWitness

type Matrix = NDArray[np.float64]

_LOGGER = structlog.get_logger(__name__)

MATRIX_SCHEMA = vol.All(
    [vol.All([vol.Coerce(float)], vol.Length(min=1))], vol.Length(min=1)
)
PARAMS_SCHEMA = vol.Schema(
    {vol.Required("Lambda"): MATRIX_SCHEMA, vol.Required("Omega"): MATRIX_SCHEMA}
)


@dataclass(frozen=True, eq=False)
class Params:
    """Represents edge coefficients Lambda and error covariance Omega."""

    Lambda: Matrix
    Omega: Matrix


@dataclass(frozen=True, eq=False)
class OmegaEstimate:
    """Represents a recovered Omega and its off-support residuals."""

    Omega: Matrix
    residuals: Matrix

    @property
    def max_residual(self) -> float:
        """Return the largest absolute residual."""
        return float(np.abs(self.residuals).max(initial=0.0))


@dataclass(frozen=True)
class TrekMonomial:
    """Represents the monomial contributed by one trek."""

    omega: Edge
    edges: tuple[Edge, ...]

    def evaluate(self, params: Params) -> float:
        """Evaluate the monomial at params."""
        a, b = self.omega
        return float(
            params.Omega[a - 1, b - 1]
            * prod(params.Lambda[v - 1, w - 1] for v, w in self.edges)
        )


def _support(graph: MixedGraph) -> NDArray[np.bool_]:
    """Return the mask of B plus the diagonal."""
    mask = np.eye(graph.m, dtype=bool)
    for v, w in graph.bidirected:
        mask[v - 1, w - 1] = mask[w - 1, v - 1] = True
    return mask


def sample_params(graph: MixedGraph, seed: int | Sequence[int]) -> Params:
    """Draw generic parameters supported on the edges of graph."""
    rng = np.random.default_rng(seed)
    m = graph.m

    omega = np.zeros((m, m))
    for v, w in sorted(graph.bidirected):
        value = rng.uniform(-OMEGA_RANGE, OMEGA_RANGE)
        omega[v - 1, w - 1] = omega[w - 1, v - 1] = value
    np.fill_diagonal(omega, 1.0 + np.abs(omega).sum(axis=1))

    tails = [v - 1 for v, _ in graph.sorted_directed]
    heads = [w - 1 for _, w in graph.sorted_directed]
    for attempt in range(1, MAX_RESAMPLE_ATTEMPTS + 1):
        lam = np.zeros((m, m))
        magnitudes = rng.uniform(*LAMBDA_RANGE, size=len(tails))
        lam[tails, heads] = magnitudes * rng.choice((-1.0, 1.0), size=len(tails))
        if abs(np.linalg.det(np.eye(m) - lam)) > DETERMINANT_FLOOR:
            return Params(lam, omega)
        _LOGGER.debug("Resampling near-singular Lambda", attempt=attempt)

    raise SamplingError(
        f"no invertible I - Lambda after {MAX_RESAMPLE_ATTEMPTS} attempts"
    )


def phi(graph: MixedGraph, params: Params) -> Matrix:
    """Return Sigma = (I - Lambda)^-T Omega (I - Lambda)^-1."""
    transfer = np.eye(graph.m) - params.Lambda
    try:
        if np.linalg.cond(transfer) > 1.0 / np.finfo(float).eps:
            raise NongenericPointError("I - Lambda is numerically singular")
        inverse = np.linalg.inv(transfer)
    except np.linalg.LinAlgError as err:
        raise NongenericPointError("I - Lambda is singular") from err

    sigma = inverse.T @ params.Omega @ inverse
    return np.asarray((sigma + sigma.T) / 2.0)


def trek_monomials(graph: MixedGraph, v: NodeId, w: NodeId) -> list[TrekMonomial]:
    """Return one monomial per trek from v to w."""
    monomials = [
        TrekMonomial((top, top), tuple(sorted([*pairwise(left), *pairwise(right)])))
        for top in graph.nodes
        for left in graph.directed_paths(top, v)
        for right in graph.directed_paths(top, w)
    ]
    for a, b in sorted(graph.bidirected):
        for start, end in ((a, b), (b, a)):
            monomials += [
                TrekMonomial(
                    unordered(start, end),
                    tuple(sorted([*pairwise(left), *pairwise(right)])),
                )
                for left in graph.directed_paths(start, v)
                for right in graph.directed_paths(end, w)
            ]
    return monomials


def trek_rule_sigma(graph: MixedGraph, params: Params) -> Matrix:
    """Return Sigma as a sum over treks, for acyclic graphs."""
    if not graph.is_acyclic():
        raise PreconditionError("the trek rule is finite for acyclic graphs only")
    if graph.m > TREK_RULE_MAX_NODES:
        raise CapabilityError(
            f"trek enumeration supports at most {TREK_RULE_MAX_NODES} nodes, "
            f"got {graph.m}"
        )

    sigma = np.zeros((graph.m, graph.m))
    for v in graph.nodes:
        for w in graph.nodes:
            sigma[v - 1, w - 1] = sum(
                monomial.evaluate(params) for monomial in trek_monomials(graph, v, w)
            )
    return sigma


def _singular(a: Matrix, scale: float) -> bool:
    """Return True if a is numerically singular relative to scale."""
    values = np.linalg.svd(a, compute_uv=False)
    return bool(
        values[-1] <= values[0] / CONDITION_LIMIT
        or values[-1] <= scale / CONDITION_LIMIT
    )


def recover_lambda(graph: MixedGraph, sigma: Matrix, witness: HtcWitness) -> Matrix:
    """Recover Lambda from Sigma node by node along the witness order.

    Columns of nodes the witness does not cover are NaN.
    """
    m = graph.m
    lam = np.full((m, m), np.nan)
    scale = float(np.abs(sigma).max(initial=0.0))
    recovered: set[NodeId] = set()

    for v in witness.order:
        lam[:, v - 1] = 0.0
        parents = [p - 1 for p in sorted(graph.parents(v))]
        if parents:
            reachable = graph.htr(v)
            rows = []
            for y in sorted(witness.sources[v]):
                if y not in reachable:
                    rows.append(sigma[y - 1])
                    continue
                if y not in recovered:
                    raise PreconditionError(
                        f"witness uses node {y} for node {v} before recovering it"
                    )
                rows.append(sigma[y - 1] - lam[:, y - 1] @ sigma)

            system = np.array(rows)
            a = system[:, parents]
            if _singular(a, scale):
                raise NongenericPointError(
                    f"singular system at node {v}: the parameters are not generic, "
                    "resample them",
                    node=v,
                )
            lam[parents, v - 1] = np.linalg.solve(a, system[:, v - 1])
        recovered.add(v)

    return lam


def recover_omega(graph: MixedGraph, sigma: Matrix, lam: Matrix) -> OmegaEstimate:
    """Recover Omega = (I - Lambda)^T Sigma (I - Lambda)."""
    transfer = np.eye(graph.m) - lam
    full = transfer.T @ sigma @ transfer
    full = (full + full.T) / 2.0
    support = _support(graph)
    return OmegaEstimate(
        Omega=np.where(support, full, 0.0), residuals=np.where(support, 0.0, full)
    )


def jacobian(graph: MixedGraph, params: Params) -> Matrix:
    """Return the Jacobian of the nonsibling constraints in the edge coefficients.

    Rows follow graph.nonsibling_pairs and columns follow graph.sorted_directed.
    """
    sigma = phi(graph, params)
    mixed = (np.eye(graph.m) - params.Lambda).T @ sigma
    result = np.zeros((len(graph.nonsibling_pairs), len(graph.directed)))
    for i, (v, w) in enumerate(graph.nonsibling_pairs):
        for j, (u, x) in enumerate(graph.sorted_directed):
            if x == v:
                result[i, j] = -mixed[w - 1, u - 1]
            elif x == w:
                result[i, j] = -mixed[v - 1, u - 1]
    return result


def nonsibling_constraints(
    graph: MixedGraph, sigma: Matrix, lambda_values: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Evaluate [(I - Lambda)^T Sigma (I - Lambda)]_vw over the nonsibling pairs.

    Lambda is given by its values on graph.sorted_directed.
    """
    lam = np.zeros((graph.m, graph.m))
    for value, (v, w) in zip(lambda_values, graph.sorted_directed, strict=True):
        lam[v - 1, w - 1] = value
    transfer = np.eye(graph.m) - lam
    full = transfer.T @ sigma @ transfer
    return np.array([full[v - 1, w - 1] for v, w in graph.nonsibling_pairs])


def numerical_jacobian(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    x: NDArray[np.float64],
    h: float = 1e-6,
) -> Matrix:
    """Compute a Jacobian by central differences.

    Args:
        func: Vector valued function.
        x: Point to differentiate at.
        h: Step size.

    Returns:
        Matrix J with J[i, j] = d func_i / d x_j.

    """
    columns = []
    for j in range(len(x)):
        step = np.zeros_like(x)
        step[j] = h
        columns.append((func(x + step) - func(x - step)) / (2.0 * h))
    if not columns:
        return np.zeros((len(func(x)), 0))
    return np.column_stack(columns)


def numeric_rank(matrix: Matrix, tol: float) -> int:
    """Count singular values above tol times the largest one."""
    if matrix.size == 0:
        return 0
    values = np.linalg.svd(matrix, compute_uv=False)
    if values[0] == 0.0:
        return 0
    return int(np.count_nonzero(values > tol * values[0]))


def relative_error(estimate: Matrix, truth: Matrix) -> float:
    """Return max |estimate - truth| scaled by max(1, max |truth|)."""
    if truth.size == 0:
        return 0.0
    return float(np.abs(estimate - truth).max() / max(1.0, np.abs(truth).max()))


def component_params(component: MixedComponent, params: Params) -> Params:
    """Restrict parameters to a mixed component.

    Incoming nodes, which only act as parents in the component, get unit
    variance and no covariances.
    """
    k = len(component.nodes)
    lam = np.zeros((k, k))
    for v, w in component.graph.directed:
        tail, head = component.nodes[v - 1], component.nodes[w - 1]
        lam[v - 1, w - 1] = params.Lambda[tail - 1, head - 1]

    omega = np.eye(k)
    internal = [i for i, v in enumerate(component.nodes) if v in component.internal]
    original = [component.nodes[i] - 1 for i in internal]
    omega[np.ix_(internal, internal)] = params.Omega[np.ix_(original, original)]
    return Params(lam, omega)


def check_params(graph: MixedGraph, params: Params) -> None:
    """Validate the shape and support of parameters for graph."""
    shape = (graph.m, graph.m)
    if params.Lambda.shape != shape or params.Omega.shape != shape:
        raise PreconditionError(f"parameter matrices must be {shape[0]}x{shape[1]}")

    directed = np.zeros(shape, dtype=bool)
    for v, w in graph.directed:
        directed[v - 1, w - 1] = True
    if np.any(params.Lambda[~directed] != 0.0):
        raise PreconditionError("Lambda has entries outside the directed edges")
    if not np.allclose(params.Omega, params.Omega.T):
        raise PreconditionError("Omega must be symmetric")
    if np.any(params.Omega[~_support(graph)] != 0.0):
        raise PreconditionError("Omega has entries outside the bidirected edges")
    if np.linalg.eigvalsh(params.Omega).min() <= 0.0:
        raise PreconditionError("Omega must be positive definite")


def load_params(path: Path, graph: MixedGraph) -> Params:
    """Load and validate a parameter file."""
    document: dict[str, Any] = {}
    with path.open("rb") as f:
        try:
            for key, value in ijson.kvitems(f, "", use_float=True):
                document[key] = value
        except (ijson.JSONError, UnicodeDecodeError) as err:
            raise vol.Invalid(f"malformed parameter file: {err}") from err

    data = PARAMS_SCHEMA(document)
    try:
        params = Params(np.array(data["Lambda"]), np.array(data["Omega"]))
    except ValueError as err:
        raise vol.Invalid("parameter matrices must be rectangular") from err
    check_params(graph, params)
    return params


def write_matrix_csv(path: Path, matrix: Matrix) -> None:
    """Write a matrix as row-major CSV."""
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerows(
            [format(value, f".{CSV_SIGNIFICANT_DIGITS}g") for value in row]
            for row in matrix
        )


@dataclass(frozen=True, eq=False)
class RoundTrip:
    """Represents one sample, map and recover round trip."""

    sigma: Matrix
    Lambda: Matrix
    Omega: Matrix
    error: float


def round_trip(graph: MixedGraph, solved: HtcWitness, params: Params) -> RoundTrip:
    """Map params to Sigma and recover the entries the solved nodes determine.

    Unsolved columns of Lambda and the entries of Omega outside the solved
    block are NaN and do not enter the error.
    """
    sigma = phi(graph, params)
    lam = recover_lambda(graph, sigma, solved)
    columns = [v - 1 for v in sorted(solved.order)]
    block = np.ix_(columns, columns)

    estimate = recover_omega(graph, sigma, np.nan_to_num(lam, nan=0.0)).Omega
    omega = np.full_like(estimate, np.nan)
    omega[block] = estimate[block]

    error = max(
        relative_error(lam[:, columns], params.Lambda[:, columns]),
        relative_error(omega[block], params.Omega[block]),
    )
    return RoundTrip(sigma, lam, omega, error)
