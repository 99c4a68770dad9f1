# Copyright © 2019-present gsfernandes81

# This file is part of "inversion".

# inversion is free software: you can redistribute it and/or modify it under the
# terms of the GNU Affero General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later version.

# "inversion" is distributed in the hope that it will be useful, but WITHOUT ANY
# WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A
# PARTICULAR PURPOSE. See the GNU Affero General Public License for more details.

# You should have received a copy of the GNU Affero General Public License along with
# inversion. If not, see <https://www.gnu.org/licenses/>.

import logging
import typing as t

import numpy as np

from . import basislib, cfg, diffest, odedisc, solvers, utils
from .schemas import (
    NetworkData,
    NetworkEstimate,
    NodeBlock,
    NodeReconstruction,
    RegressionProblem,
    SolverConfig,
    TimeSeries,
)

logger = logging.getLogger("main/" + __name__)

POLICIES = ("or", "and", "none")


def node_blocks(
    n: int, d: int, node: int, order: int
) -> t.List[NodeBlock]:
    """Column layout of the library used for node's equations

    Every node j contributes its own polynomial block in its d variables. The
    constant appears once, in node's own block, so the library holds
    (1+q)^d + (n-1)((1+q)^d - 1) columns"""
    polynomial = basislib.build_polynomial_library(d, order)
    blocks = []
    start = 0
    for j in range(n):
        descriptors = tuple(
            polynomial if j == node else [p for p in polynomial if not p.is_constant]
        )
        blocks.append((j, tuple(range(start, start + len(descriptors))), descriptors))
        start += len(descriptors)
    if start > cfg.library_cap:
        raise utils.LibrarySizeError(
            f"Network library would hold {start} terms, above the cap of "
            f"{cfg.library_cap}"
        )
    return blocks


def sample_rows(
    total: int, max_samples: t.Optional[int], seed: int = 0
) -> np.ndarray:
    """At most max_samples distinct row indices drawn at random, in time order

    The same seed gives the same rows, so every node of a network is fitted
    on the same instants"""
    if max_samples is None or max_samples >= total:
        return np.arange(total)
    rng = np.random.default_rng([seed, total])
    return np.sort(rng.choice(total, size=max_samples, replace=False))


def _cross_node_coherence(matrix: np.ndarray, owner: np.ndarray) -> float:
    norms = np.linalg.norm(matrix, axis=0)
    unit = np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)
    gram = np.abs(unit.T @ unit)
    gram[owner[:, None] == owner[None, :]] = 0.0
    return float(gram.max()) if gram.size else 0.0


def reconstruct_node(
    data: NetworkData,
    node: int,
    order: int = 1,
    solver: SolverConfig = SolverConfig(solver="omp"),
    max_samples: t.Optional[int] = None,
    targets: t.Optional[TimeSeries] = None,
    tol: float = cfg.network_tolerance,
    seed: int = 0,
) -> NodeReconstruction:
    """Sparse fit of node's d equations over all nodes' blocks

    Nonzero coefficients in block j != node reveal a coupling from j. targets
    can carry derivatives of the whole record computed once for all nodes"""
    if not 0 <= node < data.n:
        raise utils.FriendlyValueError(f"No node {node} in a {data.n} node network")
    if targets is None:
        targets = diffest.derivative(data.series, solver.scheme)
    samples = diffest.align(data.series, targets)
    rows = sample_rows(len(targets), max_samples, seed)

    blocks = node_blocks(data.n, data.d, node, order)
    matrix = np.hstack(
        [
            basislib.evaluate_terms(
                descriptors, samples.values[rows][:, data.node_columns(j)]
            )
            for j, _, descriptors in blocks
        ]
    )
    owner = np.concatenate([[j] * len(columns) for j, columns, _ in blocks])
    norms = np.linalg.norm(matrix, axis=0)
    norms[norms == 0] = 1.0
    if solver.normalize:
        matrix = matrix / norms

    coherence = _cross_node_coherence(matrix, owner)
    if coherence > cfg.coherence_warning:
        logger.warning(
            f"Node {node}: columns of different nodes are nearly collinear "
            f"(coherence {coherence:.4f}), synchronised nodes cannot be told apart"
        )

    M, N = matrix.shape
    coefficients = np.zeros((data.d, N))
    diagnostics = []
    for c, channel in enumerate(data.node_columns(node)):
        problem = RegressionProblem(
            matrix,
            targets.values[rows, channel],
            lam=solver.lam or 0.0,
            threshold=solver.threshold,
            relative=solver.relative,
            max_support=solver.max_support,
            column_norms=norms if solver.normalize else None,
            positive=solver.positive,
            tol=tol,
        )
        if solver.solver == "lasso" and solver.lam is None:
            problem = problem.evolve(
                lam=solvers.cross_validate_lambda(
                    problem, solver.folds, solver.lambda_grid
                )
            )
        solution = solvers.solve(problem, solver.solver)
        coefficients[c] = (
            solution.coefficients / norms if solver.normalize else solution.coefficients
        )
        diagnostics.append(
            {
                "row": data.series.channel_names[channel],
                "residual_norm": solution.residual_norm,
                "sparsity": solution.sparsity,
                "converged": solution.converged,
                "coherence": coherence,
                "not_sparse": odedisc.is_dense(solution.sparsity, M, N),
            }
        )

    not_sparse = any(d["not_sparse"] for d in diagnostics)
    if not_sparse:
        logger.warning(f"Node {node}: fitted equations are not sparse")
    logger.debug(f"Node {node}: supports {[d['sparsity'] for d in diagnostics]}")
    return NodeReconstruction(node, coefficients, blocks, diagnostics, not_sparse)


def assemble_network(
    rows: t.Sequence[NodeReconstruction],
    threshold: t.Optional[float] = None,
    policy: str = "or",
) -> NetworkEstimate:
    """Coupling grid, thresholded adjacency and per-edge margins

    The threshold defaults to edge_fraction of the largest cross-node linear
    coefficient. policy decides how the two directions of a pair combine"""
    if policy not in POLICIES:
        raise utils.FriendlyValueError(f"Unknown policy {policy!r}, use {POLICIES}")
    rows = sorted(rows, key=lambda r: r.node)
    n = len(rows)
    if [r.node for r in rows] != list(range(n)) or n < 2:
        raise utils.FriendlyValueError("Every node must be reconstructed exactly once")
    d = rows[0].d

    coupling = np.zeros((n, n, d, d))
    evidence = np.zeros((n, n))
    for row in rows:
        for j in range(n):
            if j != row.node:
                coupling[row.node, j] = row.linear_block(j)
                evidence[row.node, j] = row.nonlinear_block(j)

    magnitudes = np.abs(coupling).reshape(n, n, -1).max(axis=2)
    if threshold is None:
        threshold = cfg.edge_fraction * magnitudes.max()
    detected = magnitudes > threshold
    np.fill_diagonal(detected, False)
    if policy == "or":
        adjacency = detected | detected.T
    elif policy == "and":
        adjacency = detected & detected.T
    else:
        adjacency = detected.copy()

    margins = {}
    for i, j in zip(*np.nonzero(adjacency)):
        entries = [np.abs(coupling[i, j]).ravel()]
        if policy != "none":
            entries.append(np.abs(coupling[j, i]).ravel())
        entries = np.concatenate(entries)
        surviving = entries[entries > threshold]
        margins[(int(i), int(j))] = (
            float(surviving.min() / threshold) if threshold > 0 else float("inf")
        )

    nonlinear = {
        (int(i), int(j)): float(evidence[i, j])
        for i, j in zip(*np.nonzero(evidence > threshold))
    }
    if nonlinear:
        logger.info(f"Nonlinear coupling evidence on {len(nonlinear)} directed pairs")

    estimate = NetworkEstimate(
        coupling, adjacency, threshold, policy, margins, [], nonlinear, rows
    )
    estimate.nodal_models = [extract_nodal_dynamics(estimate, i) for i in range(n)]
    logger.info(
        f"Network estimate: {int(adjacency.sum()) // (1 if policy == 'none' else 2)} "
        f"edges at threshold {threshold:.4g} ({policy})"
    )
    return estimate


def extract_nodal_dynamics(estimate: NetworkEstimate, node: int) -> dict:
    """Local dynamics F_i = Gamma_i + sum_j C_ij x_i

    The coupling blocks C_ij read off node's own equations are added back onto
    the linear terms of node's own block"""
    if not 0 <= node < len(estimate.rows):
        raise utils.FriendlyValueError(f"Node {node} has not been reconstructed")
    row = estimate.rows[node]
    columns, descriptors = row.block(node)
    local = np.array(row.coefficients[:, list(columns)])
    gamma = local.copy()
    folded = sum(
        (estimate.coupling[node, j] for j in range(estimate.n) if j != node),
        np.zeros((row.d, row.d)),
    )
    for k, descriptor in enumerate(descriptors):
        if descriptor.degree == 1:
            local[:, k] += folded[:, descriptor.exponents.index(1)]
    return {
        "node": node,
        "library": [d.to_dict() for d in descriptors],
        "gamma": gamma,
        "coefficients": local,
    }


@utils.timed(logger)
def reconstruct_network(
    data: NetworkData,
    order: int = 1,
    solver: SolverConfig = SolverConfig(solver="omp"),
    max_samples: t.Optional[int] = None,
    threshold: t.Optional[float] = None,
    policy: str = "or",
    tol: float = cfg.network_tolerance,
    targets: t.Optional[TimeSeries] = None,
    seed: int = 0,
) -> NetworkEstimate:
    """Reconstruct every node, in a thread pool, then assemble

    targets can carry measured derivatives in place of estimated ones"""
    if targets is None:
        targets = diffest.derivative(data.series, solver.scheme)
    logger.info(
        f"Reconstructing {data.n} nodes of dim {data.d} from "
        f"{min(len(targets), max_samples or len(targets))} samples each"
    )
    rows = utils.map_units(
        lambda node: reconstruct_node(
            data, node, order, solver, max_samples, targets, tol, seed
        ),
        range(data.n),
    )
    return assemble_network(rows, threshold, policy)
