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
import scipy.linalg
import scipy.optimize

from . import cfg, utils
from .basislib import mutual_coherence
from .schemas import RegressionProblem, SparseSolution

logger = logging.getLogger("main/" + __name__)

__all__ = [
    "cross_validate_lambda",
    "mutual_coherence",
    "solve",
    "solve_lasso_cd",
    "solve_omp",
    "solve_stls",
]


def _magnitudes(
    problem: RegressionProblem, coefficients: np.ndarray, columns: np.ndarray
) -> np.ndarray:
    """De-normalized |coefficients| of the given columns"""
    if problem.column_norms is None:
        return np.abs(coefficients)
    return np.abs(coefficients / problem.column_norms[columns])


def _cutoff(problem: RegressionProblem, magnitudes: np.ndarray) -> float:
    if not problem.relative:
        return problem.threshold
    return problem.threshold * (magnitudes.max() if magnitudes.size else 0.0)


def _least_squares(matrix: np.ndarray, target: np.ndarray) -> np.ndarray:
    # Rank revealing (SVD) solve, i.e. the pseudoinverse on rank deficiency
    solution, _, rank, _ = scipy.linalg.lstsq(
        matrix, target, cond=cfg.pinv_rcond, lapack_driver="gelsd"
    )
    if rank < matrix.shape[1]:
        logger.warning(
            f"Rank deficient refit: rank {rank} for {matrix.shape[1]} columns"
        )
    return solution


def _refit(
    problem: RegressionProblem, support: t.Sequence[int]
) -> np.ndarray:
    coefficients = np.zeros(problem.shape[1])
    support = list(support)
    if not support:
        return coefficients
    sub = problem.matrix[:, support]
    if problem.positive:
        coefficients[support], _ = scipy.optimize.nnls(sub, problem.target)
    else:
        coefficients[support] = _least_squares(sub, problem.target)
    return coefficients


def _prune_and_refit(
    problem: RegressionProblem, coefficients: np.ndarray
) -> np.ndarray:
    """Zero coefficients under the threshold, refit the rest, until stable"""
    coefficients = _prune(problem, coefficients)
    if not problem.debias:
        return coefficients
    # The support strictly shrinks on every pass that does not return
    for _ in range(problem.shape[1] + 1):
        refit = _refit(problem, np.flatnonzero(coefficients))
        pruned = _prune(problem, refit)
        if np.array_equal(np.flatnonzero(pruned), np.flatnonzero(refit)):
            return refit
        coefficients = pruned
    return coefficients


def _prune(problem: RegressionProblem, coefficients: np.ndarray) -> np.ndarray:
    pruned = np.array(coefficients, dtype=float)
    support = np.flatnonzero(pruned)
    magnitudes = _magnitudes(problem, pruned[support], support)
    pruned[support[magnitudes < _cutoff(problem, magnitudes)]] = 0.0
    return pruned


def _residual_norm(problem: RegressionProblem, coefficients: np.ndarray) -> float:
    return float(np.linalg.norm(problem.matrix @ coefficients - problem.target))


def _soft_threshold(value: float, level: float) -> float:
    if value > level:
        return value - level
    if value < -level:
        return value + level
    return 0.0


def solve_lasso_cd(problem: RegressionProblem) -> SparseSolution:
    """Minimise (1/2M)||G a - X||^2 + lam ||a||_1 by cyclic coordinate descent

    Covariance updates are used, so every sweep costs O(N^2). Afterwards terms
    under the hard threshold are removed and the survivors are refit without
    penalty"""
    G, X = problem.matrix, problem.target
    M, N = G.shape
    if not np.any(G):
        raise utils.FriendlyValueError("LASSO needs a matrix with a nonzero entry")

    gram = G.T @ G / M
    correlations = G.T @ X / M
    diagonal = np.diag(gram).copy()
    coefficients = np.zeros(N)
    # gram @ coefficients, kept in step with every coordinate update
    fitted = np.zeros(N)

    converged = False
    iterations = 0
    while iterations < problem.max_iter:
        iterations += 1
        largest_step = 0.0
        for j in range(N):
            if diagonal[j] == 0:
                continue
            rho = correlations[j] - fitted[j] + diagonal[j] * coefficients[j]
            updated = _soft_threshold(rho, problem.lam) / diagonal[j]
            if problem.positive and updated < 0:
                updated = 0.0
            step = updated - coefficients[j]
            if step:
                coefficients[j] = updated
                fitted += gram[:, j] * step
                largest_step = max(largest_step, abs(step))
        if largest_step < problem.tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"Coordinate descent did not converge in {problem.max_iter} sweeps "
            f"(lambda={problem.lam:g})"
        )

    coefficients = _prune_and_refit(problem, coefficients)
    return SparseSolution(
        coefficients,
        _residual_norm(problem, coefficients),
        "lasso_cd",
        lam=problem.lam,
        threshold=problem.threshold,
        iterations=iterations,
        converged=converged,
    )


def _unit_columns(matrix: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(matrix, axis=0)
    unit = np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)
    return unit, norms


def _greedy_support(
    problem: RegressionProblem,
) -> t.Tuple[t.List[int], np.ndarray, t.List[float], bool]:
    """Forward OMP selection followed, at the cap, by an exchange stage

    The exchange stage adds the column most correlated with the residual and
    drops the support column contributing least to the refit, as long as the
    residual strictly decreases"""
    G, X = problem.matrix, problem.target
    M, N = G.shape
    unit, norms = _unit_columns(G)
    cap = min(problem.max_support or max(1, M // 2), M, N)
    tolerance = max(problem.tol, cfg.omp_tolerance) * max(1.0, np.linalg.norm(X))

    support: t.List[int] = []
    coefficients = np.zeros(N)
    residual = X.copy()
    history = [float(np.linalg.norm(residual))]
    while len(support) < cap and history[-1] >= tolerance:
        scores = np.abs(unit.T @ residual)
        scores[support] = -1.0
        pick = int(np.argmax(scores))
        if scores[pick] <= cfg.omp_tolerance * history[-1]:
            break
        support.append(pick)
        coefficients = _refit(problem, support)
        residual = X - G @ coefficients
        history.append(float(np.linalg.norm(residual)))

    swaps = 0
    while (
        len(support) == cap
        and cap < N
        and history[-1] >= tolerance
        and swaps < cfg.omp_exchange_steps
    ):
        scores = np.abs(unit.T @ residual)
        scores[support] = -1.0
        incoming = int(np.argmax(scores))
        if scores[incoming] <= cfg.omp_tolerance * history[-1]:
            break
        enlarged = support + [incoming]
        contributions = np.abs(_refit(problem, enlarged)[enlarged]) * norms[enlarged]
        trial = [c for c in enlarged if c != enlarged[int(np.argmin(contributions))]]
        trial_coefficients = _refit(problem, trial)
        trial_residual = X - G @ trial_coefficients
        if np.linalg.norm(trial_residual) >= history[-1]:
            break
        support, coefficients, residual = trial, trial_coefficients, trial_residual
        history.append(float(np.linalg.norm(residual)))
        swaps += 1
    if swaps:
        logger.debug(f"OMP exchanged {swaps} support columns at the cap of {cap}")

    return support, coefficients, history, history[-1] < tolerance


def solve_omp(problem: RegressionProblem) -> SparseSolution:
    """Orthogonal matching pursuit on unit normalised columns

    Picks the column most correlated with the residual (lowest index on ties)
    and refits the whole support by least squares after every pick. A support
    that reaches the cap without fitting the target goes through a bounded
    exchange stage"""
    support, coefficients, history, converged = _greedy_support(problem)
    coefficients = _prune_and_refit(problem, coefficients)
    return SparseSolution(
        coefficients,
        _residual_norm(problem, coefficients),
        "omp",
        threshold=problem.threshold,
        iterations=len(support),
        converged=converged,
        history=history,
    )


def solve_stls(problem: RegressionProblem) -> SparseSolution:
    """Sequentially thresholded least squares

    Solves by pseudoinverse on the active set and drops every term under the
    threshold until no term is dropped. The active set only ever shrinks so
    the loop ends within N + 1 passes. With fewer rows than columns the
    pseudoinverse is dense, so the active set starts from the greedy support"""
    M, N = problem.shape
    if M < N:
        active = np.array(sorted(_greedy_support(problem)[0]), dtype=int)
        logger.debug(f"Underdetermined STLS starts from {active.size} greedy columns")
    else:
        active = np.arange(N)
    coefficients = np.zeros(N)
    dropped: t.List[t.Tuple[int, ...]] = []
    converged = not active.size
    iterations = 0
    while active.size and iterations < min(problem.max_iter, N + 1):
        iterations += 1
        coefficients = np.zeros(N)
        coefficients[active] = _least_squares(
            problem.matrix[:, active], problem.target
        )
        magnitudes = _magnitudes(problem, coefficients[active], active)
        small = magnitudes < _cutoff(problem, magnitudes)
        if small.all():
            raise utils.ThresholdTooHighError(
                f"Threshold {problem.threshold:g} removes every term "
                f"(pass {iterations})"
            )
        if not small.any():
            converged = True
            break
        dropped.append(tuple(int(i) for i in active[small]))
        coefficients[active[small]] = 0.0
        active = active[~small]

    if not converged:
        logger.warning("Thresholded least squares ended without a stable support")
    return SparseSolution(
        coefficients,
        _residual_norm(problem, coefficients),
        "stls",
        threshold=problem.threshold,
        iterations=iterations,
        converged=converged,
        history=dropped,
    )


SOLVERS: t.Dict[str, t.Callable[[RegressionProblem], SparseSolution]] = {
    "lasso": solve_lasso_cd,
    "omp": solve_omp,
    "stls": solve_stls,
}


def solve(problem: RegressionProblem, solver: str = "stls") -> SparseSolution:
    try:
        return SOLVERS[solver](problem)
    except KeyError:
        raise utils.FriendlyValueError(
            f"Unknown solver {solver!r}, expected one of {sorted(SOLVERS)}"
        ) from None


def cross_validate_lambda(
    problem: RegressionProblem,
    folds: int = 5,
    grid: t.Optional[t.Sequence[float]] = None,
) -> float:
    """Pick the LASSO weight with the lowest mean held-out squared error

    Folds are contiguous blocks of rows. Ties go to the smallest lambda"""
    if grid is None:
        peak = np.abs(problem.matrix.T @ problem.target).max() / problem.shape[0]
        grid = np.geomspace(1e-4 * peak, peak, 12) if peak > 0 else [0.0]
    grid = sorted(float(v) for v in grid)
    if not grid:
        raise utils.FriendlyValueError("Cross validation needs a lambda grid")
    if len(grid) == 1:
        return grid[0]
    M = problem.shape[0]
    if not 2 <= folds <= M:
        raise utils.FriendlyValueError(f"Need 2 <= folds <= {M}, got {folds}")

    blocks = np.array_split(np.arange(M), folds)
    errors = []
    for lam in grid:
        fold_errors = []
        for block in blocks:
            train = np.setdiff1d(np.arange(M), block)
            fit = solve_lasso_cd(
                problem.evolve(
                    matrix=problem.matrix[train], target=problem.target[train], lam=lam
                )
            )
            prediction = problem.matrix[block] @ fit.coefficients
            fold_errors.append(np.mean((prediction - problem.target[block]) ** 2))
        errors.append(float(np.mean(fold_errors)))
        logger.debug(f"lambda={lam:g} held-out error {errors[-1]:.6g}")

    chosen = grid[int(np.argmin(errors))]
    logger.info(f"Cross validation chose lambda={chosen:g}")
    return chosen
