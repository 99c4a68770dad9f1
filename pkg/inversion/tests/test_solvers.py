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

import numpy as np
import pytest

from .. import solvers, utils
from ..schemas import RegressionProblem


def sparse_problem(seed, M, N, k, **kwargs):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(M, N))
    truth = np.zeros(N)
    support = rng.choice(N, k, replace=False)
    truth[support] = rng.choice([-1, 1], k) * rng.uniform(1.0, 2.0, k)
    return RegressionProblem(G, G @ truth, **kwargs), truth


def test_lasso_subgradient_optimality():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(30, 20))
        X = rng.normal(size=30)
        lam = 0.1 * np.abs(G.T @ X).max() / 30
        problem = RegressionProblem(G, X, lam=lam, threshold=0.0, debias=False)
        solution = solvers.solve_lasso_cd(problem)
        assert solution.converged

        a = solution.coefficients
        gradient = G.T @ (X - G @ a) / 30
        active = a != 0
        np.testing.assert_allclose(
            gradient[active], lam * np.sign(a[active]), atol=1e-6
        )
        assert np.all(np.abs(gradient[~active]) <= lam + 1e-6)


def test_lasso_positive():
    problem, truth = sparse_problem(3, 60, 15, 3, lam=1e-3)
    solution = solvers.solve_lasso_cd(problem.evolve(positive=True))
    assert np.all(solution.coefficients >= 0)
    with pytest.raises(utils.FriendlyValueError):
        solvers.solve_lasso_cd(RegressionProblem(np.zeros((4, 2)), np.ones(4)))


def test_omp_residual_is_monotone():
    for seed in range(20):
        problem, _ = sparse_problem(seed, 40, 100, 6)
        solution = solvers.solve_omp(problem)
        history = np.array(solution.history)
        assert history[0] == pytest.approx(np.linalg.norm(problem.target))
        assert np.all(np.diff(history) <= 1e-9 * history[0])


def test_omp_respects_max_support():
    problem, _ = sparse_problem(5, 40, 100, 6, max_support=3)
    solution = solvers.solve_omp(problem)
    assert solution.sparsity <= 3
    assert solution.iterations == 3
    assert not solution.converged


def test_solvers_agree_on_sparse_problems():
    # k <= M / 4 with fewer rows than columns
    agreeing = 0
    for seed in range(100):
        problem, truth = sparse_problem(seed, 20, 64, 3)
        lam = 1e-3 * np.abs(problem.matrix.T @ problem.target).max() / 20
        supports = [
            solvers.solve(problem.evolve(lam=lam), name).support
            for name in ("lasso", "omp", "stls")
        ]
        expected = tuple(int(i) for i in np.flatnonzero(truth))
        agreeing += all(s == expected for s in supports)
    assert agreeing >= 99


def test_underdetermined_recovery():
    omp_exact = lasso_exact = 0
    for seed in range(10):
        problem, truth = sparse_problem(seed, 40, 100, 4)
        omp = solvers.solve_omp(problem)
        omp_exact += np.allclose(omp.coefficients, truth, atol=1e-6)

        lam = 1e-2 * np.abs(problem.matrix.T @ problem.target).max() / 40
        lasso = solvers.solve_lasso_cd(problem.evolve(lam=lam))
        lasso_exact += np.allclose(lasso.coefficients, truth, atol=1e-6)
    assert omp_exact >= 8
    assert lasso_exact >= 8


def test_stls_drops_small_terms():
    rng = np.random.default_rng(7)
    G = rng.normal(size=(50, 6))
    truth = np.array([2.0, 0.0, -1.0, 0.0, 0.0, 0.5])
    X = G @ truth + 1e-6 * rng.normal(size=50)
    solution = solvers.solve_stls(RegressionProblem(G, X, threshold=0.01))
    assert solution.support == (0, 2, 5)
    assert solution.converged
    np.testing.assert_allclose(solution.coefficients, truth, atol=1e-5)
    dropped = sorted(i for step in solution.history for i in step)
    assert dropped == [1, 3, 4]


def test_stls_threshold_too_high():
    problem, _ = sparse_problem(2, 30, 10, 3, threshold=1.5)
    with pytest.raises(utils.ThresholdTooHighError):
        solvers.solve_stls(problem)


def test_stls_threshold_too_high_on_a_later_pass():
    # The first pass keeps a = 1.0 and drops a = -0.4, the refit then gives 0.2
    G = np.array([[1.0, 2.0], [0.0, 1.0], [0.0, 0.0]])
    problem = RegressionProblem(G, [0.2, -0.4, 0.0], threshold=0.5, relative=False)
    with pytest.raises(utils.ThresholdTooHighError, match="pass 2"):
        solvers.solve_stls(problem)


@pytest.mark.parametrize("name", ["lasso", "omp", "stls"])
def test_normalized_columns_with_partial_support(name):
    rng = np.random.default_rng(4)
    raw = rng.normal(size=(60, 8)) * [1.0, 10.0, 0.1, 1.0, 5.0, 0.5, 1.0, 2.0]
    truth = np.array([2.0, 0.0, -1.0, 0.0, 0.0, 0.5, 0.0, 0.0])
    norms = np.linalg.norm(raw, axis=0)
    problem = RegressionProblem(raw / norms, raw @ truth, column_norms=norms)
    lam = 1e-4 * np.abs(problem.matrix.T @ problem.target).max() / 60

    solution = solvers.solve(problem.evolve(lam=lam), name)

    assert solution.support == (0, 2, 5)
    np.testing.assert_allclose(solution.coefficients / norms, truth, atol=1e-6)


def test_thresholds_compare_denormalized_coefficients():
    rng = np.random.default_rng(11)
    raw = rng.normal(size=(40, 3)) * [1.0, 100.0, 1.0]
    X = raw @ [1.0, 0.001, 1.0]
    norms = np.linalg.norm(raw, axis=0)
    problem = RegressionProblem(raw / norms, X, threshold=0.01, column_norms=norms)
    solution = solvers.solve_stls(problem)
    # 0.001 is tiny in natural units although its normalised coefficient is not
    assert solution.support == (0, 2)


def test_cross_validation_prefers_zero_model_on_noise():
    rng = np.random.default_rng(0)
    problem = RegressionProblem(rng.normal(size=(60, 30)), rng.normal(size=60))
    grid = [1e-3, 1e-2, 3e-2, 10.0]
    assert solvers.cross_validate_lambda(problem, 5, grid) == 10.0
    # Equal errors go to the smallest lambda
    assert solvers.cross_validate_lambda(problem, 5, [20.0, 10.0]) == 10.0
    assert solvers.cross_validate_lambda(problem, 5, [0.5]) == 0.5
    with pytest.raises(utils.FriendlyValueError):
        solvers.cross_validate_lambda(problem, 1, grid)


def test_unknown_solver():
    problem, _ = sparse_problem(1, 10, 5, 1)
    with pytest.raises(utils.FriendlyValueError):
        solvers.solve(problem, "basis_pursuit")
