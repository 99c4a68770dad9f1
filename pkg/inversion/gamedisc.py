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

import attr
import numpy as np
from scipy import optimize

from . import cfg, solvers, utils
from .schemas import (
    COOPERATE,
    DEFECT,
    GameParams,
    GameRecord,
    RegressionProblem,
    SolverConfig,
)

logger = logging.getLogger("main/" + __name__)

# Continuous solvers, used when no 0/1 link vector fits the payoffs exactly
AGENT_SOLVER = SolverConfig(solver="lasso", positive=True, normalize=False)
JOINT_SOLVER = SolverConfig(solver="stls", normalize=False)


Strategy = t.Union[str, int]


def parse_strategy(value: Strategy) -> int:
    if value in ("C", "c", COOPERATE):
        return COOPERATE
    if value in ("D", "d", DEFECT):
        return DEFECT
    raise utils.ParseError(f"Unknown strategy {value!r}, expected C or D")


def pair_payoff(s_self: Strategy, s_other: Strategy, params: GameParams) -> float:
    """Payoff of s_self against s_other, S_self^T P S_other"""
    return float(params.payoff_matrix[parse_strategy(s_self), parse_strategy(s_other)])


@attr.s(frozen=True, eq=False)
class AgentReconstruction:
    agent: int = attr.ib()
    others: t.Tuple[int, ...] = attr.ib(converter=tuple)
    weights: np.ndarray = attr.ib()
    rank: int = attr.ib()
    threshold: float = attr.ib(default=cfg.game_threshold)
    # binary, or the name of the continuous solver that produced the weights
    method: str = attr.ib(default="binary")

    @property
    def links(self) -> np.ndarray:
        return self.weights > self.threshold

    def neighbours(self) -> t.List[int]:
        return [y for y, link in zip(self.others, self.links) if link]


@attr.s(frozen=True, eq=False)
class SocialNetwork:
    adjacency: np.ndarray = attr.ib()
    consistency: float = attr.ib()
    policy: str = attr.ib()
    # Agent rows, or the joint system, fitted by the continuous solver
    continuous_fits: int = attr.ib(default=0)

    def edges(self) -> t.List[t.Tuple[int, int, float]]:
        return [
            (int(i), int(j), 1.0)
            for i, j in zip(*np.nonzero(np.triu(self.adjacency, 1)))
        ]


def agent_system(
    record: GameRecord, params: GameParams, agent: int
) -> t.Tuple[np.ndarray, np.ndarray, t.List[int]]:
    """G_x with G_x[t, y] = S_x(t)^T P S_y(t) for every y != x, and X_x"""
    if not 0 <= agent < record.n:
        raise utils.FriendlyValueError(f"No agent {agent} among {record.n}")
    others = [y for y in range(record.n) if y != agent]
    matrix = params.payoff_matrix
    own = record.strategies[:, agent]
    G = matrix[own[:, None], record.strategies[:, others]]
    return G, record.payoffs[:, agent], others


def binary_solve(
    matrix: np.ndarray, target: np.ndarray, cost: t.Optional[np.ndarray] = None
) -> t.Optional[np.ndarray]:
    """Cheapest 0/1 vector a with matrix a = target, None when there is none

    Equations may miss by game_tolerance relative to the largest payoff. The
    cost defaults to one per link, so the sparsest fitting vector wins"""
    N = matrix.shape[1]
    cost = np.ones(N) if cost is None else np.asarray(cost, dtype=float)
    if not matrix.shape[0]:
        return (cost < 0).astype(float)
    slack = cfg.game_tolerance * max(1.0, float(np.abs(target).max()))
    result = optimize.milp(
        cost,
        integrality=np.ones(N),
        bounds=optimize.Bounds(0, 1),
        constraints=optimize.LinearConstraint(matrix, target - slack, target + slack),
    )
    if not result.success:
        logger.debug(f"Binary payoff fit failed: {result.message}")
        return None
    return np.round(result.x)


def _solve(
    matrix: np.ndarray, target: np.ndarray, solver: SolverConfig
) -> np.ndarray:
    if not np.any(matrix):
        return np.zeros(matrix.shape[1])
    problem = RegressionProblem(
        matrix,
        target,
        threshold=solver.threshold,
        relative=solver.relative,
        max_support=solver.max_support,
        positive=solver.positive,
    )
    lam = solver.lam
    if solver.solver == "lasso" and lam is None:
        peak = np.abs(matrix.T @ target).max() / matrix.shape[0]
        lam = cfg.game_lambda_fraction * peak
    return solvers.solve(problem.evolve(lam=lam or 0.0), solver.solver).coefficients


def reconstruct_agent(
    record: GameRecord,
    params: GameParams,
    agent: int,
    solver: SolverConfig = AGENT_SOLVER,
    threshold: float = cfg.game_threshold,
    binary: bool = True,
    claims: t.Optional[np.ndarray] = None,
) -> AgentReconstruction:
    """Neighbour weights of agent from its payoffs, P_x = G_x A_x

    The agent's own column is left out of G_x. True weights are exactly 0 or
    1, so the sparsest 0/1 vector meeting every payoff equation is taken,
    which works with fewer rounds than candidates. claims[y, x] marks links other
    agents already report; among equally good vectors the one agreeing with
    them wins. Noisy payoffs that no 0/1 vector meets go to the continuous
    solver, and weights above threshold are links"""
    G, X, others = agent_system(record, params, agent)
    rank = int(np.linalg.matrix_rank(G)) if np.any(G) else 0
    if not np.any(G):
        logger.warning(f"Agent {agent}: every candidate column is zero")

    weights = None
    if binary:
        cost = np.ones(len(others))
        if claims is not None:
            cost = cost - cfg.partner_bonus * claims[others, agent]
        weights = binary_solve(G, X, cost)
        if weights is None:
            logger.warning(
                f"Agent {agent}: no 0/1 link vector meets the payoffs, "
                f"falling back to {solver.solver}"
            )
    if weights is not None:
        return AgentReconstruction(agent, others, weights, rank, threshold)

    if rank < min(G.shape):
        logger.warning(
            f"Agent {agent}: payoff system has rank {rank} for "
            f"{G.shape[0]} rounds & {G.shape[1]} candidates, "
            "strategies are too uniform to separate every neighbour"
        )
    weights = _solve(G, X, solver)
    return AgentReconstruction(agent, others, weights, rank, threshold, solver.solver)


def joint_system(
    record: GameRecord, params: GameParams
) -> t.Tuple[np.ndarray, np.ndarray, t.List[t.Tuple[int, int]]]:
    """All agents' payoff equations stacked over the pair unknowns a_xy = a_yx"""
    n, M = record.n, record.rounds
    pairs = [(x, y) for x in range(n) for y in range(x + 1, n)]
    matrix = params.payoff_matrix
    S = record.strategies
    G = np.zeros((n * M, len(pairs)))
    for k, (x, y) in enumerate(pairs):
        G[x * M : (x + 1) * M, k] = matrix[S[:, x], S[:, y]]
        G[y * M : (y + 1) * M, k] = matrix[S[:, y], S[:, x]]
    return G, record.payoffs.T.reshape(-1), pairs


def reconstruct_joint(
    record: GameRecord,
    params: GameParams,
    solver: SolverConfig = JOINT_SOLVER,
    threshold: float = cfg.game_threshold,
    binary: bool = True,
) -> SocialNetwork:
    """Symmetric adjacency from the whole population's payoffs at once

    n M equations for n(n-1)/2 unknowns, so few rounds suffice when every
    agent's payoffs are recorded"""
    G, X, pairs = joint_system(record, params)
    rank = int(np.linalg.matrix_rank(G)) if np.any(G) else 0
    logger.info(
        f"Joint payoff system: {G.shape[0]} equations, {len(pairs)} pairs, rank {rank}"
    )

    weights = binary_solve(G, X) if binary else None
    continuous_fits = int(weights is None)
    if weights is None:
        if binary:
            logger.warning(
                f"No 0/1 adjacency meets the payoffs, falling back to {solver.solver}"
            )
        if rank < len(pairs):
            logger.warning(
                f"Joint payoff system is rank deficient ({rank} < {len(pairs)})"
            )
        weights = _solve(G, X, solver)

    n = record.n
    adjacency = np.zeros((n, n), dtype=bool)
    for (x, y), weight in zip(pairs, weights):
        adjacency[x, y] = adjacency[y, x] = weight > threshold
    return SocialNetwork(adjacency, 1.0, "joint", continuous_fits)


def claimed_links(rows: t.Sequence[AgentReconstruction]) -> np.ndarray:
    """links[x, y] when agent x's row reports y as a neighbour"""
    n = len(rows)
    links = np.zeros((n, n), dtype=bool)
    for row in rows:
        links[row.agent, list(row.others)] = row.links
    return links


def assemble_social_network(
    rows: t.Sequence[AgentReconstruction], policy: str = "or"
) -> SocialNetwork:
    """Adjacency from per-agent rows plus the share of pairs both rows agree on"""
    if policy not in ("or", "and"):
        raise utils.FriendlyValueError(f"Unknown policy {policy!r}")
    rows = sorted(rows, key=lambda r: r.agent)
    n = len(rows)
    if [r.agent for r in rows] != list(range(n)):
        raise utils.FriendlyValueError("Every agent must be reconstructed exactly once")
    links = claimed_links(rows)
    agree = links == links.T
    upper = np.triu_indices(n, 1)
    consistency = float(agree[upper].mean()) if n > 1 else 1.0
    adjacency = links | links.T if policy == "or" else links & links.T
    if consistency < 1:
        logger.warning(
            f"Row estimates disagree on {int((~agree[upper]).sum())} pairs "
            f"(consistency {consistency:.3f}, {policy} policy applied)"
        )
    continuous_fits = sum(row.method != "binary" for row in rows)
    return SocialNetwork(adjacency, consistency, policy, continuous_fits)


@utils.timed(logger)
def reconstruct_game_network(
    record: GameRecord,
    params: GameParams,
    mode: str = "agent",
    solver: t.Optional[SolverConfig] = None,
    threshold: float = cfg.game_threshold,
    policy: str = "or",
    binary: bool = True,
) -> SocialNetwork:
    """Whole network, agent by agent (in a thread pool) or jointly

    Binary agent rows are solved twice: the second pass settles ties within an
    agent's payoffs by the links its partners reported in the first"""
    logger.info(f"Reconstructing {record.n} agents, {record.rounds} rounds ({mode})")
    if mode == "joint":
        return reconstruct_joint(
            record, params, solver or JOINT_SOLVER, threshold, binary
        )
    if mode != "agent":
        raise utils.FriendlyValueError(f"Unknown mode {mode!r}, use agent or joint")

    def rows(claims):
        return utils.map_units(
            lambda x: reconstruct_agent(
                record, params, x, solver or AGENT_SOLVER, threshold, binary, claims
            ),
            range(record.n),
        )

    first = rows(None)
    if not binary or all(row.method != "binary" for row in first):
        return assemble_social_network(first, policy)
    return assemble_social_network(rows(claimed_links(first)), policy)
