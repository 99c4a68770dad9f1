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

from .. import gamedisc, simkit, utils
from ..schemas import GameParams, GameRecord

PDG = GameParams("PDG", b=1.2)


def _default_game(seed, rounds, **parameters):
    spec = simkit.default_spec(
        "game",
        seed=seed,
        horizon=rounds,
        parameters={"n": 22, "mean_degree": 4, **parameters},
    )
    return simkit.game_topology(spec), simkit.game_params(spec), simkit.simulate(spec)


def _population(seed, n=22, mean_degree=4):
    graph = simkit.build_topology(n, "erdos_renyi", seed=seed, p=mean_degree / (n - 1))
    return simkit.adjacency_matrix(graph)


def _record(adjacency, strategies, params=PDG):
    strategies = np.array(strategies)
    payoffs = [simkit.round_payoffs(s, adjacency, params) for s in strategies]
    return GameRecord(strategies, payoffs)


def test_pair_payoffs():
    assert gamedisc.pair_payoff("C", "C", PDG) == 1.0
    assert gamedisc.pair_payoff("C", "D", PDG) == 0.0
    assert gamedisc.pair_payoff("D", "C", PDG) == 1.2
    assert gamedisc.pair_payoff("d", "d", PDG) == 0.0

    snowdrift = GameParams("SG", r=0.25)
    assert gamedisc.pair_payoff(0, 1, snowdrift) == 0.75
    assert gamedisc.pair_payoff(1, 0, snowdrift) == 1.25

    with pytest.raises(utils.ParseError):
        gamedisc.pair_payoff("X", "C", PDG)


def test_agent_system_entries():
    record = GameRecord([[0, 0, 1], [1, 0, 0]], [[1.0, 1.0, 1.2], [2.4, 1.0, 0.0]])
    G, X, others = gamedisc.agent_system(record, PDG, 0)
    assert others == [1, 2]
    np.testing.assert_array_equal(G, [[1.0, 0.0], [1.2, 1.2]])
    np.testing.assert_array_equal(X, [1.0, 2.4])

    with pytest.raises(utils.FriendlyValueError):
        gamedisc.agent_system(record, PDG, 3)


def test_binary_solve():
    matrix = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    target = np.array([1.0, 1.0])
    np.testing.assert_array_equal(gamedisc.binary_solve(matrix, target), [0, 1, 0])
    np.testing.assert_array_equal(
        gamedisc.binary_solve(matrix, target, cost=[-1.0, 1.0, -1.0]), [1, 0, 1]
    )
    assert gamedisc.binary_solve(matrix, np.array([3.0, 0.0])) is None
    # Rounding error in recorded payoffs stays within tolerance
    assert gamedisc.binary_solve(matrix, target + 1e-9) is not None


@pytest.mark.parametrize("rounds", [15, 30])
def test_per_agent_recovery(rounds):
    for seed in range(10):
        adjacency, params, record = _default_game(seed, rounds)
        assert record.rounds == rounds

        network = gamedisc.reconstruct_game_network(record, params, mode="agent")

        assert np.array_equal(network.adjacency, adjacency), f"seed {seed}"
        assert network.continuous_fits == 0
        assert len(network.edges()) == int(adjacency.sum()) // 2


@pytest.mark.parametrize("rounds", [15, 30])
def test_joint_recovery(rounds):
    for seed in range(10):
        adjacency, params, record = _default_game(seed, rounds)

        network = gamedisc.reconstruct_game_network(record, params, mode="joint")

        assert np.array_equal(network.adjacency, adjacency), f"seed {seed}"
        assert network.policy == "joint"
        assert network.continuous_fits == 0


def test_agent_weights_are_exact():
    adjacency, params, record = _default_game(0, 30)
    row = gamedisc.reconstruct_agent(record, params, 3)
    truth = adjacency[3, list(row.others)].astype(float)
    np.testing.assert_array_equal(row.weights, truth)
    assert row.neighbours() == list(np.flatnonzero(adjacency[3]))
    assert row.method == "binary"


def test_partner_claims_break_ties():
    adjacency = np.zeros((3, 3))
    adjacency[0, 1] = adjacency[1, 0] = 1
    # Agents 1 and 2 always play alike, so agent 0's payoffs cannot tell them apart
    record = _record(adjacency, [[0, 0, 0], [0, 1, 1], [1, 0, 0], [1, 1, 1]])
    alone = gamedisc.reconstruct_agent(record, PDG, 0)
    assert len(alone.neighbours()) == 1

    claims = np.zeros((3, 3), dtype=bool)
    claims[1, 0] = True
    assert gamedisc.reconstruct_agent(record, PDG, 0, claims=claims).neighbours() == [1]
    claims = np.zeros((3, 3), dtype=bool)
    claims[2, 0] = True
    assert gamedisc.reconstruct_agent(record, PDG, 0, claims=claims).neighbours() == [2]


def test_joint_snowdrift():
    adjacency, params, record = _default_game(4, 15, game="SG", r=0.4)
    assert params.game == "SG"
    network = gamedisc.reconstruct_joint(record, params)
    assert np.array_equal(network.adjacency, adjacency)


def test_noisy_payoffs_fall_back_to_lasso():
    adjacency = _population(2)
    record = simkit.simulate_game(adjacency, PDG, 40, payoff_noise=0.05, seed=2)
    row = gamedisc.reconstruct_agent(record, PDG, 0)
    assert row.method == "lasso"

    network = gamedisc.reconstruct_joint(record, PDG)
    assert network.continuous_fits == 1


def test_continuous_solvers_on_random_play():
    # Independent coin flips every round give a full rank payoff system
    adjacency = _population(1)
    record = simkit.simulate_game(adjacency, PDG, 40, exploration=1.0, seed=1)

    row = gamedisc.reconstruct_agent(record, PDG, 3, binary=False)
    assert row.method == "lasso"
    assert row.rank == 21
    np.testing.assert_allclose(
        row.weights, adjacency[3, list(row.others)].astype(float), atol=1e-6
    )

    network = gamedisc.reconstruct_game_network(record, PDG, binary=False)
    assert np.array_equal(network.adjacency, adjacency)
    assert network.continuous_fits == 22


def test_everyone_defecting_reveals_nothing():
    record = GameRecord(np.ones((10, 5), dtype=int), np.zeros((10, 5)))
    row = gamedisc.reconstruct_agent(record, PDG, 0)
    assert row.rank == 0
    assert row.neighbours() == []
    np.testing.assert_array_equal(row.weights, np.zeros(4))


def test_assemble_policies():
    rows = [
        gamedisc.AgentReconstruction(0, (1, 2), np.array([1.0, 0.0]), 2),
        gamedisc.AgentReconstruction(1, (0, 2), np.array([0.1, 0.9]), 2),
        gamedisc.AgentReconstruction(2, (0, 1), np.array([0.0, 0.8]), 2),
    ]
    either = gamedisc.assemble_social_network(rows, "or")
    both = gamedisc.assemble_social_network(rows, "and")

    assert either.consistency == pytest.approx(2 / 3)
    assert either.edges() == [(0, 1, 1.0), (1, 2, 1.0)]
    assert both.edges() == [(1, 2, 1.0)]
    np.testing.assert_array_equal(
        gamedisc.claimed_links(rows),
        [[False, True, False], [False, False, True], [False, True, False]],
    )

    with pytest.raises(utils.FriendlyValueError):
        gamedisc.assemble_social_network(rows, "none")
    with pytest.raises(utils.FriendlyValueError):
        gamedisc.assemble_social_network(rows[:1] + rows[:1])


def test_unknown_mode():
    record = GameRecord([[0, 1]], [[0.0, 1.2]])
    with pytest.raises(utils.FriendlyValueError):
        gamedisc.reconstruct_game_network(record, PDG, mode="pairwise")
