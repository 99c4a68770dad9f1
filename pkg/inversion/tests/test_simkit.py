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

from .. import simkit, utils
from ..schemas import GameParams, SimSpec, TimeSeries


def test_rk4_integration():
    states = simkit.integrate(simkit.linear([[-1.0]]), [1.0], 100, 0.01)
    assert states.shape == (101, 1)
    assert states[-1, 0] == pytest.approx(np.exp(-1.0), rel=1e-9)


def test_integration_divergence():
    with pytest.raises(utils.DivergenceError) as error:
        simkit.integrate(lambda time, s: s**2, [1.0], 1000, 0.1)
    assert error.value.step >= 1
    assert np.all(np.isfinite(error.value.partial))


def test_lorenz_default_spec(lorenz_series):
    assert isinstance(lorenz_series, TimeSeries)
    assert len(lorenz_series) == 5000
    assert lorenz_series.channel_names == ("x", "y", "z")
    assert lorenz_series.dt == pytest.approx(0.01)
    assert lorenz_series.times[0] == pytest.approx(10.0)
    # Still on the attractor
    assert np.abs(lorenz_series.values).max() < 60


def test_standard_map():
    step = simkit.standard_map(0.9)
    theta, p = step(np.array([6.0, 1.0]))
    assert p == pytest.approx(1.0 + 0.9 * np.sin(6.0))
    assert theta == pytest.approx(np.mod(6.0 + p, 2 * np.pi))
    unwrapped = simkit.standard_map(0.9, wrap=False)(np.array([6.0, 1.0]))
    assert unwrapped[0] == pytest.approx(6.0 + p)


def test_quadratic_map_iterates():
    states = simkit.iterate(simkit.quadratic_map(1.8), [0.1], 3)
    second = 1.8 - 1.79**2
    np.testing.assert_allclose(states[:, 0], [0.1, 1.79, second, 1.8 - second**2])


def test_spec_validation():
    with pytest.raises(utils.FriendlyValueError):
        SimSpec("game")
    with pytest.raises(utils.FriendlyValueError):
        SimSpec("lorenz", horizon=10, transient_discard=10)
    with pytest.raises(utils.ParseError):
        SimSpec.from_dict({"system": "lorenz", "steps": 10})
    with pytest.raises(ValueError):
        SimSpec("duffing")


def test_simulation_is_deterministic():
    spec = simkit.default_spec("game", seed=3, horizon=20)
    first, second = simkit.simulate(spec), simkit.simulate(spec)
    np.testing.assert_array_equal(first.strategies, second.strategies)
    np.testing.assert_array_equal(first.payoffs, second.payoffs)
    assert first.rounds == 20
    assert first.n == 22
    # Exploration keeps both strategies in play
    assert 0.2 < first.strategies.mean() < 0.8

    other = simkit.simulate(simkit.default_spec("game", seed=4, horizon=20))
    assert not np.array_equal(first.strategies, other.strategies)


def test_topologies():
    graph = simkit.build_topology(20, "erdos_renyi", seed=1, p=0.1)
    again = simkit.build_topology(20, "erdos_renyi", seed=1, p=0.1)
    assert sorted(graph.edges) == sorted(again.edges)

    ring = simkit.adjacency_matrix(simkit.build_topology(8, "ring", k=2))
    assert np.all(ring.sum(axis=1) == 4)
    assert not ring.diagonal().any()

    graph = simkit.build_topology(4, "edges", edges=[(0, 1), (2, 3)])
    edges = simkit.adjacency_matrix(graph)
    assert edges[0, 1] and edges[1, 0] and edges[2, 3]
    assert edges.sum() == 4
    with pytest.raises(utils.FriendlyValueError):
        simkit.build_topology(4, "edges", edges=[(1, 1)])
    with pytest.raises(utils.FriendlyValueError):
        simkit.build_topology(4, "erdos_renyi", p=0.5)


def test_network_instance():
    instance = simkit.make_network_instance(
        3, "edges", "lorenz", coupling=0.5, components=(0,), edges=[(0, 1)]
    )
    assert instance.channel_names[:3] == ["x_0", "y_0", "z_0"]
    np.testing.assert_array_equal(instance.coupling_matrix(0, 1), np.diag([0.5, 0, 0]))
    np.testing.assert_array_equal(instance.coupling_matrix(0, 2), np.zeros((3, 3)))

    state = np.arange(9.0)
    derivative = instance.rhs()(0.0, state)
    local = simkit.lorenz()(0.0, state.reshape(3, 3)).ravel()
    expected = local.copy()
    expected[0] += 0.5 * (state[3] - state[0])
    expected[3] += 0.5 * (state[0] - state[3])
    np.testing.assert_allclose(derivative, expected)


def test_fermi_normalisation():
    for kappa in (0.05, 0.1, 1.0):
        for own in np.linspace(0, 4, 9):
            for other in np.linspace(0, 4, 9):
                forward = simkit.fermi_probability(own, other, kappa)
                backward = simkit.fermi_probability(other, own, kappa)
                assert forward + backward == pytest.approx(1.0)
    assert simkit.fermi_probability(1.0, 1.0, 0.0) == 0.5
    assert simkit.fermi_probability(1.0, 2.0, 0.0) == 1.0
    assert simkit.fermi_probability(2.0, 1.0, 0.0) == 0.0


def test_round_payoffs():
    # Path 0 - 1 - 2 with strategies C, D, C
    adjacency = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    payoffs = simkit.round_payoffs(np.array([0, 1, 0]), adjacency, GameParams(b=1.5))
    np.testing.assert_allclose(payoffs, [0.0, 3.0, 0.0])
    payoffs = simkit.round_payoffs(np.array([0, 0, 0]), adjacency, GameParams(b=1.5))
    np.testing.assert_allclose(payoffs, [1.0, 2.0, 1.0])


def test_game_rules_and_exploration():
    adjacency = simkit.adjacency_matrix(simkit.build_topology(10, "ring", k=1))
    for rule in simkit.UPDATE_RULES:
        record = simkit.simulate_game(adjacency, GameParams(), 30, rule=rule, seed=0)
        assert record.strategies.shape == (30, 10)
    with pytest.raises(utils.FriendlyValueError):
        simkit.simulate_game(adjacency, GameParams(), 5, rule="imitate", seed=0)

    noisy = simkit.simulate_game(
        adjacency, GameParams(), 30, exploration=1.0, payoff_noise=0.1, seed=0
    )
    clean = simkit.round_payoffs(noisy.strategies[0], adjacency, GameParams())
    assert not np.allclose(noisy.payoffs[0], clean)
    assert np.abs(noisy.payoffs[0] - clean).max() < 1.0


def test_heat_mode_decay():
    field = simkit.simulate_heat(101, 0.01, diffusivity=0.5, amplitudes=(1.0,))
    dx = field.dx
    rate = 0.5 * (2 - 2 * np.cos(dx)) / dx**2
    expected = np.exp(-rate) * field.values[0]
    np.testing.assert_allclose(field.values[100], expected, atol=1e-8)


def test_ks_simulation(ks_field):
    assert ks_field.values.shape == (5000, 128)
    assert ks_field.dx == pytest.approx(32 * np.pi / 128)
    assert ks_field.dt == pytest.approx(0.1)
    # Spatiotemporal chaos stays bounded with zero mean
    assert np.abs(ks_field.values).max() < 10
    assert np.abs(ks_field.values.mean(axis=1)).max() < 1e-6
