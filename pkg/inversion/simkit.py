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
import math
import typing as t

import attr
import networkx as nx
import numpy as np
import scipy.special

from . import cfg, utils
from .schemas import FieldData, GameParams, GameRecord, SimSpec, TimeSeries

logger = logging.getLogger("main/" + __name__)

VectorField = t.Callable[[float, np.ndarray], np.ndarray]
Map = t.Callable[[np.ndarray], np.ndarray]

########## Stepping ###########


def rk4_step(rhs: VectorField, time: float, state: np.ndarray, dt: float) -> np.ndarray:
    k1 = rhs(time, state)
    k2 = rhs(time + dt / 2, state + dt / 2 * k1)
    k3 = rhs(time + dt / 2, state + dt / 2 * k2)
    k4 = rhs(time + dt, state + dt * k3)
    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    rhs: VectorField, state, steps: int, dt: float, t0: float = 0.0
) -> np.ndarray:
    """Fixed step RK4, returns the steps + 1 states including the initial one"""
    state = np.array(state, dtype=float)
    states = np.empty((steps + 1, *state.shape))
    states[0] = state
    for i in range(steps):
        state = rk4_step(rhs, t0 + i * dt, state, dt)
        if not np.all(np.isfinite(state)):
            raise utils.DivergenceError(i + 1, t0 + (i + 1) * dt, states[: i + 1])
        states[i + 1] = state
    return states


def iterate(step_map: Map, state, steps: int) -> np.ndarray:
    """Iterates of a map, returns the steps + 1 states including the initial one"""
    state = np.array(state, dtype=float)
    states = np.empty((steps + 1, *state.shape))
    states[0] = state
    for i in range(steps):
        state = step_map(state)
        if not np.all(np.isfinite(state)):
            raise utils.DivergenceError(i + 1, float(i + 1), states[: i + 1])
        states[i + 1] = state
    return states


############ Flows ############
# Vector fields take the state on the last axis so ensembles & networks
# of shape (..., d) are stepped in one call


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8 / 3) -> VectorField:
    def rhs(time, s):
        x, y, z = s[..., 0], s[..., 1], s[..., 2]
        return np.stack([sigma * (y - x), x * (rho - z) - y, x * y - beta * z], -1)

    return rhs


def roessler(a: float = 0.2, b: float = 0.2, c: float = 5.7) -> VectorField:
    def rhs(time, s):
        x, y, z = s[..., 0], s[..., 1], s[..., 2]
        return np.stack([-y - z, x + a * y, b + z * (x - c)], -1)

    return rhs


def linear(matrix) -> VectorField:
    matrix = np.atleast_2d(np.array(matrix, dtype=float))

    def rhs(time, s):
        return s @ matrix.T

    return rhs


def linear_drift(rate: float = 1.0, drift: float = 0.1) -> VectorField:
    """dx/dt = -(rate + drift t) x on every component"""

    def rhs(time, s):
        return -(rate + drift * time) * s

    return rhs


############# Maps ############


def standard_map(K: float, wrap: bool = True) -> Map:
    """(theta, p) -> (theta + p', p') with p' = p + K sin(theta)

    wrap reduces theta modulo 2 pi"""

    def step(s):
        theta, p = s[..., 0], s[..., 1]
        p_next = p + K * np.sin(theta)
        theta_next = theta + p_next
        if wrap:
            theta_next = np.mod(theta_next, 2 * np.pi)
        return np.stack([theta_next, p_next], -1)

    return step


def ikeda(a: float = 1.0, b: float = 0.9, k: float = 6.0, p: float = 0.4) -> Map:
    def step(s):
        x, y = s[..., 0], s[..., 1]
        phi = p - k / (1 + x**2 + y**2)
        return np.stack(
            [
                a + b * (x * np.cos(phi) - y * np.sin(phi)),
                b * (x * np.sin(phi) + y * np.cos(phi)),
            ],
            -1,
        )

    return step


def quadratic_map(a: float = 1.8) -> Map:
    def step(s):
        return a - s**2

    return step


########### Networks ##########


def build_topology(
    n: int,
    topology: str,
    seed: t.Optional[int] = None,
    p: t.Optional[float] = None,
    k: t.Optional[int] = None,
    edges: t.Optional[t.Sequence[t.Sequence[int]]] = None,
) -> nx.Graph:
    """Undirected graph on nodes 0..n-1

    erdos_renyi needs p, ring links every node to k neighbours on each side,
    edges takes an explicit edge list"""
    if n < 2:
        raise utils.FriendlyValueError("A network needs at least 2 nodes")
    if topology == "erdos_renyi":
        if p is None or not 0 <= p <= 1:
            raise utils.FriendlyValueError("erdos_renyi needs 0 <= p <= 1")
        if seed is None:
            raise utils.FriendlyValueError("erdos_renyi needs a seed")
        return nx.erdos_renyi_graph(n, p, seed=seed)
    if topology == "ring":
        if k is None or not 1 <= k < n:
            raise utils.FriendlyValueError(f"ring needs 1 <= k < {n}")
        return nx.circulant_graph(n, range(1, k + 1))
    if topology == "edges":
        graph = nx.empty_graph(n)
        for edge in edges or ():
            i, j = (int(v) for v in edge)
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise utils.FriendlyValueError(f"Invalid edge {edge}")
            graph.add_edge(i, j)
        return graph
    raise utils.FriendlyValueError(f"Unknown topology {topology!r}")


def adjacency_matrix(graph: nx.Graph) -> np.ndarray:
    return nx.to_numpy_array(graph, nodelist=range(graph.number_of_nodes())) > 0


OSCILLATORS: t.Dict[str, t.Tuple[t.Callable[..., VectorField], int]] = {
    "lorenz": (lorenz, 3),
    "roessler": (roessler, 3),
}


@attr.s(frozen=True, eq=False)
class NetworkInstance:
    """Diffusively coupled oscillators with ground truth topology

    dx_i/dt = F(x_i) + coupling * sum_j A_ij H (x_j - x_i), H masking the
    coupled components"""

    graph: nx.Graph = attr.ib()
    d: int = attr.ib()
    local: VectorField = attr.ib()
    coupling: float = attr.ib(converter=float)
    components: t.Tuple[int, ...] = attr.ib(converter=tuple)
    oscillator: str = attr.ib()

    @property
    def n(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def adjacency(self) -> np.ndarray:
        return adjacency_matrix(self.graph)

    @property
    def channel_names(self) -> t.List[str]:
        names = ("x", "y", "z") if self.d <= 3 else [f"v{c}" for c in range(self.d)]
        return [f"{names[c]}_{i}" for i in range(self.n) for c in range(self.d)]

    def coupling_matrix(self, i: int, j: int) -> np.ndarray:
        """Ground truth d x d block C_ij"""
        block = np.zeros((self.d, self.d))
        if i != j and self.adjacency[i, j]:
            for c in self.components:
                block[c, c] = self.coupling
        return block

    def rhs(self) -> VectorField:
        adjacency = self.adjacency.astype(float)
        degree = adjacency.sum(axis=1)[:, None]
        mask = np.zeros(self.d)
        mask[list(self.components)] = 1.0
        local, d, n = self.local, self.d, self.n

        def rhs(time, flat):
            states = flat.reshape(*flat.shape[:-1], n, d)
            diffusion = adjacency @ states - degree * states
            result = local(time, states) + self.coupling * mask * diffusion
            return result.reshape(flat.shape)

        return rhs


def make_network_instance(
    n: int,
    topology: str = "erdos_renyi",
    oscillator: str = "lorenz",
    coupling: float = 0.5,
    components: t.Sequence[int] = (0,),
    seed: t.Optional[int] = None,
    parameters: t.Optional[t.Dict[str, t.Any]] = None,
    **topology_options,
) -> NetworkInstance:
    """Ground truth graph plus coupled dynamics

    oscillator is lorenz, roessler or linear. The linear oscillator is
    dx/dt = -x per component, or the matrix given as parameters['matrix']"""
    graph = build_topology(n, topology, seed=seed, **topology_options)
    parameters = dict(parameters or {})
    if oscillator == "linear":
        matrix = np.atleast_2d(parameters.get("matrix", [[-1.0]]))
        local, d = linear(matrix), matrix.shape[0]
    elif oscillator in OSCILLATORS:
        factory, d = OSCILLATORS[oscillator]
        local = factory(**parameters)
    else:
        raise utils.FriendlyValueError(f"Unknown oscillator {oscillator!r}")
    if any(not 0 <= c < d for c in components):
        raise utils.FriendlyValueError(f"Coupled components must lie in 0..{d - 1}")
    logger.info(
        f"Network instance: {n} {oscillator} nodes, "
        f"{graph.number_of_edges()} edges, coupling {coupling:g}, seed {seed}"
    )
    return NetworkInstance(graph, d, local, coupling, components, oscillator)


############ Games ############


def fermi_probability(own: np.ndarray, other: np.ndarray, kappa: float) -> np.ndarray:
    """Probability of adopting the other strategy, 1 / (1 + exp((P_own - P_other) / kappa))

    kappa = 0 is the step function, with 1/2 on payoff ties"""
    difference = np.asarray(other, dtype=float) - np.asarray(own, dtype=float)
    if kappa == 0:
        return np.where(difference > 0, 1.0, np.where(difference < 0, 0.0, 0.5))
    return scipy.special.expit(difference / kappa)


def round_payoffs(
    strategies: np.ndarray, adjacency: np.ndarray, params: GameParams
) -> np.ndarray:
    """Payoff of every agent summed over its neighbours for one round"""
    matrix = params.payoff_matrix
    pairs = matrix[strategies[:, None], strategies[None, :]]
    return (adjacency * pairs).sum(axis=1)


UPDATE_RULES = ("fermi", "best_takeover", "payoff_difference")


@utils.ensure_rng
def simulate_game(
    adjacency,
    params: GameParams,
    rounds: int,
    rule: str = "fermi",
    exploration: float = cfg.game_exploration,
    payoff_noise: float = 0.0,
    discard: int = 0,
    rng: np.random.Generator = None,
) -> GameRecord:
    """Synchronous rounds: every agent plays all neighbours, then updates

    With probability exploration an agent then switches to a uniformly random
    strategy, which keeps both strategies in play. Without it imitation drives
    the population into all-D, where payoffs say nothing about the links.
    payoff_noise adds gaussian noise to the recorded payoffs only"""
    if rule not in UPDATE_RULES:
        raise utils.FriendlyValueError(f"Unknown update rule {rule!r}")
    if not 0 <= exploration <= 1:
        raise utils.FriendlyValueError("exploration must lie in [0, 1]")
    adjacency = np.asarray(adjacency, dtype=float)
    n = adjacency.shape[0]
    neighbours = [np.flatnonzero(adjacency[i]) for i in range(n)]
    degree = adjacency.sum(axis=1)
    spread = np.ptp(params.payoff_matrix)

    strategies = rng.integers(0, 2, size=n)
    recorded_strategies, recorded_payoffs = [], []
    for round_ in range(discard + rounds):
        payoffs = round_payoffs(strategies, adjacency, params)
        if round_ >= discard:
            recorded_strategies.append(strategies.copy())
            recorded_payoffs.append(payoffs)

        updated = strategies.copy()
        for i in range(n):
            if not len(neighbours[i]):
                continue
            if rule == "best_takeover":
                group = np.concatenate([[i], neighbours[i]])
                updated[i] = strategies[group[np.argmax(payoffs[group])]]
                continue
            j = rng.choice(neighbours[i])
            if rule == "fermi":
                chance = fermi_probability(payoffs[i], payoffs[j], params.kappa)
            else:
                scale = max(degree[i], degree[j]) * spread
                chance = max(0.0, payoffs[j] - payoffs[i]) / scale if scale else 0.0
            if rng.random() < chance:
                updated[i] = strategies[j]
        explore = rng.random(n) < exploration
        updated[explore] = rng.integers(0, 2, size=int(explore.sum()))
        strategies = updated

    payoffs = np.array(recorded_payoffs)
    if payoff_noise:
        payoffs = payoffs + rng.normal(0.0, payoff_noise, size=payoffs.shape)
    return GameRecord(np.array(recorded_strategies), payoffs)


############# PDEs ############


def _dealias_mask(modes: int) -> np.ndarray:
    wavenumbers = np.arange(modes // 2 + 1)
    return wavenumbers < modes / 3


def simulate_ks(
    samples: int,
    dt: float,
    length: float = 32 * np.pi,
    modes: int = 128,
    substeps: int = 4,
    discard: int = 0,
    initial=None,
) -> FieldData:
    """u_t = -u u_x - u_xx - u_xxxx on a periodic domain

    Exponential time differencing RK4 with contour integral coefficients and
    two thirds dealiasing of the nonlinear term"""
    x = length * np.arange(modes) / modes
    if initial is None:
        scale = length / (2 * np.pi)
        u = np.cos(x / scale) * (1 + np.sin(x / scale))
    else:
        u = np.asarray(initial, dtype=float)
    v = np.fft.rfft(u)
    h = dt / substeps
    k = 2 * np.pi / length * np.arange(modes // 2 + 1)
    L = k**2 - k**4
    E, E2 = np.exp(h * L), np.exp(h * L / 2)
    roots = np.exp(1j * np.pi * (np.arange(1, 17) - 0.5) / 16)
    LR = h * L[:, None] + roots[None, :]
    Q = h * np.real(np.mean((np.exp(LR / 2) - 1) / LR, axis=1))
    f1 = h * np.real(
        np.mean((-4 - LR + np.exp(LR) * (4 - 3 * LR + LR**2)) / LR**3, axis=1)
    )
    f2 = h * np.real(np.mean((2 + LR + np.exp(LR) * (-2 + LR)) / LR**3, axis=1))
    f3 = h * np.real(
        np.mean((-4 - 3 * LR - LR**2 + np.exp(LR) * (4 - LR)) / LR**3, axis=1)
    )
    g = -0.5j * k * _dealias_mask(modes)

    def nonlinear(w):
        return g * np.fft.rfft(np.fft.irfft(w, n=modes) ** 2)

    field = np.empty((samples, modes))
    for step in range(discard + samples):
        if step >= discard:
            field[step - discard] = np.fft.irfft(v, n=modes)
        for _ in range(substeps):
            Nv = nonlinear(v)
            a = E2 * v + Q * Nv
            Na = nonlinear(a)
            b = E2 * v + Q * Na
            Nb = nonlinear(b)
            c = E2 * a + Q * (2 * Nb - Nv)
            Nc = nonlinear(c)
            v = E * v + Nv * f1 + 2 * (Na + Nb) * f2 + Nc * f3
        if not np.all(np.isfinite(v)):
            raise utils.DivergenceError(step + 1, (step + 1) * dt)
    return FieldData(field, length / modes, dt, True, 0.0, discard * dt)


def simulate_heat(
    samples: int,
    dt: float,
    diffusivity: float = 0.5,
    length: float = 2 * np.pi,
    points: int = 128,
    amplitudes: t.Sequence[float] = (1.0, 0.5, 0.25),
    discard: int = 0,
) -> FieldData:
    """u_t = diffusivity u_xx on a periodic domain

    Second order finite difference Laplacian, RK4 substeps sized for
    stability. The initial field is sum_k amplitudes[k-1] sin(2 pi k x / length + k)"""
    if diffusivity <= 0:
        raise utils.FriendlyValueError("diffusivity must be positive")
    dx = length / points
    x = dx * np.arange(points)
    u = sum(
        a * np.sin(2 * np.pi * (k + 1) * x / length + (k + 1))
        for k, a in enumerate(amplitudes)
    )
    substeps = max(1, math.ceil(dt * 4 * diffusivity / (2.0 * dx**2)))
    h = dt / substeps

    def rhs(time, w):
        return diffusivity * (np.roll(w, 1) - 2 * w + np.roll(w, -1)) / dx**2

    field = np.empty((samples, points))
    for step in range(discard + samples):
        if step >= discard:
            field[step - discard] = u
        for _ in range(substeps):
            u = rk4_step(rhs, 0.0, u, h)
    return FieldData(field, dx, dt, True, 0.0, discard * dt)


########## Dispatching ########

DEFAULT_STATES: t.Dict[str, t.Tuple[float, ...]] = {
    "lorenz": (-8.0, 7.0, 27.0),
    "roessler": (1.0, 1.0, 0.0),
    "standard_map": (0.5, 0.2),
    "ikeda": (0.1, 0.1),
    "quadratic_map": (0.1,),
    "linear_drift": (1.0,),
}
FLOWS = {"lorenz": lorenz, "roessler": roessler, "linear_drift": linear_drift}
MAPS = {"standard_map": standard_map, "ikeda": ikeda, "quadratic_map": quadratic_map}


def _trajectory(spec: SimSpec) -> TimeSeries:
    parameters = dict(spec.parameters)
    names = parameters.pop("channel_names", None)
    state = spec.initial_state or DEFAULT_STATES[spec.system]
    if spec.system in FLOWS:
        rhs = FLOWS[spec.system](**parameters)
        states = integrate(rhs, state, spec.horizon - 1, spec.step)
        dt = spec.step
    else:
        states = iterate(MAPS[spec.system](**parameters), state, spec.horizon - 1)
        dt = 1.0
    recorded = states[spec.transient_discard :]
    t0 = spec.transient_discard * dt
    if spec.system == "standard_map" and names is None:
        names = ("theta", "p")
    return TimeSeries.uniform(recorded, dt, t0, names)


def network_instance(spec: SimSpec) -> NetworkInstance:
    """Rebuild the ground truth network of a coupled_network spec"""
    parameters = dict(spec.parameters)
    parameters.pop("initial_spread", None)
    return make_network_instance(seed=spec.seed, **parameters)


def _network(spec: SimSpec) -> TimeSeries:
    instance = network_instance(spec)
    rng = np.random.default_rng([spec.seed, 1])
    spread = float(spec.parameters.get("initial_spread", 1.0))
    if spec.initial_state is not None:
        state = np.array(spec.initial_state, dtype=float)
    elif instance.oscillator in DEFAULT_STATES:
        base = np.array(DEFAULT_STATES[instance.oscillator])
        state = (base + spread * rng.normal(size=(instance.n, instance.d))).ravel()
    else:
        state = rng.normal(size=instance.n * instance.d)
    states = integrate(instance.rhs(), state, spec.horizon - 1, spec.step)
    recorded = states[spec.transient_discard :]
    return TimeSeries.uniform(
        recorded, spec.step, spec.transient_discard * spec.step, instance.channel_names
    )


def game_topology(spec: SimSpec) -> np.ndarray:
    """Ground truth adjacency of a game spec"""
    parameters = spec.parameters
    n = int(parameters.get("n", 22))
    topology = parameters.get("topology", "erdos_renyi")
    options = {}
    if topology == "erdos_renyi":
        options["p"] = parameters.get("p", parameters.get("mean_degree", 4) / (n - 1))
    elif topology == "ring":
        options["k"] = parameters.get("k", 2)
    else:
        options["edges"] = parameters.get("edges", ())
    return adjacency_matrix(build_topology(n, topology, seed=spec.seed, **options))


def game_params(spec: SimSpec) -> GameParams:
    parameters = spec.parameters
    known = ("game", "b", "r", "kappa")
    return GameParams(**{k: parameters[k] for k in known if k in parameters})


def _game(spec: SimSpec) -> GameRecord:
    parameters = spec.parameters
    return simulate_game(
        game_topology(spec),
        game_params(spec),
        spec.horizon - spec.transient_discard,
        rule=parameters.get("rule", "fermi"),
        exploration=float(parameters.get("exploration", cfg.game_exploration)),
        payoff_noise=float(parameters.get("payoff_noise", 0.0)),
        discard=spec.transient_discard,
        rng=np.random.default_rng([spec.seed, 2]),
    )


def _field(spec: SimSpec) -> FieldData:
    parameters = dict(spec.parameters)
    samples = spec.horizon - spec.transient_discard
    if spec.system == "ks_pde":
        return simulate_ks(
            samples,
            spec.step,
            discard=spec.transient_discard,
            initial=spec.initial_state,
            **parameters,
        )
    return simulate_heat(samples, spec.step, discard=spec.transient_discard, **parameters)


@utils.timed(logger)
def simulate(spec: SimSpec) -> TimeSeries | FieldData | GameRecord:
    """Generate the ground truth data described by spec, deterministically"""
    logger.info(
        f"Simulating {spec.system} for {spec.horizon} steps of {spec.step:g}, "
        f"discarding {spec.transient_discard}, seed {spec.seed}"
    )
    try:
        if spec.system in FLOWS or spec.system in MAPS:
            return _trajectory(spec)
        if spec.system == "coupled_network":
            return _network(spec)
        if spec.system == "game":
            return _game(spec)
        return _field(spec)
    except TypeError as e:
        raise utils.FriendlyValueError(f"Bad parameters for {spec.system}: {e}") from e


def default_spec(system: str, **overrides) -> SimSpec:
    """Spec with the conventional settings for each system"""
    defaults = {
        "lorenz": dict(horizon=6000, step=0.01, transient_discard=cfg.transient_discard),
        "roessler": dict(horizon=6000, step=0.01, transient_discard=cfg.transient_discard),
        "standard_map": dict(parameters={"K": 0.9, "wrap": False}, horizon=2000),
        "ikeda": dict(horizon=2000, transient_discard=100),
        "quadratic_map": dict(parameters={"a": 1.8}, horizon=1100, transient_discard=100),
        "linear_drift": dict(horizon=1001, step=0.01),
        "coupled_network": dict(
            parameters={
                "n": 20,
                "topology": "erdos_renyi",
                "p": 0.1,
                "coupling": 0.2,
            },
            horizon=7000,
            step=0.01,
            transient_discard=cfg.transient_discard,
            seed=0,
        ),
        "game": dict(parameters={"n": 22, "mean_degree": 4}, horizon=30, seed=0),
        "ks_pde": dict(horizon=6000, step=0.1, transient_discard=1000),
        "heat_pde": dict(horizon=200, step=0.01),
    }[system]
    defaults.update(overrides)
    return SimSpec(system, **defaults)

