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

from __future__ import annotations

import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import typing as t
from pathlib import Path

import attr
import numpy as np

from . import cfg, utils

TERM_KINDS = ("monomial", "fourier", "time_monomial_product")
SOLVER_TAGS = ("lasso_cd", "omp", "stls")
SOLVER_NAMES = {"lasso": "lasso_cd", "omp": "omp", "stls": "stls"}
MODEL_KINDS = ("ode", "map", "time_varying_ode", "pde")
OUTCOMES = ("sustained", "transient_escape", "fixed_point")
SCHEMES = ("backward", "central", "central4")
SYSTEMS = (
    "lorenz",
    "roessler",
    "standard_map",
    "ikeda",
    "quadratic_map",
    "linear_drift",
    "coupled_network",
    "game",
    "ks_pde",
    "heat_pde",
)
# Systems that draw random numbers while simulating
STOCHASTIC_SYSTEMS = ("coupled_network", "game")
COOPERATE, DEFECT = 0, 1


def _int_tuple(value) -> t.Tuple[int, ...]:
    return tuple(int(v) for v in value)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _float_vector(value) -> np.ndarray:
    return _readonly(np.array(value, dtype=float).reshape(-1))


def _float_matrix(value) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise utils.FriendlyValueError("Expected a 2-d array")
    return _readonly(array)


def _optional_float(value) -> t.Optional[float]:
    return None if value is None else float(value)


def _jsonable(value):
    """Convert numpy containers & scalars into plain json friendly types"""
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dumps(document: t.Any) -> str:
    """Canonical json text, stable across runs for equal inputs"""
    return json.dumps(_jsonable(document), sort_keys=True, indent=2) + "\n"


######### Candidate terms #########


def _power_label(name: str, power: int) -> str:
    return name if power == 1 else f"{name}^{power}"


def _harmonic_label(name: str, index: int) -> str:
    k = abs(index)
    func = "sin" if index > 0 else "cos"
    return f"{func}({'' if k == 1 else k}{name})"


@attr.s(frozen=True, slots=True)
class TermDescriptor:
    """One candidate function of a basis library

    fourier_index holds one signed harmonic per variable, +k for sin(k x_i),
    -k for cos(k x_i) and 0 when the variable does not take part"""

    kind: str = attr.ib(validator=attr.validators.in_(TERM_KINDS))
    exponents: t.Tuple[int, ...] = attr.ib(converter=_int_tuple)
    time_power: int = attr.ib(default=0, converter=int)
    fourier_index: t.Tuple[int, ...] = attr.ib(default=(), converter=_int_tuple)

    @exponents.validator
    def _check_exponents(self, attribute, value):
        if any(e < 0 for e in value):
            raise utils.FriendlyValueError("Exponents must be non-negative")

    @time_power.validator
    def _check_time_power(self, attribute, value):
        if value < 0:
            raise utils.FriendlyValueError("time_power must be non-negative")
        if value > 0 and self.kind != "time_monomial_product":
            raise utils.FriendlyValueError(
                "Only time_monomial_product terms carry a time power"
            )

    @fourier_index.validator
    def _check_fourier_index(self, attribute, value):
        if self.kind == "fourier" and len(value) != len(self.exponents):
            raise utils.FriendlyValueError(
                "fourier_index needs one entry per variable"
            )
        if self.kind != "fourier" and any(value):
            raise utils.FriendlyValueError("Only fourier terms carry harmonics")

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @property
    def is_constant(self) -> bool:
        return not (self.time_power or any(self.exponents) or any(self.fourier_index))

    def label(self, names: t.Optional[t.Sequence[str]] = None) -> str:
        names = names or default_channel_names(self.dim)
        parts = []
        if self.time_power:
            parts.append(_power_label("t", self.time_power))
        if self.kind == "fourier":
            parts += [
                _harmonic_label(name, index)
                for name, index in zip(names, self.fourier_index)
                if index
            ]
        parts += [
            _power_label(name, power)
            for name, power in zip(names, self.exponents)
            if power
        ]
        return " ".join(parts) or "1"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "exponents": list(self.exponents),
            "time_power": self.time_power,
            "fourier_index": list(self.fourier_index),
        }

    @classmethod
    def from_dict(cls, document: dict) -> "TermDescriptor":
        return cls(
            document["kind"],
            document["exponents"],
            document.get("time_power", 0),
            document.get("fourier_index", ()),
        )


@attr.s(frozen=True, slots=True)
class PdeTerm:
    """Spatial term d^k/dx^k (u^p) of a scalar field

    For k = 1 and p > 1 the term is presented in its natural form
    u^(p-1)·u_x, which is the derivative divided by p"""

    power: int = attr.ib(converter=int)
    derivative: int = attr.ib(converter=int)

    @power.validator
    def _check_power(self, attribute, value):
        if value < 1:
            raise utils.FriendlyValueError("PDE terms need a power of at least 1")

    @derivative.validator
    def _check_derivative(self, attribute, value):
        if value < 0:
            raise utils.FriendlyValueError("Derivative order must be non-negative")

    @property
    def kind(self) -> str:
        return "pde"

    @property
    def scale(self) -> int:
        return self.power if self.derivative == 1 and self.power > 1 else 1

    def label(self, names: t.Optional[t.Sequence[str]] = None) -> str:
        name = (names or ("u",))[0]
        p, k = self.power, self.derivative
        if k == 0:
            return _power_label(name, p)
        if p == 1:
            return f"{name}_{'x' * k}"
        if k == 1:
            return f"{_power_label(name, p - 1)}·{name}_x"
        return f"({_power_label(name, p)})_{'x' * k}"

    def to_dict(self) -> dict:
        return {"kind": "pde", "power": self.power, "derivative": self.derivative}

    @classmethod
    def from_dict(cls, document: dict) -> "PdeTerm":
        return cls(document["power"], document["derivative"])


def descriptor_from_dict(document: dict) -> TermDescriptor | PdeTerm:
    if document["kind"] == "pde":
        return PdeTerm.from_dict(document)
    return TermDescriptor.from_dict(document)


def default_channel_names(m: int) -> t.Tuple[str, ...]:
    if m <= 3:
        return ("x", "y", "z")[:m]
    return tuple(f"x{i + 1}" for i in range(m))


########### Time series ###########


@attr.s(frozen=True, eq=False)
class TimeSeries:
    """Multivariate trajectory sampled at strictly increasing instants

    dt is set when sampling is uniform"""

    times: np.ndarray = attr.ib(converter=_float_vector)
    values: np.ndarray = attr.ib(converter=_float_matrix)
    dt: t.Optional[float] = attr.ib(default=None, converter=_optional_float)
    channel_names: t.Tuple[str, ...] = attr.ib(default=None)

    def __attrs_post_init__(self):
        if len(self.times) != self.values.shape[0]:
            raise utils.FriendlyValueError(
                f"{len(self.times)} timestamps for {self.values.shape[0]} samples"
            )
        if not np.all(np.isfinite(self.times)) or not np.all(
            np.isfinite(self.values)
        ):
            raise utils.FriendlyValueError("Time series values must be finite")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise utils.FriendlyValueError("Timestamps must be strictly increasing")
        if self.dt is not None:
            if self.dt <= 0:
                raise utils.FriendlyValueError("dt must be positive")
            if np.any(np.abs(steps - self.dt) >= 1e-9 * self.dt):
                raise utils.FriendlyValueError("Samples are not uniformly spaced")
        if self.channel_names is None:
            object.__setattr__(
                self, "channel_names", default_channel_names(self.values.shape[1])
            )
        elif len(self.channel_names) != self.values.shape[1]:
            raise utils.FriendlyValueError("One channel name per column is needed")
        else:
            object.__setattr__(self, "channel_names", tuple(self.channel_names))
        # Names end up inside term labels like x^2 y so must be identifiers
        bad = [n for n in self.channel_names if not cfg.channel_name_regex.match(n)]
        if bad:
            raise utils.FriendlyValueError(f"Invalid channel names {bad}")

    @classmethod
    def uniform(
        cls,
        values,
        dt: float,
        t0: float = 0.0,
        channel_names: t.Optional[t.Sequence[str]] = None,
    ) -> "TimeSeries":
        values = _float_matrix(values)
        times = t0 + dt * np.arange(values.shape[0])
        return cls(times, values, dt, channel_names)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def is_uniform(self) -> bool:
        return self.dt is not None

    def take(self, rows) -> "TimeSeries":
        """Subset of samples, keeping dt when the rows are evenly strided"""
        rows = np.asarray(rows, dtype=int)
        strides = np.unique(np.diff(rows))
        dt = None
        if self.dt is not None and len(strides) == 1 and strides[0] > 0:
            dt = self.dt * strides[0]
        return TimeSeries(self.times[rows], self.values[rows], dt, self.channel_names)

    def channels(self, columns: t.Sequence[int]) -> "TimeSeries":
        columns = list(columns)
        return TimeSeries(
            self.times,
            self.values[:, columns],
            self.dt,
            [self.channel_names[c] for c in columns],
        )


############# Library #############


@attr.s(frozen=True, eq=False)
class BasisLibrary:
    """Descriptors plus the evaluated library matrix G (samples x terms)"""

    descriptors: t.Tuple[TermDescriptor, ...] = attr.ib(converter=tuple)
    matrix: np.ndarray = attr.ib(converter=_float_matrix)
    column_norms: np.ndarray = attr.ib(converter=_float_vector)
    normalized: bool = attr.ib(default=False)
    zero_columns: t.Tuple[int, ...] = attr.ib(default=(), converter=_int_tuple)

    def __attrs_post_init__(self):
        if self.matrix.shape[1] != len(self.descriptors):
            raise utils.FriendlyValueError("One matrix column per descriptor needed")
        if len(self.column_norms) != len(self.descriptors):
            raise utils.FriendlyValueError("One norm per descriptor needed")
        if np.any(self.column_norms <= 0):
            raise utils.FriendlyValueError("Column norms must be positive")

    @property
    def shape(self) -> t.Tuple[int, int]:
        return self.matrix.shape

    def denormalize(self, coefficients: np.ndarray) -> np.ndarray:
        """Map coefficients of the stored matrix back to raw-term units"""
        coefficients = np.asarray(coefficients, dtype=float)
        return coefficients / self.column_norms if self.normalized else coefficients

    def document(self) -> t.List[dict]:
        return [d.to_dict() for d in self.descriptors]


############# Solvers #############


@attr.s(frozen=True, eq=False)
class RegressionProblem:
    """Sparse linear inverse problem G·a = X

    threshold is relative to the largest coefficient magnitude when relative
    is set. When column_norms is given the matrix holds normalized columns and
    thresholds compare de-normalized coefficients"""

    matrix: np.ndarray = attr.ib(converter=_float_matrix)
    target: np.ndarray = attr.ib(converter=_float_vector)
    lam: float = attr.ib(default=0.0, converter=float)
    threshold: float = attr.ib(default=cfg.hard_threshold, converter=float)
    max_support: t.Optional[int] = attr.ib(default=None)
    relative: bool = attr.ib(default=True)
    column_norms: t.Optional[np.ndarray] = attr.ib(default=None)
    positive: bool = attr.ib(default=False)
    debias: bool = attr.ib(default=True)
    tol: float = attr.ib(default=cfg.cd_tolerance, converter=float)
    max_iter: int = attr.ib(default=cfg.cd_max_iter, converter=int)

    def __attrs_post_init__(self):
        M, N = self.matrix.shape
        if M < 1 or N < 1:
            raise utils.FriendlyValueError("Problem needs at least one row & column")
        if len(self.target) != M:
            raise utils.FriendlyValueError(
                f"Target has {len(self.target)} entries for {M} rows"
            )
        if not np.all(np.isfinite(self.matrix)) or not np.all(
            np.isfinite(self.target)
        ):
            raise utils.FriendlyValueError("Problem data must be finite")
        if self.lam < 0:
            raise utils.FriendlyValueError("lambda must be non-negative")
        if self.threshold < 0:
            raise utils.FriendlyValueError("threshold must be non-negative")
        if self.max_support is not None and self.max_support < 1:
            raise utils.FriendlyValueError("max_support must be at least 1")
        if self.column_norms is not None:
            object.__setattr__(self, "column_norms", _float_vector(self.column_norms))
            if len(self.column_norms) != N:
                raise utils.FriendlyValueError("One column norm per column needed")

    @property
    def shape(self) -> t.Tuple[int, int]:
        return self.matrix.shape

    def evolve(self, **changes) -> "RegressionProblem":
        return attr.evolve(self, **changes)


@attr.s(frozen=True, eq=False)
class SparseSolution:
    coefficients: np.ndarray = attr.ib(converter=_float_vector)
    residual_norm: float = attr.ib(converter=float)
    solver_tag: str = attr.ib(validator=attr.validators.in_(SOLVER_TAGS))
    lam: float = attr.ib(default=0.0, converter=float)
    threshold: float = attr.ib(default=0.0, converter=float)
    iterations: int = attr.ib(default=0, converter=int)
    converged: bool = attr.ib(default=True)
    history: t.Tuple = attr.ib(default=(), converter=tuple)

    @property
    def support(self) -> t.Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.coefficients))

    @property
    def sparsity(self) -> int:
        return len(self.support)

    def to_dict(self) -> dict:
        return {
            "solver_tag": self.solver_tag,
            "lambda": self.lam,
            "threshold": self.threshold,
            "support": list(self.support),
            "coefficients": self.coefficients,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@attr.s(frozen=True)
class SolverConfig:
    """How a discovery pipeline builds & solves its sparse problems"""

    solver: str = attr.ib(default="stls", validator=attr.validators.in_(SOLVER_NAMES))
    lam: t.Optional[float] = attr.ib(default=None, converter=_optional_float)
    lambda_grid: t.Optional[t.Tuple[float, ...]] = attr.ib(default=None)
    folds: int = attr.ib(default=5, converter=int)
    threshold: float = attr.ib(default=cfg.discovery_threshold, converter=float)
    relative: bool = attr.ib(default=True)
    max_support: t.Optional[int] = attr.ib(default=None)
    normalize: bool = attr.ib(default=True)
    positive: bool = attr.ib(default=False)
    scheme: str = attr.ib(
        default=cfg.default_scheme, validator=attr.validators.in_(SCHEMES)
    )
    max_total_degree: t.Optional[int] = attr.ib(default=None)

    def to_dict(self) -> dict:
        return attr.asdict(self)

    @classmethod
    def from_dict(cls, document: dict) -> "SolverConfig":
        known = {f.name for f in attr.fields(cls)}
        document = {k: v for k, v in document.items() if k in known}
        if document.get("lambda_grid") is not None:
            document["lambda_grid"] = tuple(float(v) for v in document["lambda_grid"])
        return cls(**document)


############## Models #############


def _coefficient_rows(value) -> np.ndarray:
    return _readonly(np.atleast_2d(np.array(value, dtype=float)))


@attr.s(frozen=True, eq=False)
class RecoveredModel:
    """Sparse symbolic model: one coefficient row per modelled variable"""

    kind: str = attr.ib(validator=attr.validators.in_(MODEL_KINDS))
    library: t.Tuple[TermDescriptor | PdeTerm, ...] = attr.ib(converter=tuple)
    coefficients: np.ndarray = attr.ib(converter=_coefficient_rows)
    channel_names: t.Tuple[str, ...] = attr.ib(converter=tuple)
    diagnostics: t.Tuple[dict, ...] = attr.ib(default=(), converter=tuple)
    not_sparse: bool = attr.ib(default=False)
    dt: t.Optional[float] = attr.ib(default=None, converter=_optional_float)
    window: t.Optional[t.Tuple[float, float]] = attr.ib(default=None)
    reference_states: t.Optional[np.ndarray] = attr.ib(default=None)
    coherence: t.Optional[float] = attr.ib(default=None, converter=_optional_float)

    def __attrs_post_init__(self):
        if self.coefficients.shape[1] != len(self.library):
            raise utils.FriendlyValueError(
                "Every coefficient row must span the whole library"
            )
        if self.reference_states is not None:
            object.__setattr__(
                self, "reference_states", _float_matrix(self.reference_states)
            )

    @property
    def dim(self) -> int:
        return self.coefficients.shape[0]

    def support(self, row: int) -> t.Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.coefficients[row]))

    def term_index(self, label: str) -> int:
        labels = [d.label(self.channel_names) for d in self.library]
        try:
            return labels.index(label.strip())
        except ValueError:
            raise utils.FriendlyValueError(f"No library term labelled {label!r}")

    def row_index(self, name: str) -> int:
        if name in self.channel_names:
            return self.channel_names.index(name)
        try:
            return int(name)
        except ValueError:
            raise utils.FriendlyValueError(f"No model row named {name!r}")

    def with_coefficient(self, row: int, term: int, value: float) -> "RecoveredModel":
        coefficients = np.array(self.coefficients)
        coefficients[row, term] = value
        return attr.evolve(self, coefficients=coefficients)

    def equations(self) -> t.List[str]:
        lhs = "d{}/dt" if self.kind in ("ode", "time_varying_ode", "pde") else "{}'"
        lines = []
        for name, row in zip(self.channel_names, self.coefficients):
            terms = [
                f"{c:+.6g} {d.label(self.channel_names)}"
                for c, d in zip(row, self.library)
                if c != 0
            ]
            lines.append(f"{lhs.format(name)} = {' '.join(terms) or '0'}")
        return lines

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "channel_names": list(self.channel_names),
            "library": [d.to_dict() for d in self.library],
            "coefficients": self.coefficients,
            "support": [list(self.support(row)) for row in range(self.dim)],
            "diagnostics": list(self.diagnostics),
            "not_sparse": self.not_sparse,
            "dt": self.dt,
            "window": None if self.window is None else list(self.window),
            "reference_states": self.reference_states,
            "coherence": self.coherence,
        }

    @classmethod
    def from_dict(cls, document: dict) -> "RecoveredModel":
        window = document.get("window")
        return cls(
            kind=document["kind"],
            library=[descriptor_from_dict(d) for d in document["library"]],
            coefficients=document["coefficients"],
            channel_names=document["channel_names"],
            diagnostics=document.get("diagnostics", ()),
            not_sparse=document.get("not_sparse", False),
            dt=document.get("dt"),
            window=None if window is None else tuple(window),
            reference_states=document.get("reference_states"),
            coherence=document.get("coherence"),
        )


@attr.s(frozen=True, eq=False)
class BifurcationReport:
    parameter_name: str = attr.ib()
    grid: t.Tuple[float, ...] = attr.ib(converter=lambda v: tuple(map(float, v)))
    outcomes: t.Tuple[dict, ...] = attr.ib(converter=tuple)
    critical_value: t.Optional[float] = attr.ib(converter=_optional_float)
    bracket: t.Optional[t.Tuple[float, float]] = attr.ib()
    seed: int = attr.ib(converter=int)
    message: str = attr.ib(default="")

    @bracket.validator
    def _check_bracket(self, attribute, value):
        if value is None:
            return
        lo, hi = value
        if not lo <= self.critical_value <= hi:
            raise utils.FriendlyValueError("Critical value lies outside its bracket")

    @property
    def transition(self) -> bool:
        return self.critical_value is not None

    @property
    def bracket_width(self) -> t.Optional[float]:
        return None if self.bracket is None else self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict:
        return {
            "parameter_name": self.parameter_name,
            "grid": list(self.grid),
            "outcomes": list(self.outcomes),
            "critical_value": self.critical_value,
            "bracket": None if self.bracket is None else list(self.bracket),
            "bracket_width": self.bracket_width,
            "seed": self.seed,
            "message": self.message,
        }


############# Networks ############


@attr.s(frozen=True, eq=False)
class NetworkData:
    """Per-node time series, channels grouped contiguously by node"""

    n: int = attr.ib(converter=int)
    d: int = attr.ib(converter=int)
    series: TimeSeries = attr.ib()
    node_labels: t.Tuple[str, ...] = attr.ib(default=None)

    def __attrs_post_init__(self):
        if self.n < 2 or self.d < 1:
            raise utils.FriendlyValueError("A network needs n >= 2 and d >= 1")
        if self.n * self.d != self.series.m:
            raise utils.FriendlyValueError(
                f"{self.series.m} channels cannot hold {self.n} nodes of dim {self.d}"
            )
        if self.node_labels is None:
            object.__setattr__(
                self, "node_labels", tuple(str(i) for i in range(self.n))
            )
        elif len(self.node_labels) != self.n:
            raise utils.FriendlyValueError("One label per node needed")

    def node_columns(self, node: int) -> t.List[int]:
        return list(range(node * self.d, (node + 1) * self.d))

    def node_values(self, node: int) -> np.ndarray:
        return self.series.values[:, self.node_columns(node)]


# (node j, column indices, descriptors) of one library block
NodeBlock = t.Tuple[int, t.Tuple[int, ...], t.Tuple[TermDescriptor, ...]]


@attr.s(frozen=True, eq=False)
class NodeReconstruction:
    """Sparse fit of one node's equations over the concatenated library

    coefficients has one row per state component of the node. blocks maps
    every node j to the column indices & descriptors of its library block"""

    node: int = attr.ib(converter=int)
    coefficients: np.ndarray = attr.ib(converter=_coefficient_rows)
    blocks: t.Tuple[NodeBlock, ...] = attr.ib(converter=tuple)
    diagnostics: t.Tuple[dict, ...] = attr.ib(default=(), converter=tuple)
    not_sparse: bool = attr.ib(default=False)

    def block(self, j: int) -> t.Tuple[t.Tuple[int, ...], t.Tuple[TermDescriptor, ...]]:
        for node, columns, descriptors in self.blocks:
            if node == j:
                return columns, descriptors
        raise KeyError(j)

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    def linear_block(self, j: int) -> np.ndarray:
        """d x d matrix of linear-term coefficients of node j's block"""
        columns, descriptors = self.block(j)
        matrix = np.zeros((self.d, self.d))
        for column, descriptor in zip(columns, descriptors):
            if descriptor.degree == 1:
                matrix[:, descriptor.exponents.index(1)] = self.coefficients[:, column]
        return matrix

    def nonlinear_block(self, j: int) -> float:
        """Largest coefficient magnitude on node j's higher order terms"""
        columns, descriptors = self.block(j)
        values = [
            np.abs(self.coefficients[:, column]).max()
            for column, descriptor in zip(columns, descriptors)
            if descriptor.degree > 1
        ]
        return float(max(values, default=0.0))


@attr.s(eq=False)
class NetworkEstimate:
    coupling: np.ndarray = attr.ib()
    adjacency: np.ndarray = attr.ib()
    threshold: float = attr.ib(converter=float)
    policy: str = attr.ib(validator=attr.validators.in_(("or", "and", "none")))
    margins: t.Dict[t.Tuple[int, int], float] = attr.ib(factory=dict)
    nodal_models: t.List[dict] = attr.ib(factory=list)
    nonlinear_evidence: t.Dict[t.Tuple[int, int], float] = attr.ib(factory=dict)
    rows: t.Tuple[NodeReconstruction, ...] = attr.ib(default=(), converter=tuple)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> t.List[t.Tuple[int, int, float]]:
        """Edge list (i, j, weight) with weight the largest |C_ij| entry"""
        edges = []
        directed = self.policy == "none"
        for i, j in zip(*np.nonzero(self.adjacency)):
            if not directed and j < i:
                continue
            weight = np.abs(self.coupling[i, j]).max()
            if not directed:
                weight = max(weight, np.abs(self.coupling[j, i]).max())
            edges.append((int(i), int(j), float(weight)))
        return edges

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "policy": self.policy,
            "adjacency": self.adjacency.astype(int),
            "coupling": self.coupling,
            "margins": [[i, j, m] for (i, j), m in sorted(self.margins.items())],
            "nonlinear_evidence": [
                [i, j, v] for (i, j), v in sorted(self.nonlinear_evidence.items())
            ],
        }


############### Games #############


@attr.s(frozen=True)
class GameParams:
    game: str = attr.ib(default="PDG", validator=attr.validators.in_(("PDG", "SG")))
    b: float = attr.ib(default=1.2, converter=float)
    r: float = attr.ib(default=0.5, converter=float)
    kappa: float = attr.ib(default=0.1, converter=float)

    @b.validator
    def _check_b(self, attribute, value):
        if self.game == "PDG" and not 1 < value < 2:
            raise utils.FriendlyValueError("PDG temptation b must lie in (1, 2)")

    @r.validator
    def _check_r(self, attribute, value):
        if self.game == "SG" and not 0 < value < 1:
            raise utils.FriendlyValueError("SG parameter r must lie in (0, 1)")

    @kappa.validator
    def _check_kappa(self, attribute, value):
        if value < 0:
            raise utils.FriendlyValueError("kappa must be non-negative")

    @property
    def payoff_matrix(self) -> np.ndarray:
        if self.game == "PDG":
            return np.array([[1.0, 0.0], [self.b, 0.0]])
        return np.array([[1.0, 1.0 - self.r], [1.0 + self.r, 0.0]])

    def to_dict(self) -> dict:
        return attr.asdict(self)


@attr.s(frozen=True, eq=False)
class GameRecord:
    """Strategies (0 = C, 1 = D) and payoffs of every agent, one row per round"""

    strategies: np.ndarray = attr.ib(
        converter=lambda v: _readonly(np.atleast_2d(np.array(v, dtype=int)))
    )
    payoffs: np.ndarray = attr.ib(converter=_float_matrix)

    def __attrs_post_init__(self):
        if self.strategies.shape != self.payoffs.shape:
            raise utils.FriendlyValueError("Strategies & payoffs shapes differ")
        if not np.isin(self.strategies, (COOPERATE, DEFECT)).all():
            raise utils.FriendlyValueError("Strategies must be C or D")
        if not np.all(np.isfinite(self.payoffs)):
            raise utils.FriendlyValueError("Payoffs must be finite")

    @property
    def rounds(self) -> int:
        return self.strategies.shape[0]

    @property
    def n(self) -> int:
        return self.strategies.shape[1]

    def head(self, rounds: int) -> "GameRecord":
        return GameRecord(self.strategies[:rounds], self.payoffs[:rounds])


############ Weak form ############


@attr.s(frozen=True, eq=False)
class FieldData:
    """Scalar field u on a uniform (time x space) lattice"""

    values: np.ndarray = attr.ib(converter=_float_matrix)
    dx: float = attr.ib(converter=float)
    dt: float = attr.ib(converter=float)
    periodic: bool = attr.ib(default=True)
    x0: float = attr.ib(default=0.0, converter=float)
    t0: float = attr.ib(default=0.0, converter=float)

    def __attrs_post_init__(self):
        if self.dx <= 0 or self.dt <= 0:
            raise utils.FriendlyValueError("Lattice spacings must be positive")
        if not np.all(np.isfinite(self.values)):
            raise utils.FriendlyValueError("Field values must be finite")

    @property
    def nt(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt)

    def metadata(self) -> dict:
        return {
            "dx": self.dx,
            "dt": self.dt,
            "periodic": self.periodic,
            "x0": self.x0,
            "t0": self.t0,
            "shape": list(self.values.shape),
        }


@attr.s(frozen=True, slots=True)
class IntegrationDomain:
    """Index box [x_start, x_start + x_cells] x [t_start, t_start + t_cells]"""

    x_start: int = attr.ib(converter=int)
    x_cells: int = attr.ib(converter=int)
    t_start: int = attr.ib(converter=int)
    t_cells: int = attr.ib(converter=int)
    p_x: int = attr.ib(default=6, converter=int)
    p_t: int = attr.ib(default=cfg.weight_time_order, converter=int)

    def __attrs_post_init__(self):
        if min(self.x_start, self.t_start) < 0 or min(self.x_cells, self.t_cells) < 2:
            raise utils.FriendlyValueError("Integration boxes need >= 2 cells per axis")

    def fits(self, field: FieldData) -> bool:
        return (
            self.x_start + self.x_cells < field.nx
            and self.t_start + self.t_cells < field.nt
        )

    @property
    def key(self) -> t.Tuple[int, int, int, int]:
        return (self.x_start, self.x_cells, self.t_start, self.t_cells)


@attr.s(frozen=True, eq=False)
class PdeLibrary:
    terms: t.Tuple[PdeTerm, ...] = attr.ib(converter=tuple)
    domains: t.Tuple[IntegrationDomain, ...] = attr.ib(converter=tuple)
    q0: np.ndarray = attr.ib(converter=_float_vector)
    Q: np.ndarray = attr.ib(converter=_float_matrix)
    degenerate: t.Tuple[int, ...] = attr.ib(default=(), converter=_int_tuple)

    def __attrs_post_init__(self):
        if self.Q.shape != (len(self.domains), len(self.terms)):
            raise utils.FriendlyValueError("Q must be (domains x terms)")
        if len(self.domains) < len(self.terms):
            raise utils.FriendlyValueError("Need at least as many domains as terms")


############# Simulator ###########


@attr.s(frozen=True)
class SimSpec:
    """Everything needed to regenerate a ground truth dataset

    horizon counts every step taken, transient steps included"""

    system: str = attr.ib(validator=attr.validators.in_(SYSTEMS))
    parameters: t.Dict[str, t.Any] = attr.ib(factory=dict, converter=dict, hash=False)
    initial_state: t.Optional[t.Tuple[float, ...]] = attr.ib(
        default=None,
        converter=lambda v: None if v is None else tuple(float(x) for x in v),
    )
    horizon: int = attr.ib(default=5000, converter=int)
    step: float = attr.ib(default=0.01, converter=float)
    seed: t.Optional[int] = attr.ib(default=None)
    transient_discard: int = attr.ib(default=0, converter=int)

    def __attrs_post_init__(self):
        if self.step <= 0:
            raise utils.FriendlyValueError("Simulation step must be positive")
        if self.transient_discard < 0:
            raise utils.FriendlyValueError("transient_discard must be non-negative")
        if self.horizon <= self.transient_discard:
            raise utils.FriendlyValueError("horizon must exceed transient_discard")
        if self.system in STOCHASTIC_SYSTEMS and self.seed is None:
            raise utils.FriendlyValueError(f"{self.system} needs a seed")

    def to_dict(self) -> dict:
        return attr.asdict(self)

    @classmethod
    def from_dict(cls, document: dict) -> "SimSpec":
        known = {f.name for f in attr.fields(cls)}
        unknown = set(document) - known
        if unknown:
            raise utils.ParseError(f"Unknown simulation keys: {sorted(unknown)}")
        return cls(**document)

    @classmethod
    def load(cls, path: str | Path) -> "SimSpec":
        document = load_document(path)
        return cls.from_dict(document.get("simulation", document))


def load_document(path: str | Path) -> dict:
    """Read a TOML or JSON configuration document"""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with path.open("rb") as f:
                return tomllib.load(f)
        with path.open() as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise utils.ParseError(f"Could not read {path}: {e}") from e


############### Runs ##############


@attr.s(frozen=True)
class RunConfig:
    """Fully resolved configuration of one command line run"""

    command: str = attr.ib()
    output: str = attr.ib()
    input: t.Optional[str] = attr.ib(default=None)
    seed: t.Optional[int] = attr.ib(default=None)
    order: int = attr.ib(default=3, converter=int)
    time_order: int = attr.ib(default=cfg.time_order, converter=int)
    solver: SolverConfig = attr.ib(factory=SolverConfig)
    options: t.Dict[str, t.Any] = attr.ib(factory=dict, converter=dict, hash=False)

    def to_dict(self) -> dict:
        document = attr.asdict(self, recurse=False)
        document["solver"] = self.solver.to_dict()
        return document
