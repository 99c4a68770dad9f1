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

from . import basislib, cfg, diffest, simkit, solvers, utils
from .schemas import (
    BifurcationReport,
    RecoveredModel,
    RegressionProblem,
    SolverConfig,
    TermDescriptor,
    TimeSeries,
)

logger = logging.getLogger("main/" + __name__)

# Rows of fit data kept on a model as starting points for simulations
REFERENCE_ROWS = 200


def _require_full_state(series: TimeSeries, dim: t.Optional[int]) -> None:
    if dim is not None and series.m < dim:
        raise utils.PartialObservationError(
            f"{series.m} observed channels for a {dim} dimensional state, "
            "every state variable must be measured"
        )


def _reference_states(series: TimeSeries) -> np.ndarray:
    rows = np.unique(np.linspace(0, len(series) - 1, REFERENCE_ROWS).astype(int))
    return series.values[rows]


def is_dense(support: int, rows: int, terms: int) -> bool:
    """True when a fitted row cannot be called sparse

    More nonzeros than half the equations, or, for libraries of at least
    density_min_terms terms, more than density_fraction of the library"""
    if support > rows / 2:
        return True
    return terms >= cfg.density_min_terms and support > cfg.density_fraction * terms


def fit_rows(
    samples: TimeSeries,
    targets: TimeSeries,
    descriptors: t.Sequence[TermDescriptor],
    solver: SolverConfig,
    kind: str,
) -> RecoveredModel:
    """One sparse solve per target channel against the shared library

    samples & targets must refer to the same instants"""
    if not np.array_equal(samples.times, targets.times):
        raise AssertionError("Library rows and target rows are not aligned")
    library = basislib.evaluate_library(descriptors, samples, solver.normalize)
    M, N = library.shape
    logger.info(
        f"Fitting {targets.m} rows of {kind} over {N} terms with {M} samples "
        f"({solver.solver})"
    )
    coherence = basislib.mutual_coherence(library.matrix)
    if coherence > cfg.coherence_warning:
        logger.warning(
            f"Library columns are nearly collinear (coherence {coherence:.4f})"
        )

    def fit(row: int) -> t.Tuple[np.ndarray, dict]:
        problem = RegressionProblem(
            library.matrix,
            targets.values[:, row],
            lam=solver.lam or 0.0,
            threshold=solver.threshold,
            relative=solver.relative,
            max_support=solver.max_support,
            column_norms=library.column_norms if library.normalized else None,
            positive=solver.positive,
        )
        if solver.solver == "lasso" and solver.lam is None:
            problem = problem.evolve(
                lam=solvers.cross_validate_lambda(
                    problem, solver.folds, solver.lambda_grid
                )
            )
        solution = solvers.solve(problem, solver.solver)
        coefficients = library.denormalize(solution.coefficients)
        diagnostics = {
            "row": targets.channel_names[row],
            "residual_norm": solution.residual_norm,
            "sparsity": solution.sparsity,
            "iterations": solution.iterations,
            "converged": solution.converged,
            "lambda": solution.lam,
            "solver_tag": solution.solver_tag,
            "not_sparse": is_dense(solution.sparsity, M, N),
        }
        if solution.solver_tag == "stls":
            diagnostics["dropped"] = [list(step) for step in solution.history]
        return coefficients, diagnostics

    results = utils.map_units(fit, range(targets.m))
    coefficients = np.array([c for c, _ in results])
    diagnostics = [d for _, d in results]
    not_sparse = any(d["not_sparse"] for d in diagnostics)
    if not_sparse:
        logger.warning(
            "Recovered model is not sparse, the library cannot represent the "
            "system with few terms"
        )
    for d in diagnostics:
        logger.info(
            f"Row {d['row']}: {d['sparsity']} terms, "
            f"residual {d['residual_norm']:.3g}"
        )

    return RecoveredModel(
        kind=kind,
        library=descriptors,
        coefficients=coefficients,
        channel_names=samples.channel_names,
        diagnostics=diagnostics,
        not_sparse=not_sparse,
        dt=samples.dt,
        reference_states=_reference_states(samples),
        coherence=coherence,
    )


@utils.timed(logger)
def discover_ode(
    series: TimeSeries,
    order: int = 3,
    solver: SolverConfig = SolverConfig(),
    dim: t.Optional[int] = None,
) -> RecoveredModel:
    """Sparse ODE model dx/dt = F(x) over the polynomial library of order"""
    _require_full_state(series, dim)
    targets = diffest.derivative(series, solver.scheme)
    samples = diffest.align(series, targets)
    descriptors = basislib.build_polynomial_library(
        series.m, order, solver.max_total_degree
    )
    return fit_rows(samples, targets, descriptors, solver, "ode")


@utils.timed(logger)
def discover_map(
    series: TimeSeries,
    library: str = "polynomial",
    order: int = 3,
    solver: SolverConfig = SolverConfig(),
    max_harmonic: int = 2,
    depth: int = 1,
    include_linear: bool = True,
    dim: t.Optional[int] = None,
) -> RecoveredModel:
    """Sparse map model x' = F(x), fitting every iterate against its image"""
    _require_full_state(series, dim)
    if library == "polynomial":
        descriptors = basislib.build_polynomial_library(
            series.m, order, solver.max_total_degree
        )
    elif library == "fourier":
        descriptors = basislib.build_fourier_library(
            series.m, max_harmonic, depth, include_linear
        )
    else:
        raise utils.FriendlyValueError(f"Unknown library kind {library!r}")
    targets = diffest.map_increments(series)
    samples = diffest.align(series, targets)
    return fit_rows(samples, targets, descriptors, solver, "map")


@utils.timed(logger)
def discover_time_varying(
    series: TimeSeries,
    order: int = 3,
    time_order: int = cfg.time_order,
    solver: SolverConfig = SolverConfig(),
    dim: t.Optional[int] = None,
) -> RecoveredModel:
    """Sparse model dx/dt = F(x, t) over the polynomial grid times t^w

    Time enters the library as the raw sample instants. The fit window is
    recorded so extrapolation can be limited"""
    _require_full_state(series, dim)
    targets = diffest.derivative(series, solver.scheme)
    samples = diffest.align(series, targets)
    descriptors = basislib.build_time_augmented_library(
        series.m, order, time_order, solver.max_total_degree
    )
    model = fit_rows(samples, targets, descriptors, solver, "time_varying_ode")
    return attr.evolve(model, window=(float(series.times[0]), float(series.times[-1])))


def rolling_time_varying(
    series: TimeSeries,
    window: float,
    order: int = 3,
    time_order: int = cfg.time_order,
    solver: SolverConfig = SolverConfig(),
    cadence: t.Optional[float] = None,
) -> t.List[RecoveredModel]:
    """Refit a time varying model at successive monitoring instants t_i

    Every fit uses the data in [t_i - window, t_i]. The instants are cadence
    apart, half a window unless given"""
    if not series.is_uniform:
        raise utils.FriendlyValueError("Rolling fits need uniform sampling")
    cadence = cadence or window / 2
    if window <= 0 or cadence <= 0:
        raise utils.FriendlyValueError("window and cadence must be positive")
    width = int(round(window / series.dt))
    stride = max(1, int(round(cadence / series.dt)))
    if width >= len(series):
        raise utils.FriendlyValueError("The window is longer than the record")
    models = []
    for end in range(width, len(series), stride):
        chunk = series.take(np.arange(end - width, end + 1))
        logger.info(f"Refitting on [{chunk.times[0]:g}, {chunk.times[-1]:g}]")
        models.append(discover_time_varying(chunk, order, time_order, solver))
    return models


############ Simulation ###########


def vector_field(model: RecoveredModel) -> t.Callable[[float, np.ndarray], np.ndarray]:
    """Right hand side (or map) of a recovered model, evaluated on its support"""
    if model.kind == "pde":
        raise utils.FriendlyValueError("PDE models cannot be stepped here")
    used = np.flatnonzero(np.any(model.coefficients != 0, axis=0))
    descriptors = [model.library[i] for i in used]
    coefficients = model.coefficients[:, used].T

    def rhs(time, state):
        if not descriptors:
            return np.zeros_like(state)
        return basislib.evaluate_terms(descriptors, state, time) @ coefficients

    return rhs


def _capped_steps(model: RecoveredModel, start: float, steps: int, step: float) -> int:
    if model.kind != "time_varying_ode" or model.window is None:
        return steps
    lo, hi = model.window
    limit = hi + (hi - lo)
    if start + steps * step <= limit + 1e-12:
        return steps
    allowed = max(0, int(np.floor((limit - start) / step + 1e-9)))
    logger.warning(
        f"Extrapolating past t={limit:g} (one fit window beyond the data) is "
        f"unreliable, stopping after {allowed} of {steps} steps"
    )
    return allowed


def simulate_model(
    model: RecoveredModel,
    initial_state,
    horizon: int,
    step: t.Optional[float] = None,
    t0: t.Optional[float] = None,
) -> TimeSeries:
    """Trajectory of horizon steps from initial_state

    ODE kinds use fixed step RK4, maps are iterated. Time varying models
    start at the end of their fit window unless t0 is given and are not
    extrapolated beyond one window length"""
    rhs = vector_field(model)
    state = np.array(initial_state, dtype=float).reshape(-1)
    if state.size != model.dim:
        raise utils.FriendlyValueError(
            f"Initial state has {state.size} entries for a {model.dim} dimensional model"
        )
    if model.kind == "map":
        states = simkit.iterate(lambda s: rhs(0.0, s), state, horizon)
        return TimeSeries.uniform(states, 1.0, t0 or 0.0, model.channel_names)

    step = step or model.dt
    if not step:
        raise utils.FriendlyValueError("An integration step is needed")
    if t0 is None:
        t0 = model.window[1] if model.window is not None else 0.0
    horizon = _capped_steps(model, t0, horizon, step)
    states = simkit.integrate(rhs, state, horizon, step, t0)
    return TimeSeries.uniform(states, step, t0, model.channel_names)


########### Bifurcations ##########


def parse_selector(model: RecoveredModel, selector: str) -> t.Tuple[int, int]:
    """'row:term' such as 'x:1' or 'y:x z' to a (row, column) coefficient"""
    match = cfg.selector_regex.match(selector)
    if not match:
        raise utils.FriendlyValueError(
            f"Coefficient selector {selector!r} must look like row:term"
        )
    row = model.row_index(match["row"])
    column = model.term_index(match["term"])
    if model.coefficients[row, column] == 0:
        raise utils.FriendlyValueError(
            f"{selector} is not in the support of the model"
        )
    return row, column


def _stepper(model: RecoveredModel) -> t.Callable[[float, np.ndarray], np.ndarray]:
    rhs = vector_field(model)
    if model.kind == "map":
        return lambda time, state: rhs(time, state)
    return lambda time, state: simkit.rk4_step(rhs, time, state, model.dt)


def _ensemble_outcome(
    model: RecoveredModel,
    states: np.ndarray,
    horizon: int,
    radius: float,
) -> dict:
    step = _stepper(model)
    dt = 1.0 if model.kind == "map" else model.dt
    t0 = model.window[1] if model.window is not None else 0.0
    alive = np.ones(len(states), dtype=bool)
    lifetimes = np.full(len(states), horizon)
    previous = states
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(horizon):
            previous = states
            stepped = step(t0 + i * dt, states)
            norms = np.linalg.norm(stepped, axis=1)
            escaped = alive & ~(norms <= radius)
            lifetimes[escaped] = i + 1
            alive &= ~escaped
            states = np.where(alive[:, None], stepped, states)
            if not alive.any():
                break

    escaped_fraction = float(1 - alive.mean())
    if escaped_fraction > 0.5:
        return {
            "outcome": "transient_escape",
            "escaped_fraction": escaped_fraction,
            "mean_lifetime": float(lifetimes[~alive].mean()),
        }
    change = np.linalg.norm(states - previous, axis=1) / dt
    scale = np.maximum(1.0, np.linalg.norm(states, axis=1))
    settled = (change <= 1e-9 * scale)[alive]
    outcome = "fixed_point" if settled.mean() > 0.5 else "sustained"
    return {
        "outcome": outcome,
        "escaped_fraction": escaped_fraction,
        "mean_lifetime": None,
    }


@utils.timed(logger)
def scan_bifurcation(
    model: RecoveredModel,
    parameter: str,
    grid: t.Sequence[float],
    horizon: int = 2000,
    escape_radius: t.Optional[float] = None,
    seed: int = 0,
    ensemble_size: int = cfg.ensemble_size,
    bracket_width: float = cfg.bracket_width,
) -> BifurcationReport:
    """Sweep one coefficient and locate where sustained motion gives way to escape

    Every grid value runs the same ensemble of perturbed fit-data states. A
    value counts as escaping when more than half the ensemble leaves the
    escape radius within horizon steps. The first sustained to escaping step
    along the grid is refined by bisection down to bracket_width"""
    row, column = parse_selector(model, parameter)
    grid = [float(v) for v in grid]
    if len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise utils.FriendlyValueError("The grid needs >= 2 increasing values")
    if model.reference_states is None:
        raise utils.FriendlyValueError("The model carries no fit data states")

    reference = model.reference_states
    radius = escape_radius or cfg.escape_factor * float(
        np.linalg.norm(reference, axis=1).max()
    )
    rng = np.random.default_rng(seed)
    replace = len(reference) < ensemble_size
    picks = rng.choice(len(reference), ensemble_size, replace=replace)
    spread = cfg.ensemble_spread * np.maximum(reference.std(axis=0), 1e-12)
    ensemble = reference[picks] + spread * rng.normal(size=(ensemble_size, model.dim))
    logger.info(
        f"Scanning {parameter} over {len(grid)} values, ensemble {ensemble_size}, "
        f"escape radius {radius:.4g}, seed {seed}"
    )

    def classify(value: float) -> dict:
        variant = model.with_coefficient(row, column, value)
        return {"value": value, **_ensemble_outcome(variant, ensemble, horizon, radius)}

    outcomes = utils.map_units(classify, grid)
    escaping = [o["outcome"] == "transient_escape" for o in outcomes]
    transition = next(
        (i for i in range(1, len(grid)) if escaping[i] and not escaping[i - 1]), None
    )
    if transition is None:
        logger.info("No transition in range")
        return BifurcationReport(
            parameter, grid, outcomes, None, None, seed, "no transition in range"
        )

    lo, hi = grid[transition - 1], grid[transition]
    while hi - lo > bracket_width:
        middle = (lo + hi) / 2
        if classify(middle)["outcome"] == "transient_escape":
            hi = middle
        else:
            lo = middle
    critical = (lo + hi) / 2
    logger.info(f"Critical value {critical:.6g} in [{lo:.6g}, {hi:.6g}]")
    return BifurcationReport(
        parameter,
        grid,
        outcomes,
        critical,
        (lo, hi),
        seed,
        f"escape sets in between {lo:.6g} and {hi:.6g}",
    )
