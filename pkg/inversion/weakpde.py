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

import functools
import logging
import typing as t

import numpy as np
import scipy.integrate
from numpy.polynomial import Polynomial

from . import cfg, solvers, utils
from .schemas import (
    FieldData,
    IntegrationDomain,
    PdeLibrary,
    PdeTerm,
    RecoveredModel,
    RegressionProblem,
)

logger = logging.getLogger("main/" + __name__)


def pde_library(
    max_power: int = cfg.pde_max_power, max_derivative: int = cfg.pde_max_derivative
) -> t.List[PdeTerm]:
    """d^k/dx^k (u^p) for p in 1..max_power, k in 0..max_derivative, k major"""
    return [
        PdeTerm(power, derivative)
        for derivative in range(max_derivative + 1)
        for power in range(1, max_power + 1)
    ]


@functools.lru_cache(maxsize=256)
def _bump(points: int, order: int, derivative: int) -> np.ndarray:
    """d^k/dxi^k of (1 - xi^2)^order on points nodes of [-1, 1]"""
    polynomial = Polynomial([1.0, 0.0, -1.0]) ** order
    values = polynomial.deriv(derivative)(np.linspace(-1.0, 1.0, points))
    values.setflags(write=False)
    return values


def weight_factors(
    data: FieldData, domain: IntegrationDomain, x_derivative: int, t_derivative: int
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Derivatives of the separable weight along x & t in physical units"""
    x_half = domain.x_cells * data.dx / 2
    t_half = domain.t_cells * data.dt / 2
    wx = _bump(domain.x_cells + 1, domain.p_x, x_derivative) / x_half**x_derivative
    wt = _bump(domain.t_cells + 1, domain.p_t, t_derivative) / t_half**t_derivative
    return wx, wt


def _window(data: FieldData, domain: IntegrationDomain) -> np.ndarray:
    if not domain.fits(data):
        raise utils.FriendlyValueError(f"Domain {domain.key} lies outside the field")
    return data.values[
        domain.t_start : domain.t_start + domain.t_cells + 1,
        domain.x_start : domain.x_start + domain.x_cells + 1,
    ]


def _integrate(values: np.ndarray, data: FieldData) -> float:
    inner = scipy.integrate.trapezoid(values, dx=data.dx, axis=1)
    return float(scipy.integrate.trapezoid(inner, dx=data.dt))


def weak_integral(data: FieldData, domain: IntegrationDomain, term: PdeTerm) -> float:
    """Integral of w times the term over the domain, derivatives moved onto w

    int w d^k(u^p) = (-1)^k int (d^k w) u^p, since w and its first p_x - 1
    derivatives vanish on the domain boundary"""
    if domain.p_x < term.derivative + 1:
        raise utils.FriendlyValueError(
            f"Weight order {domain.p_x} is too low for a derivative of order "
            f"{term.derivative}"
        )
    wx, wt = weight_factors(data, domain, term.derivative, 0)
    integrand = wt[:, None] * wx[None, :] * _window(data, domain) ** term.power
    return (-1) ** term.derivative * _integrate(integrand, data) / term.scale


def weak_time_integral(data: FieldData, domain: IntegrationDomain) -> float:
    """Integral of w u_t over the domain, as - int w_t u"""
    if domain.p_t < 2:
        raise utils.FriendlyValueError("Time weight order must be at least 2")
    wx, wt = weight_factors(data, domain, 0, 1)
    return -_integrate(wt[:, None] * wx[None, :] * _window(data, domain), data)


@utils.ensure_rng
def sample_domains(
    data: FieldData,
    count: int,
    cells: t.Tuple[int, int] = cfg.domain_cells,
    p_x: int = cfg.pde_max_derivative + cfg.weight_space_margin,
    p_t: int = cfg.weight_time_order,
    rng: np.random.Generator = None,
) -> t.List[IntegrationDomain]:
    """count distinct random boxes of cells[0]..cells[1] cells per axis"""
    low, high = cells
    if min(data.nx, data.nt) <= low + 1:
        raise utils.FriendlyValueError(
            f"A {data.nt} x {data.nx} field is too small for {low} cell domains"
        )
    domains: t.Dict[t.Tuple[int, ...], IntegrationDomain] = {}
    attempts = 0
    while len(domains) < count:
        attempts += 1
        if attempts > 100 * count:
            raise utils.FriendlyValueError(
                f"Could only place {len(domains)} distinct domains of {count}"
            )
        x_cells = int(rng.integers(low, min(high, data.nx - 2) + 1))
        t_cells = int(rng.integers(low, min(high, data.nt - 2) + 1))
        domain = IntegrationDomain(
            int(rng.integers(0, data.nx - x_cells - 1)),
            x_cells,
            int(rng.integers(0, data.nt - t_cells - 1)),
            t_cells,
            p_x,
            p_t,
        )
        domains.setdefault(domain.key, domain)
    return list(domains.values())


def build_weak_system(
    data: FieldData,
    domains: t.Sequence[IntegrationDomain],
    terms: t.Sequence[PdeTerm],
) -> PdeLibrary:
    """q0 from the time derivative and one Q column per term, one row per domain"""
    keys = [d.key for d in domains]
    if len(set(keys)) != len(keys):
        raise utils.FriendlyValueError("Integration domains must be distinct")
    if len(domains) < len(terms):
        raise utils.FriendlyValueError(
            f"{len(domains)} domains cannot determine {len(terms)} terms"
        )

    def row(domain: IntegrationDomain) -> t.Tuple[float, t.List[float], bool]:
        window = _window(data, domain)
        degenerate = np.ptp(window) <= 1e-12 * max(1.0, np.abs(window).max())
        return (
            weak_time_integral(data, domain),
            [weak_integral(data, domain, term) for term in terms],
            bool(degenerate),
        )

    rows = utils.map_units(row, domains)
    degenerate = [i for i, (_, _, flag) in enumerate(rows) if flag]
    if degenerate:
        logger.warning(f"{len(degenerate)} integration domains see a constant field")
    return PdeLibrary(
        terms,
        domains,
        [q for q, _, _ in rows],
        [r for _, r, _ in rows],
        degenerate,
    )


@utils.timed(logger)
def identify_pde(
    data: FieldData,
    terms: t.Optional[t.Sequence[PdeTerm]] = None,
    domain_count: t.Optional[int] = None,
    seed: int = 0,
    threshold: float = cfg.pde_threshold,
    relative: bool = True,
) -> RecoveredModel:
    """Minimal PDE u_t = sum c_i f_i by thresholded least squares on the weak system

    Columns of Q are normalised before solving and thresholds compare the
    coefficients of the terms in their natural form"""
    terms = list(terms or pde_library())
    domain_count = domain_count or cfg.domain_factor * len(terms)
    logger.info(
        f"Weak form identification: {len(terms)} terms, {domain_count} domains, "
        f"seed {seed}"
    )
    domains = sample_domains(data, domain_count, seed=seed)
    system = build_weak_system(data, domains, terms)
    norms = np.linalg.norm(system.Q, axis=0)
    norms[norms == 0] = 1.0
    problem = RegressionProblem(
        system.Q / norms,
        system.q0,
        threshold=threshold,
        relative=relative,
        column_norms=norms,
    )
    solution = solvers.solve_stls(problem)
    coefficients = solution.coefficients / norms
    scale = np.linalg.norm(system.q0)
    diagnostics = {
        "row": "u",
        "residual_norm": solution.residual_norm,
        "relative_residual": solution.residual_norm / scale if scale else 0.0,
        "sparsity": solution.sparsity,
        "converged": solution.converged,
        "solver_tag": solution.solver_tag,
        "domains": len(domains),
        "degenerate_domains": list(system.degenerate),
        "dropped": [[terms[i].label() for i in step] for step in solution.history],
    }
    logger.info(
        "Recovered u_t = "
        + " ".join(
            f"{c:+.4g} {term.label()}" for c, term in zip(coefficients, terms) if c
        )
    )
    return RecoveredModel(
        kind="pde",
        library=terms,
        coefficients=[coefficients],
        channel_names=("u",),
        diagnostics=[diagnostics],
        dt=data.dt,
    )
