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

import itertools
import logging
import typing as t

import numpy as np

from . import cfg, schemas, utils
from .schemas import BasisLibrary, TermDescriptor, TimeSeries

logger = logging.getLogger("main/" + __name__)


def _grade_key(extended: t.Tuple[int, ...]) -> t.Tuple:
    # Total degree first, then the more concentrated exponent tuple, then
    # earlier variables (time counts as the leading variable) carrying more
    return (sum(extended), -max(extended, default=0), tuple(-e for e in extended))


def _check_size(size: int, what: str) -> None:
    if size > cfg.library_cap:
        raise utils.LibrarySizeError(
            f"{what} would hold {size} terms, above the cap of {cfg.library_cap}"
        )


def _check_dim(dim: int) -> None:
    if dim < 1:
        raise utils.LibrarySizeError("A library needs at least one variable")


def _exponent_grid(
    dim: int, order: int, max_total_degree: t.Optional[int]
) -> t.Iterator[t.Tuple[int, ...]]:
    for exponents in itertools.product(range(order + 1), repeat=dim):
        if max_total_degree is None or sum(exponents) <= max_total_degree:
            yield exponents


def build_polynomial_library(
    dim: int, order: int, max_total_degree: t.Optional[int] = None
) -> t.List[TermDescriptor]:
    """Every monomial x1^l1 ... xm^lm with 0 <= li <= order, constant first

    max_total_degree optionally drops monomials of higher total degree"""
    return build_time_augmented_library(dim, order, 0, max_total_degree)


def build_time_augmented_library(
    dim: int,
    order: int,
    time_order: int,
    max_total_degree: t.Optional[int] = None,
) -> t.List[TermDescriptor]:
    """Polynomial grid multiplied by t^w for w in 0..time_order"""
    _check_dim(dim)
    if order < 0 or time_order < 0:
        raise utils.FriendlyValueError("Orders must be non-negative")
    if max_total_degree is None:
        _check_size((1 + order) ** dim * (1 + time_order), "Polynomial library")

    extended = [
        (w, *exponents)
        for w in range(time_order + 1)
        for exponents in _exponent_grid(dim, order, max_total_degree)
    ]
    _check_size(len(extended), "Polynomial library")
    extended.sort(key=_grade_key)

    # Terms free of t stay plain monomials so v = 0 gives the stationary grid
    return [
        TermDescriptor(
            "time_monomial_product" if e[0] else "monomial", e[1:], time_power=e[0]
        )
        for e in extended
    ]


def build_fourier_library(
    dim: int,
    max_harmonic: int,
    depth: int = 1,
    include_linear: bool = False,
) -> t.List[TermDescriptor]:
    """Constant, sin(k xi) & cos(k xi) for k <= max_harmonic, then products

    depth 2 adds the product of every pair of harmonics on distinct variables.
    include_linear adds the linear monomials right after the constant, which
    maps of the form x' = x + f(x) need"""
    _check_dim(dim)
    if max_harmonic < 1:
        raise utils.FriendlyValueError("max_harmonic must be at least 1")
    if depth not in (1, 2):
        raise utils.FriendlyValueError("Fourier interaction depth must be 1 or 2")

    per_variable = 2 * max_harmonic
    size = 1 + dim * per_variable + (dim if include_linear else 0)
    if depth == 2:
        size += dim * (dim - 1) // 2 * per_variable**2
    _check_size(size, "Fourier library")

    zeros = (0,) * dim
    library = [TermDescriptor("monomial", zeros)]
    if include_linear:
        for i in range(dim):
            library.append(TermDescriptor("monomial", _unit(dim, i, 1)))

    # sin before cos for every harmonic
    harmonics = [k * s for k in range(1, max_harmonic + 1) for s in (1, -1)]
    for i in range(dim):
        for index in harmonics:
            library.append(TermDescriptor("fourier", zeros, 0, _unit(dim, i, index)))

    if depth == 2:
        for i, j in itertools.combinations(range(dim), 2):
            for a, b in itertools.product(harmonics, repeat=2):
                index = tuple(
                    a if v == i else b if v == j else 0 for v in range(dim)
                )
                library.append(TermDescriptor("fourier", zeros, 0, index))
    return library


def _unit(dim: int, position: int, value: int) -> t.Tuple[int, ...]:
    return tuple(value if i == position else 0 for i in range(dim))


def _column(
    descriptor: TermDescriptor,
    values: np.ndarray,
    times: np.ndarray,
    powers: t.Dict[t.Tuple[int, int], np.ndarray],
) -> np.ndarray:
    column = np.ones(values.shape[0])
    for i, power in enumerate(descriptor.exponents):
        if power:
            key = (i, power)
            if key not in powers:
                powers[key] = values[:, i] ** power
            column = column * powers[key]
    if descriptor.time_power:
        column = column * times**descriptor.time_power
    for i, index in enumerate(descriptor.fourier_index):
        if index > 0:
            column = column * np.sin(index * values[:, i])
        elif index < 0:
            column = column * np.cos(-index * values[:, i])
    return column


def evaluate_terms(
    descriptors: t.Sequence[TermDescriptor], values: np.ndarray, times=None
) -> np.ndarray:
    """Raw (rows x terms) evaluation on state rows, no validation

    values may carry leading ensemble axes, the state being the last axis"""
    values = np.asarray(values, dtype=float)
    flat = values.reshape(-1, values.shape[-1])
    if times is None:
        times = np.zeros(flat.shape[0])
    times = np.broadcast_to(np.asarray(times, dtype=float), flat.shape[:1])
    powers: t.Dict[t.Tuple[int, int], np.ndarray] = {}
    columns = [_column(d, flat, times, powers) for d in descriptors]
    return np.stack(columns, axis=-1).reshape(*values.shape[:-1], len(columns))


def evaluate_library(
    descriptors: t.Sequence[TermDescriptor],
    samples: TimeSeries,
    normalize: bool = True,
) -> BasisLibrary:
    """Evaluate descriptors on every sample to form the matrix G

    With normalize set each column is scaled to unit Euclidean norm and the
    original norms are kept. All-zero columns keep a norm of 1 and are listed
    in zero_columns"""
    descriptors = list(descriptors)
    if not descriptors:
        raise utils.FriendlyValueError("Cannot evaluate an empty library")
    dims = {d.dim for d in descriptors}
    if dims != {samples.m}:
        raise utils.FriendlyValueError(
            f"Library dimension {sorted(dims)} does not match {samples.m} channels"
        )
    values = np.asarray(samples.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise utils.FriendlyValueError("Samples must be finite")
    if len(set(descriptors)) != len(descriptors):
        raise utils.FriendlyValueError("Library descriptors must be unique")

    matrix = evaluate_terms(descriptors, values, samples.times)
    if not np.all(np.isfinite(matrix)):
        raise utils.FriendlyValueError(
            "Library evaluation overflowed, rescale the data or lower the order"
        )

    norms = np.linalg.norm(matrix, axis=0)
    zero_columns = tuple(int(i) for i in np.flatnonzero(norms == 0))
    if zero_columns:
        labels = [descriptors[i].label(samples.channel_names) for i in zero_columns]
        logger.warning(f"Library columns {labels} are identically zero")
    norms[norms == 0] = 1.0
    if normalize:
        matrix = matrix / norms

    return BasisLibrary(descriptors, matrix, norms, normalize, zero_columns)


def library_document(descriptors: t.Sequence[TermDescriptor]) -> t.List[dict]:
    return [d.to_dict() for d in descriptors]


def library_from_document(document: t.Sequence[dict]) -> t.List[TermDescriptor]:
    try:
        return [schemas.descriptor_from_dict(d) for d in document]
    except (KeyError, TypeError) as e:
        raise utils.ParseError(f"Malformed library document: {e}") from e


def mutual_coherence(matrix: np.ndarray) -> float:
    """Largest absolute cosine between two distinct columns of matrix

    Zero columns are ignored. A value near 1 means two terms are nearly
    indistinguishable on the data"""
    matrix = np.asarray(matrix, dtype=float)
    norms = np.linalg.norm(matrix, axis=0)
    keep = norms > 0
    if keep.sum() < 2:
        return 0.0
    unit = matrix[:, keep] / norms[keep]
    gram = np.abs(unit.T @ unit)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())
