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

from .. import basislib, utils
from ..schemas import TermDescriptor, TimeSeries


def labels(descriptors, names=None):
    return [d.label(names) for d in descriptors]


def test_polynomial_library_size_and_order():
    library = basislib.build_polynomial_library(3, 3)
    assert len(library) == 64
    assert len(set(library)) == 64
    assert library[0].is_constant
    assert all(d.kind == "monomial" for d in library)

    assert labels(basislib.build_polynomial_library(2, 2)) == [
        "1",
        "x",
        "y",
        "x^2",
        "y^2",
        "x y",
        "x^2 y",
        "x y^2",
        "x^2 y^2",
    ]


def test_polynomial_library_total_degree_filter():
    library = basislib.build_polynomial_library(3, 3, max_total_degree=2)
    assert len(library) == 10
    assert max(d.degree for d in library) == 2


def test_time_augmented_library():
    library = basislib.build_time_augmented_library(1, 1, 2)
    assert labels(library) == ["1", "t", "x", "t^2", "t x", "t^2 x"]
    assert [d.kind for d in library] == [
        "monomial",
        "time_monomial_product",
        "monomial",
        "time_monomial_product",
        "time_monomial_product",
        "time_monomial_product",
    ]
    # No time terms reduces to the stationary grid
    assert basislib.build_time_augmented_library(2, 3, 0) == (
        basislib.build_polynomial_library(2, 3)
    )


def test_library_size_guards():
    with pytest.raises(utils.LibrarySizeError):
        basislib.build_polynomial_library(10, 3)
    with pytest.raises(utils.LibrarySizeError):
        basislib.build_polynomial_library(0, 3)
    with pytest.raises(utils.FriendlyValueError):
        basislib.build_fourier_library(2, 0)


def test_fourier_library():
    library = basislib.build_fourier_library(2, 2, include_linear=True)
    assert labels(library, ("theta", "p")) == [
        "1",
        "theta",
        "p",
        "sin(theta)",
        "cos(theta)",
        "sin(2theta)",
        "cos(2theta)",
        "sin(p)",
        "cos(p)",
        "sin(2p)",
        "cos(2p)",
    ]
    assert len(basislib.build_fourier_library(2, 1, depth=2)) == 1 + 4 + 4


def test_evaluate_library_values_and_normalization():
    series = TimeSeries.uniform([[1.0, 2.0], [3.0, -1.0], [0.5, 0.0]], 0.1)
    descriptors = basislib.build_polynomial_library(2, 1)
    raw = basislib.evaluate_library(descriptors, series, normalize=False)
    # 1, x, y, x y
    np.testing.assert_allclose(
        raw.matrix, [[1, 1, 2, 2], [1, 3, -1, -3], [1, 0.5, 0, 0]]
    )
    assert not raw.normalized

    normalized = basislib.evaluate_library(descriptors, series)
    np.testing.assert_allclose(np.linalg.norm(normalized.matrix, axis=0), 1.0)
    norms = np.linalg.norm(raw.matrix, axis=0)
    np.testing.assert_allclose(normalized.column_norms, norms)
    np.testing.assert_allclose(normalized.denormalize(normalized.column_norms), 1.0)


def test_evaluate_library_zero_columns():
    series = TimeSeries.uniform([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], 1.0)
    library = basislib.evaluate_library(
        basislib.build_polynomial_library(2, 1), series
    )
    assert library.zero_columns == (2, 3)
    assert np.all(library.column_norms > 0)
    assert np.all(library.matrix[:, 2] == 0)


def test_evaluate_library_rejects_mismatch():
    series = TimeSeries.uniform([[1.0], [2.0]], 1.0)
    with pytest.raises(utils.FriendlyValueError):
        basislib.evaluate_library(basislib.build_polynomial_library(2, 1), series)
    with pytest.raises(utils.FriendlyValueError):
        basislib.evaluate_library([], series)


def test_evaluate_terms_on_ensembles(rng):
    descriptors = basislib.build_fourier_library(2, 1, include_linear=True)
    states = rng.normal(size=(4, 5, 2))
    values = basislib.evaluate_terms(descriptors, states)
    assert values.shape == (4, 5, len(descriptors))
    np.testing.assert_allclose(values[..., 3], np.sin(states[..., 0]))
    np.testing.assert_allclose(values[..., 4], np.cos(states[..., 0]))


def test_time_terms_use_sample_times():
    series = TimeSeries([0.0, 1.0, 3.0], [[2.0], [2.0], [2.0]])
    descriptor = TermDescriptor("time_monomial_product", (1,), time_power=2)
    library = basislib.evaluate_library([descriptor], series, normalize=False)
    np.testing.assert_allclose(library.matrix[:, 0], [0.0, 2.0, 18.0])


def test_library_document_round_trip():
    descriptors = basislib.build_fourier_library(2, 2, depth=2, include_linear=True)
    document = basislib.library_document(descriptors)
    assert basislib.library_from_document(document) == descriptors
    with pytest.raises(utils.ParseError):
        basislib.library_from_document([{"exponents": [1]}])


def test_mutual_coherence():
    assert basislib.mutual_coherence(np.eye(4)) == pytest.approx(0.0)
    matrix = np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 1.0]])
    assert basislib.mutual_coherence(matrix) == pytest.approx(1.0)
