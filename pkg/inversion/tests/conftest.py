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

from .. import odedisc, simkit


@pytest.fixture(scope="session")
def lorenz_series():
    # 5000 samples at dt = 0.01 after a 1000 step transient
    return simkit.simulate(simkit.default_spec("lorenz"))


@pytest.fixture(scope="session")
def lorenz_model(lorenz_series):
    # Default solver settings: normalized library, relative threshold 0.01
    return odedisc.discover_ode(lorenz_series, 3)


@pytest.fixture(scope="session")
def quadratic_model():
    series = simkit.simulate(simkit.default_spec("quadratic_map"))
    return odedisc.discover_map(series, "polynomial", order=3)


@pytest.fixture(scope="session")
def ks_field():
    return simkit.simulate(simkit.default_spec("ks_pde"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
