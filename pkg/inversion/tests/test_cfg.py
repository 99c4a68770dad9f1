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

import pytest

from .. import cfg


def test_unset_variable_keeps_default(monkeypatch):
    monkeypatch.delenv("INVERSION_WORKERS", raising=False)
    assert cfg._getenv("INVERSION_WORKERS", 1, cfg._positive_int) == 1


def test_variables_are_cast(monkeypatch):
    monkeypatch.setenv("INVERSION_WORKERS", "4")
    monkeypatch.setenv("INVERSION_THRESHOLD", "0.05")
    monkeypatch.setenv("INVERSION_LOG_LEVEL", "debug")
    monkeypatch.setenv("INVERSION_SCHEME", "central")
    assert cfg._getenv("INVERSION_WORKERS", 1, cfg._positive_int) == 4
    assert cfg._getenv("INVERSION_THRESHOLD", 1e-2, cfg._fraction) == 0.05
    assert cfg._getenv("INVERSION_LOG_LEVEL", logging.INFO, cfg._log_level) == (
        logging.DEBUG
    )
    assert cfg._getenv("INVERSION_SCHEME", "central4", cfg._scheme) == "central"


@pytest.mark.parametrize(
    "value, cast",
    [
        ("0", cfg._positive_int),
        ("many", cfg._positive_int),
        ("1.5", cfg._fraction),
        ("loud", cfg._log_level),
        ("spline", cfg._scheme),
    ],
)
def test_invalid_variables_are_rejected(monkeypatch, value, cast):
    monkeypatch.setenv("INVERSION_SETTING", value)
    with pytest.raises(ValueError, match="INVERSION_SETTING"):
        cfg._getenv("INVERSION_SETTING", None, cast)
