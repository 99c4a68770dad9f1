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
from os import getenv as __getenv

import regex as re

T = t.TypeVar("T")


def _getenv(var_name: str, default: T, cast: t.Callable[[str], T] = str) -> T:
    """INVERSION_* setting from the environment, cast like its default"""
    raw = __getenv(var_name)
    if raw is None:
        logging.debug(f"{var_name} unset, using {default!r}")
        return default
    try:
        value = cast(raw)
    except ValueError as e:
        raise ValueError(f"Environment variable {var_name}={raw!r} is invalid") from e
    logging.info(f"Loaded {var_name}={value!r}")
    return value


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise ValueError(f"{value} is not a positive integer")
    return value


def _fraction(raw: str) -> float:
    value = float(raw)
    if not 0 <= value <= 1:
        raise ValueError(f"{value} is not within [0, 1]")
    return value


def _log_level(raw: str) -> int:
    level = logging.getLevelName(raw.upper())
    if not isinstance(level, int):
        raise ValueError(f"Unknown log level {raw}")
    return level


def _scheme(raw: str) -> str:
    if raw not in ("backward", "central", "central4"):
        raise ValueError(f"Unknown derivative scheme {raw}")
    return raw


# Logging

log_level = _getenv("INVERSION_LOG_LEVEL", logging.INFO, _log_level)
logging.basicConfig(
    level=log_level,
    format="%(asctime)s %(levelname).1s %(name)s | %(message)s",
)

# Settings read from INVERSION_* environment variables

# Largest candidate library any pipeline may build
library_cap = _getenv("INVERSION_LIBRARY_CAP", 20000, _positive_int)
# Thread pool size for independent rows, nodes, agents & grid points
workers = _getenv("INVERSION_WORKERS", 1, _positive_int)
# Relative threshold & derivative scheme used by discovery pipelines
discovery_threshold = _getenv("INVERSION_THRESHOLD", 1e-2, _fraction)
default_scheme = _getenv("INVERSION_SCHEME", "central4", _scheme)
# Edge cutoff as a fraction of the largest cross-node coefficient
edge_fraction = _getenv("INVERSION_EDGE_FRACTION", 0.05, _fraction)

# Constants

# Sparse solvers
cd_tolerance = 1e-8
cd_max_iter = 100_000
hard_threshold = 1e-3
pinv_rcond = 1e-12
omp_tolerance = 1e-10
omp_exchange_steps = 10

# Discovery
density_fraction = 0.5
density_min_terms = 10
escape_factor = 10.0
ensemble_size = 20
ensemble_spread = 1e-3
bracket_width = 0.01
time_order = 2
transient_discard = 1000

# Networks & games
network_tolerance = 1e-3
game_threshold = 0.5
# LASSO weight for per-agent fits, as a fraction of max|G^T X| / M
game_lambda_fraction = 1e-3
# Payoff equations may miss by this much, relative to the largest payoff
game_tolerance = 1e-6
# Preference for links the partner agent also reports, see gamedisc
partner_bonus = 1.5
# Chance per round that an agent then adopts a random strategy
game_exploration = 0.6
coherence_warning = 0.99

# Weak form
domain_cells = (16, 32)
domain_factor = 4
weight_time_order = 3
weight_space_margin = 2
pde_max_power = 3
pde_max_derivative = 4
pde_threshold = 0.1

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NONCONVERGENCE = 4
EXIT_NOT_SPARSE = 5
EXIT_DIVERGED = 6

channel_name_regex = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
selector_regex = re.compile(r"^\s*(?P<row>[^:]+?)\s*:\s*(?P<term>.+?)\s*$")
grid_regex = re.compile(
    r"^\s*(?P<start>[-+0-9.eE]+)\s*:\s*(?P<stop>[-+0-9.eE]+)\s*:\s*(?P<num>\d+)\s*$"
)
