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
from pathlib import Path

import numpy as np

from .. import artifacts, cfg, cli, odedisc, utils
from ..schemas import RunConfig

logger = logging.getLogger("main/" + __name__)


def parse_grid(text: str) -> np.ndarray:
    """'start:stop:num' to num evenly spaced values, or a comma separated list"""
    match = cfg.grid_regex.match(text)
    try:
        if match:
            return np.linspace(
                float(match["start"]), float(match["stop"]), int(match["num"])
            )
        return np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise utils.ParseError(f"Bad parameter grid {text!r}: {e}") from e


def run_scan_bifurcation(config: RunConfig) -> cli.Outcome:
    model = artifacts.read_model(cli.require_input(config))
    options = config.options
    if "parameter" not in options or "grid" not in options:
        raise utils.ParseError("scan-bifurcation needs --parameter and --grid")
    grid = options["grid"]
    grid = parse_grid(grid) if isinstance(grid, str) else np.asarray(grid, dtype=float)

    report = odedisc.scan_bifurcation(
        model,
        options["parameter"],
        grid,
        horizon=options.get("horizon", 2000),
        escape_radius=options.get("escape_radius"),
        seed=config.seed or 0,
        ensemble_size=options.get("ensemble", cfg.ensemble_size),
        bracket_width=options.get("bracket_width", cfg.bracket_width),
    )
    output = Path(config.output)
    table = artifacts.write_table(report.outcomes, output / "outcomes.csv")
    path = artifacts.write_json(report.to_dict(), output / "bifurcation.json")
    return cli.Outcome(
        artifacts=[str(path), str(table)],
        diagnostics=[
            {
                "critical_value": report.critical_value,
                "bracket": report.bracket,
                "message": report.message,
            }
        ],
    )


def register(subparsers):
    parser = cli.register_command(
        subparsers,
        "scan-bifurcation",
        run_scan_bifurcation,
        "Sweep one coefficient of a model and locate the crisis",
    )
    parser.add_argument("--parameter", help="Coefficient as row:term, e.g. 'x:1'")
    parser.add_argument("--grid", help="start:stop:num or a comma separated list")
    parser.add_argument("--horizon", type=int, help="Steps per ensemble member")
    parser.add_argument("--escape-radius", type=float)
    parser.add_argument("--ensemble", type=int, help="Ensemble size")
    parser.add_argument("--bracket-width", type=float)
