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

from .. import artifacts, cli, odedisc
from ..schemas import RecoveredModel, RunConfig

logger = logging.getLogger("main/" + __name__)


def _series(config: RunConfig):
    return artifacts.read_series(cli.require_input(config))


def write_model(
    model: RecoveredModel, output: Path, name: str = "model.json"
) -> cli.Outcome:
    """Model report plus the manifest fields every discovery shares"""
    path = artifacts.write_json(artifacts.model_report(model), output / name)
    return cli.Outcome(
        artifacts=[str(path)],
        library=[d.to_dict() for d in model.library],
        diagnostics=list(model.diagnostics),
        not_sparse=model.not_sparse,
    )


def run_discover_ode(config: RunConfig) -> cli.Outcome:
    model = odedisc.discover_ode(
        _series(config),
        config.order,
        config.solver,
        dim=config.options.get("dim"),
    )
    return write_model(model, Path(config.output))


def run_discover_map(config: RunConfig) -> cli.Outcome:
    options = config.options
    model = odedisc.discover_map(
        _series(config),
        library=options.get("library", "polynomial"),
        order=config.order,
        solver=config.solver,
        max_harmonic=options.get("harmonics", 2),
        depth=options.get("depth", 1),
        include_linear=not options.get("no_linear", False),
        dim=options.get("dim"),
    )
    return write_model(model, Path(config.output))


def run_discover_tv(config: RunConfig) -> cli.Outcome:
    series = _series(config)
    output = Path(config.output)
    window = config.options.get("window")
    if window is None:
        model = odedisc.discover_time_varying(
            series,
            config.order,
            config.time_order,
            config.solver,
            dim=config.options.get("dim"),
        )
        return write_model(model, output)

    models = odedisc.rolling_time_varying(
        series,
        window,
        config.order,
        config.time_order,
        config.solver,
        cadence=config.options.get("cadence"),
    )
    outcome = cli.Outcome(library=[d.to_dict() for d in models[0].library])
    for k, model in enumerate(models):
        part = write_model(model, output, f"model_{k:03d}.json")
        outcome.artifacts += part.artifacts
        outcome.diagnostics += [
            {"window": list(model.window), **d} for d in part.diagnostics
        ]
        outcome.not_sparse |= part.not_sparse
    return outcome


def _dim(parser):
    parser.add_argument(
        "--dim", type=int, help="Declared state dimension, checked against the channels"
    )


def register(subparsers):
    _dim(
        cli.register_command(
            subparsers, "discover-ode", run_discover_ode, "Sparse ODE from a time series"
        )
    )

    parser = cli.register_command(
        subparsers, "discover-map", run_discover_map, "Sparse map model from iterates"
    )
    _dim(parser)
    parser.add_argument("--library", choices=("polynomial", "fourier"))
    parser.add_argument("--harmonics", type=int, help="Highest Fourier harmonic")
    parser.add_argument("--depth", type=int, choices=(1, 2), help="Fourier depth")
    parser.add_argument(
        "--no-linear",
        action="store_true",
        default=None,
        help="Leave the linear terms out of a Fourier library",
    )

    parser = cli.register_command(
        subparsers,
        "discover-tv",
        run_discover_tv,
        "Time varying ODE model, once or on rolling windows",
    )
    _dim(parser)
    parser.add_argument("--window", type=float, help="Rolling window length")
    parser.add_argument("--cadence", type=float, help="Time between rolling refits")
