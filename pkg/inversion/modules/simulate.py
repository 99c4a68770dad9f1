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

from .. import artifacts, cli, schemas, simkit, utils
from ..schemas import FieldData, GameRecord, RunConfig, SimSpec

logger = logging.getLogger("main/" + __name__)


def spec_from_config(config: RunConfig) -> SimSpec:
    """The config's simulation section, with --system and --seed on top

    A bare system name starts from that system's conventional settings"""
    document = dict(config.options.get("simulation", {}))
    system = config.options.get("system", document.get("system"))
    if system is None:
        raise utils.ParseError("simulate needs a system, from --system or the config")
    document["system"] = system
    if config.seed is not None:
        document["seed"] = config.seed
    if set(document) <= {"system", "seed"}:
        document.pop("system")
        return simkit.default_spec(system, **document)
    return SimSpec.from_dict(document)


def _upper_edges(adjacency, weight: float = 1.0):
    n = len(adjacency)
    return [
        (i, j, weight) for i in range(n) for j in range(i + 1, n) if adjacency[i][j]
    ]


def run_simulate(config: RunConfig) -> cli.Outcome:
    spec = spec_from_config(config)
    output = Path(config.output)
    data = simkit.simulate(spec)
    outcome = cli.Outcome(diagnostics=[{"simulation": spec.to_dict()}])

    if isinstance(data, FieldData):
        outcome.artifacts.append(str(artifacts.write_field(data, output / "field.npy")))
    elif isinstance(data, GameRecord):
        outcome.artifacts.append(str(artifacts.write_game(data, output / "game.csv")))
        truth = _upper_edges(simkit.game_topology(spec))
        outcome.artifacts.append(
            str(artifacts.write_edges(truth, output / "truth_edges.csv"))
        )
    else:
        outcome.artifacts.append(
            str(artifacts.write_series(data, output / "series.csv"))
        )
        if spec.system == "coupled_network":
            instance = simkit.network_instance(spec)
            truth = _upper_edges(instance.adjacency, instance.coupling)
            outcome.artifacts.append(
                str(artifacts.write_edges(truth, output / "truth_edges.csv"))
            )
    logger.info(f"Wrote {len(outcome.artifacts)} artifacts for {spec.system}")
    return outcome


def register(subparsers):
    parser = cli.register_command(
        subparsers, "simulate", run_simulate, "Generate a ground truth dataset"
    )
    parser.add_argument("--system", choices=schemas.SYSTEMS)
