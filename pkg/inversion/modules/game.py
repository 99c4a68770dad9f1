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

from .. import artifacts, cfg, cli, gamedisc
from ..schemas import GameParams, RunConfig

logger = logging.getLogger("main/" + __name__)


def run_discover_game(config: RunConfig) -> cli.Outcome:
    record = artifacts.read_game(cli.require_input(config))
    options = config.options
    params = GameParams(
        **{k: options[k] for k in ("game", "b", "r", "kappa") if k in options}
    )
    mode = options.get("mode", "agent")
    solver = config.solver
    if mode == "joint" and solver == gamedisc.AGENT_SOLVER:
        solver = gamedisc.JOINT_SOLVER
    network = gamedisc.reconstruct_game_network(
        record,
        params,
        mode=mode,
        solver=solver,
        threshold=options.get("link_threshold", cfg.game_threshold),
        policy=options.get("policy", "or"),
        binary=not options.get("continuous", False),
    )
    output = Path(config.output)
    document = {
        "params": params.to_dict(),
        "mode": mode,
        "rounds": record.rounds,
        "agents": record.n,
        "adjacency": network.adjacency.astype(int),
        "consistency": network.consistency,
        "policy": network.policy,
        "continuous_fits": network.continuous_fits,
    }
    paths = [
        artifacts.write_json(document, output / "network.json"),
        artifacts.write_edges(network.edges(), output / "edges.csv"),
    ]
    return cli.Outcome(
        artifacts=[str(p) for p in paths],
        diagnostics=[
            {
                "consistency": network.consistency,
                "edges": len(network.edges()),
                "continuous_fits": network.continuous_fits,
            }
        ],
    )


def register(subparsers):
    parser = cli.register_command(
        subparsers,
        "discover-game",
        run_discover_game,
        "Social network behind a record of game rounds",
        solver_defaults=gamedisc.AGENT_SOLVER,
    )
    parser.add_argument("--game", choices=("PDG", "SG"))
    parser.add_argument("--b", type=float, help="Temptation to defect")
    parser.add_argument("--r", type=float, help="Snowdrift cost to benefit ratio")
    parser.add_argument("--mode", choices=("agent", "joint"))
    parser.add_argument(
        "--link-threshold", type=float, help="Weight above which a link exists"
    )
    parser.add_argument("--policy", choices=("or", "and"))
    parser.add_argument(
        "--continuous",
        action="store_true",
        default=None,
        help="Fit real-valued weights with the solver instead of 0/1 links",
    )
