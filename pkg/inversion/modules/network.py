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

from .. import artifacts, cli, netdisc, utils
from ..schemas import NetworkData, RunConfig, SolverConfig

logger = logging.getLogger("main/" + __name__)


def network_data(config: RunConfig) -> NetworkData:
    series = artifacts.read_series(cli.require_input(config))
    nodes = config.options.get("nodes")
    if nodes is None:
        raise utils.ParseError("discover-network needs --nodes")
    if series.m % nodes:
        raise utils.ParseError(f"{series.m} channels do not split into {nodes} nodes")
    return NetworkData(nodes, series.m // nodes, series)


def run_discover_network(config: RunConfig) -> cli.Outcome:
    data = network_data(config)
    options = config.options
    estimate = netdisc.reconstruct_network(
        data,
        order=options.get("node_order", 1),
        solver=config.solver,
        max_samples=options.get("max_samples"),
        threshold=options.get("edge_threshold"),
        policy=options.get("policy", "or"),
        seed=config.seed or 0,
    )
    output = Path(config.output)
    document = estimate.to_dict()
    document["nodal_models"] = estimate.nodal_models
    paths = [
        artifacts.write_json(document, output / "network.json"),
        artifacts.write_edges(estimate.edges(), output / "edges.csv"),
    ]
    diagnostics = [
        {"node": row.node, **d} for row in estimate.rows for d in row.diagnostics
    ]
    return cli.Outcome(
        artifacts=[str(p) for p in paths],
        diagnostics=diagnostics,
        not_sparse=any(row.not_sparse for row in estimate.rows),
    )


def register(subparsers):
    parser = cli.register_command(
        subparsers,
        "discover-network",
        run_discover_network,
        "Coupling topology of an oscillator network",
        solver_defaults=SolverConfig(solver="omp"),
    )
    parser.add_argument("--nodes", type=int, help="Node count, channels grouped by node")
    parser.add_argument("--node-order", type=int, help="Polynomial order per node")
    parser.add_argument("--max-samples", type=int, help="Rows used per node")
    parser.add_argument("--edge-threshold", type=float, help="Absolute coupling cutoff")
    parser.add_argument("--policy", choices=netdisc.POLICIES)
