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

from .. import artifacts, cfg, cli, weakpde
from ..schemas import RunConfig

logger = logging.getLogger("main/" + __name__)


def run_discover_pde(config: RunConfig) -> cli.Outcome:
    field = artifacts.read_field(cli.require_input(config))
    options = config.options
    terms = weakpde.pde_library(
        options.get("max_power", cfg.pde_max_power),
        options.get("max_derivative", cfg.pde_max_derivative),
    )
    threshold = options.get("pde_threshold", cfg.pde_threshold)
    model = weakpde.identify_pde(
        field,
        terms,
        domain_count=options.get("domains"),
        seed=config.seed or 0,
        threshold=threshold,
    )
    path = artifacts.write_json(
        artifacts.model_report(model), Path(config.output) / "model.json"
    )
    return cli.Outcome(
        artifacts=[str(path)],
        library=[term.to_dict() for term in terms],
        diagnostics=list(model.diagnostics),
    )


def register(subparsers):
    parser = cli.register_command(
        subparsers, "discover-pde", run_discover_pde, "Weak form PDE identification"
    )
    parser.add_argument("--domains", type=int, help="Number of integration domains")
    parser.add_argument("--max-power", type=int, help="Highest power p of u")
    parser.add_argument("--max-derivative", type=int, help="Highest derivative order k")
    parser.add_argument(
        "--pde-threshold", type=float, help="Relative cutoff on natural coefficients"
    )
