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

from .. import artifacts, cli
from ..schemas import RunConfig

logger = logging.getLogger("main/" + __name__)


def run_report(config: RunConfig) -> cli.Outcome:
    model = artifacts.read_model(cli.require_input(config))
    lines = model.equations()
    if model.not_sparse:
        lines.append("# not sparse: the library cannot represent these dynamics")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    logger.info(f"Rendered {len(lines)} equations of a {model.kind} model")

    path = artifacts.write_text(text, Path(config.output) / "equations.txt")
    return cli.Outcome(
        artifacts=[str(path)],
        library=[d.to_dict() for d in model.library],
        diagnostics=[{"kind": model.kind, "not_sparse": model.not_sparse}],
    )


def register(subparsers):
    cli.register_command(
        subparsers, "report", run_report, "Render a model report as equations"
    )
