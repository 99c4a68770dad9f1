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

import argparse
import logging
import sys
import typing as t

import logwood.compat

from . import cfg, cli, modules, utils


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inversion",
        description="Recover governing equations & network topologies from time series",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    modules.register_all(subparsers)
    return parser


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = cli.resolve(args.command, args)
    except utils.ParseError as e:
        logging.error(f"Parse error: {e}")
        return cfg.EXIT_PARSE
    return cli.run(config, args.handler)


def console() -> None:
    logwood.compat.redirect_standard_logging()
    sys.exit(main())


if __name__ == "__main__":
    console()
