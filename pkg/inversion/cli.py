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
import hashlib
import logging
import typing as t
from pathlib import Path
from time import perf_counter

import attr

from . import artifacts, cfg, schemas, utils
from .schemas import RunConfig, SolverConfig

logger = logging.getLogger("main/" + __name__)

Handler = t.Callable[[RunConfig], "Outcome"]

# Flags shared by every command, mapped onto RunConfig & SolverConfig
COMMON_FLAGS = ("config", "seed", "order", "time_order", "out", "input")
SOLVER_FLAGS = ("solver", "lam", "threshold", "folds", "scheme", "normalize")


@attr.s
class Outcome:
    """What a command produced, folded into the manifest"""

    artifacts: t.List[str] = attr.ib(factory=list)
    library: t.Optional[t.List[dict]] = attr.ib(default=None)
    diagnostics: t.List[dict] = attr.ib(factory=list)
    not_sparse: bool = attr.ib(default=False)

    @property
    def converged(self) -> bool:
        return all(d.get("converged", True) for d in self.diagnostics)

    @property
    def status(self) -> int:
        if self.not_sparse:
            return cfg.EXIT_NOT_SPARSE
        if not self.converged:
            return cfg.EXIT_NONCONVERGENCE
        return cfg.EXIT_OK


def common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="TOML or JSON run configuration")
    parser.add_argument("--seed", type=int, help="Seed for every random draw")
    parser.add_argument("--solver", choices=sorted(schemas.SOLVER_NAMES))
    parser.add_argument("--lambda", dest="lam", type=float, help="LASSO weight")
    parser.add_argument("--threshold", type=float, help="Hard threshold level")
    parser.add_argument("--folds", type=int, help="Cross validation folds")
    parser.add_argument("--scheme", choices=schemas.SCHEMES, help="Derivative scheme")
    parser.add_argument(
        "--no-normalize",
        dest="normalize",
        action="store_false",
        default=None,
        help="Solve on raw library columns",
    )
    parser.add_argument("--order", type=int, help="Polynomial order q")
    parser.add_argument("--time-order", type=int, help="Time expansion order v")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--input", help="Input data file")
    return parser


def resolve(command: str, args: argparse.Namespace) -> RunConfig:
    """Merge cfg defaults, the config file and flags, in increasing priority"""
    flags = {
        k: v
        for k, v in vars(args).items()
        if v is not None and k not in ("handler", "command", "solver_defaults")
    }
    document = schemas.load_document(flags["config"]) if "config" in flags else {}

    solver_document = dict(getattr(args, "solver_defaults", None) or {})
    solver_document.update(document.get("solver", {}))
    for key in SOLVER_FLAGS:
        if key in flags:
            solver_document[key] = flags[key]
    if "lambda" in solver_document:
        solver_document["lam"] = solver_document.pop("lambda")

    options = dict(document.get("options", {}))
    if "simulation" in document:
        options["simulation"] = document["simulation"]
    options.update(
        {
            k: v
            for k, v in flags.items()
            if k not in COMMON_FLAGS and k not in SOLVER_FLAGS
        }
    )

    def pick(key: str, default=None):
        return flags.get(key, document.get(key, default))

    try:
        return RunConfig(
            command=command,
            output=pick("out", "out"),
            input=pick("input"),
            seed=pick("seed"),
            order=pick("order", 3),
            time_order=pick("time_order", cfg.time_order),
            solver=SolverConfig.from_dict(solver_document),
            options=options,
        )
    except (TypeError, ValueError) as e:
        raise utils.ParseError(f"Invalid configuration: {e}") from e


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(schemas.dumps(config.to_dict()).encode()).hexdigest()


def require_input(config: RunConfig) -> Path:
    if config.input is None:
        raise utils.ParseError(f"{config.command} needs --input")
    path = Path(config.input)
    if not path.exists():
        raise utils.ParseError(f"Input {path} does not exist")
    return path


def run(config: RunConfig, handler: Handler) -> int:
    """Execute one command and write its manifest

    Returns the process exit status. Everything written by a failing run is
    removed again"""
    logger.info(f"Running {config.command} with seed {config.seed}")
    output = Path(config.output)
    start = perf_counter()
    artifacts.written.clear()
    try:
        output.mkdir(parents=True, exist_ok=True)
        outcome = handler(config)
        manifest = {
            "command": config.command,
            "config": config.to_dict(),
            "config_hash": config_hash(config),
            "seed": config.seed,
            "artifacts": outcome.artifacts,
            "library": outcome.library,
            "diagnostics": outcome.diagnostics,
            "status": outcome.status,
            "wall_time_s": round(perf_counter() - start, 6),
        }
        artifacts.write_json(manifest, output / "manifest.json")
    except utils.ParseError as e:
        logger.error(f"Parse error: {e}")
        artifacts.remove_written()
        return cfg.EXIT_PARSE
    except utils.DivergenceError as e:
        logger.error(str(e))
        artifacts.remove_written()
        return cfg.EXIT_DIVERGED
    except utils.FriendlyValueError as e:
        logger.error(str(e))
        artifacts.remove_written()
        return cfg.EXIT_USAGE
    except Exception:
        logger.exception(f"{config.command} failed")
        artifacts.remove_written()
        raise

    if outcome.status == cfg.EXIT_NOT_SPARSE:
        logger.warning("Finished, but the recovered model is not sparse")
    elif outcome.status == cfg.EXIT_NONCONVERGENCE:
        logger.warning("Finished, but a solver did not converge")
    logger.info(f"Completed {config.command} in {perf_counter() - start:.3f}s")
    return outcome.status


def register_command(
    subparsers,
    name: str,
    handler: Handler,
    help: str,
    solver_defaults: t.Optional[SolverConfig] = None,
) -> argparse.ArgumentParser:
    """Add a subcommand carrying the shared flags

    solver_defaults replaces the stls defaults for commands that solve
    differently, the config file and flags still override it"""
    parser = subparsers.add_parser(name, help=help, parents=[common_parser()])
    parser.set_defaults(
        handler=handler,
        command=name,
        solver_defaults=solver_defaults.to_dict() if solver_defaults else None,
    )
    return parser
