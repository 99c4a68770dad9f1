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

import importlib
import logging
import pkgutil
import types
import typing as t

logger = logging.getLogger("main/" + __name__)


def command_modules() -> t.List[types.ModuleType]:
    """Modules of this package that add subcommands, in name order

    A command module exposes register(subparsers), anything else is a helper"""
    found = []
    for info in sorted(pkgutil.iter_modules(__path__), key=lambda i: i.name):
        module = importlib.import_module(f"{__name__}.{info.name}")
        if callable(getattr(module, "register", None)):
            found.append(module)
    return found


def register_all(subparsers) -> None:
    for module in command_modules():
        logger.debug(f"Registering commands of {module.__name__}")
        module.register(subparsers)
