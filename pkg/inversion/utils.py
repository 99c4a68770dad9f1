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

import functools
import logging
import typing as t
from concurrent.futures import ThreadPoolExecutor
from time import perf_counter

import numpy as np

from . import cfg


def ensure_rng(f: t.Callable):
    """Decorator for functions that optionally want a numpy random generator

    Provides a generator via the `rng` parameter if one is not already
    provided via the same. A `seed` keyword is consumed to build it.

    Caution: Always put below `@classmethod` and `@staticmethod`"""

    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        rng = kwargs.pop("rng", None)
        seed = kwargs.pop("seed", None)
        if rng is None:
            if seed is None:
                raise ValueError(f"{f.__name__} needs a seed or an rng")
            rng = np.random.default_rng(seed)
        return f(*args, **kwargs, rng=rng)

    return wrapper


def timed(logger: logging.Logger):
    """Log the wall time of the decorated function at info level"""

    def decorator(f: t.Callable):
        @functools.wraps(f)
        def wrapper(*args, **kwargs):
            start = perf_counter()
            result = f(*args, **kwargs)
            logger.info(f"Completed {f.__name__} in {perf_counter() - start:.3f}s")
            return result

        return wrapper

    return decorator


class FriendlyValueError(ValueError):
    pass


class ParseError(FriendlyValueError):
    pass


class LibrarySizeError(FriendlyValueError):
    pass


class PartialObservationError(FriendlyValueError):
    pass


class ThresholdTooHighError(FriendlyValueError):
    pass


class DivergenceError(ArithmeticError):
    """Raised when an integrated or iterated state stops being finite"""

    def __init__(self, step: int, time: float, partial=None):
        super().__init__(f"State became non-finite at step {step} (t={time:g})")
        self.step = step
        self.time = time
        self.partial = partial


T = t.TypeVar("T")
R = t.TypeVar("R")


def map_units(
    func: t.Callable[[T], R], units: t.Iterable[T], workers: t.Optional[int] = None
) -> t.List[R]:
    """Map independent work units, in a thread pool when workers > 1

    Results come back in the order of the units"""
    workers = workers or cfg.workers
    units = list(units)
    if workers <= 1 or len(units) <= 1:
        return [func(unit) for unit in units]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, units))
