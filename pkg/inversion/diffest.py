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
import typing as t

import numpy as np
import scipy.ndimage

from . import cfg, utils
from .schemas import TimeSeries

logger = logging.getLogger("main/" + __name__)

# Every estimator returns a TimeSeries whose times are the instants the
# derivative rows belong to, so library rows can be evaluated at exactly those


def _require(series: TimeSeries, samples: int, scheme: str) -> None:
    if len(series) < samples:
        raise utils.FriendlyValueError(
            f"{scheme} needs at least {samples} samples, got {len(series)}"
        )


def _require_uniform(series: TimeSeries, scheme: str) -> float:
    if not series.is_uniform:
        raise utils.FriendlyValueError(
            f"{scheme} needs uniform sampling, use central differences instead"
        )
    return series.dt


def backward_difference(series: TimeSeries) -> TimeSeries:
    """(x(t_i) - x(t_i-1)) / dt for i = 1..M, aligned with t_i"""
    _require(series, 2, "Backward differencing")
    dt = _require_uniform(series, "Backward differencing")
    x = series.values
    return TimeSeries(series.times[1:], (x[1:] - x[:-1]) / dt, dt, series.channel_names)


def central_difference(series: TimeSeries) -> TimeSeries:
    """(x(t_i+1) - x(t_i-1)) / (t_i+1 - t_i-1) on the interior samples

    Works on non-uniform grids too, second order accurate on uniform ones"""
    _require(series, 3, "Central differencing")
    x, times = series.values, series.times
    spans = (times[2:] - times[:-2])[:, None]
    return TimeSeries(
        times[1:-1], (x[2:] - x[:-2]) / spans, series.dt, series.channel_names
    )


def central4_difference(series: TimeSeries) -> TimeSeries:
    """Five point, fourth order central stencil on uniform samples"""
    _require(series, 5, "Fourth order differencing")
    dt = _require_uniform(series, "Fourth order differencing")
    x = series.values
    derivative = (-x[4:] + 8 * x[3:-1] - 8 * x[1:-3] + x[:-4]) / (12 * dt)
    return TimeSeries(series.times[2:-2], derivative, dt, series.channel_names)


def map_increments(series: TimeSeries) -> TimeSeries:
    """Next iterate x(t_i+1) as the target paired with the state at t_i"""
    _require(series, 2, "Map increments")
    return TimeSeries(
        series.times[:-1], series.values[1:], series.dt, series.channel_names
    )


SCHEMES: t.Dict[str, t.Callable[[TimeSeries], TimeSeries]] = {
    "backward": backward_difference,
    "central": central_difference,
    "central4": central4_difference,
}


def derivative(series: TimeSeries, scheme: str = cfg.default_scheme) -> TimeSeries:
    try:
        estimator = SCHEMES[scheme]
    except KeyError:
        raise utils.FriendlyValueError(
            f"Unknown scheme {scheme!r}, expected one of {sorted(SCHEMES)}"
        ) from None
    if scheme == "central4" and not series.is_uniform:
        logger.warning("Samples are not uniform, using central differences")
        estimator = central_difference
    return estimator(series)


def align(series: TimeSeries, targets: TimeSeries) -> TimeSeries:
    """Samples of series at the instants of targets

    Target instants must be a contiguous run of the series instants"""
    start = int(np.searchsorted(series.times, targets.times[0]))
    rows = np.arange(start, start + len(targets))
    if rows[-1] >= len(series) or not np.array_equal(
        series.times[rows], targets.times
    ):
        raise AssertionError("Target rows do not line up with the sample instants")
    return series.take(rows)


def smooth(series: TimeSeries, window: int) -> TimeSeries:
    """Centred moving average over an odd window

    The window // 2 samples at each end are dropped, so the result starts
    later and ends earlier than the input"""
    if window < 1 or window % 2 == 0:
        raise utils.FriendlyValueError("Smoothing window must be a positive odd count")
    if window == 1:
        return series
    half = window // 2
    _require(series, window, "Smoothing")
    averaged = scipy.ndimage.uniform_filter1d(series.values, size=window, axis=0)
    logger.info(f"Smoothed with a {window} sample window, {half} samples trimmed per end")
    return TimeSeries(
        series.times[half:-half],
        averaged[half:-half],
        series.dt,
        series.channel_names,
    )
