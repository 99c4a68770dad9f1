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

import json
import logging
import typing as t
from pathlib import Path

import numpy as np
import pandas as pd

from . import schemas, utils
from .gamedisc import parse_strategy
from .schemas import FieldData, GameRecord, RecoveredModel, TimeSeries

logger = logging.getLogger("main/" + __name__)

FLOAT_FORMAT = "%.17g"

# Written files are tracked so a failed run can remove what it produced
written: t.List[Path] = []


def _track(path: Path) -> Path:
    written.append(path)
    return path


def remove_written() -> None:
    while written:
        path = written.pop()
        path.unlink(missing_ok=True)
        logger.info(f"Removed partial output {path}")


def _read_csv(path: str | Path, columns: t.Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise utils.ParseError(f"Could not read {path}: {e}") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise utils.ParseError(f"{path} lacks columns {missing}")
    if frame.empty:
        raise utils.ParseError(f"{path} holds no rows")
    return frame


def _numeric(frame: pd.DataFrame, columns: t.Sequence[str], path) -> np.ndarray:
    try:
        values = frame[list(columns)].apply(pd.to_numeric, errors="raise")
        values = values.to_numpy(float)
    except (ValueError, TypeError) as e:
        raise utils.ParseError(f"{path} holds non numeric values: {e}") from e
    if not np.all(np.isfinite(values)):
        raise utils.ParseError(f"{path} holds non finite values")
    return values


########### Time series ###########


def write_series(series: TimeSeries, path: str | Path) -> Path:
    """CSV with header t,<channel names>"""
    path = Path(path)
    frame = pd.DataFrame(series.values, columns=list(series.channel_names))
    frame.insert(0, "t", series.times)
    frame.to_csv(_track(path), index=False, float_format=FLOAT_FORMAT)
    return path


def read_series(path: str | Path) -> TimeSeries:
    """Time series CSV, uniform sampling detected from the t column"""
    frame = _read_csv(path, ["t"])
    names = [c for c in frame.columns if c != "t"]
    if not names:
        raise utils.ParseError(f"{path} has no data channels")
    times = _numeric(frame, ["t"], path)[:, 0]
    values = _numeric(frame, names, path)
    steps = np.diff(times)
    dt = None
    if len(steps) and steps.min() > 0:
        dt = float(steps.mean())
        if np.any(np.abs(steps - dt) >= 1e-9 * dt):
            dt = None
    try:
        return TimeSeries(times, values, dt, names)
    except utils.FriendlyValueError as e:
        raise utils.ParseError(f"{path}: {e}") from e


############### Games #############


def write_game(record: GameRecord, path: str | Path) -> Path:
    """Long CSV round,agent,strategy,payoff with strategies as C or D"""
    path = Path(path)
    rounds, agents = np.meshgrid(
        np.arange(record.rounds), np.arange(record.n), indexing="ij"
    )
    frame = pd.DataFrame(
        {
            "round": rounds.ravel(),
            "agent": agents.ravel(),
            "strategy": np.where(record.strategies.ravel() == 0, "C", "D"),
            "payoff": record.payoffs.ravel(),
        }
    )
    frame.to_csv(_track(path), index=False, float_format=FLOAT_FORMAT)
    return path


def read_game(path: str | Path) -> GameRecord:
    frame = _read_csv(path, ["round", "agent", "strategy", "payoff"])
    try:
        frame["strategy"] = frame["strategy"].astype(str).str.strip().map(parse_strategy)
    except utils.ParseError as e:
        raise utils.ParseError(f"{path}: {e}") from e
    frame[["round", "agent", "payoff"]] = _numeric(
        frame, ["round", "agent", "payoff"], path
    )
    if frame.duplicated(["round", "agent"]).any():
        raise utils.ParseError(f"{path} repeats a (round, agent) pair")
    strategies = frame.pivot(index="round", columns="agent", values="strategy")
    payoffs = frame.pivot(index="round", columns="agent", values="payoff")
    if strategies.isna().any().any():
        raise utils.ParseError(f"{path} misses some agents in some rounds")
    return GameRecord(strategies.to_numpy(int), payoffs.to_numpy(float))


############### Edges #############


def write_edges(edges: t.Iterable[t.Tuple[int, int, float]], path: str | Path) -> Path:
    path = Path(path)
    frame = pd.DataFrame(list(edges), columns=["i", "j", "weight"])
    frame.to_csv(_track(path), index=False, float_format=FLOAT_FORMAT)
    return path


def read_edges(path: str | Path) -> t.List[t.Tuple[int, int, float]]:
    frame = _read_csv(path, ["i", "j", "weight"])
    values = _numeric(frame, ["i", "j", "weight"], path)
    return [(int(i), int(j), float(w)) for i, j, w in values]


############### Fields ############


def write_field(field: FieldData, path: str | Path) -> Path:
    """Lattice values as .npy plus a .json sidecar, or long CSV t,x,u"""
    path = Path(path)
    if path.suffix == ".csv":
        t_grid, x_grid = np.meshgrid(field.t, field.x, indexing="ij")
        frame = pd.DataFrame(
            {"t": t_grid.ravel(), "x": x_grid.ravel(), "u": field.values.ravel()}
        )
        frame.to_csv(_track(path), index=False, float_format=FLOAT_FORMAT)
        return path
    np.save(_track(path.with_suffix(".npy")), np.asarray(field.values))
    write_json(field.metadata(), path.with_suffix(".json"))
    return path.with_suffix(".npy")


def read_field(path: str | Path) -> FieldData:
    path = Path(path)
    if path.suffix == ".csv":
        frame = _read_csv(path, ["t", "x", "u"])
        frame[["t", "x", "u"]] = _numeric(frame, ["t", "x", "u"], path)
        lattice = frame.pivot_table(index="t", columns="x", values="u", aggfunc="first")
        if lattice.isna().any().any():
            raise utils.ParseError(f"{path} is not a complete lattice")
        t_axis = lattice.index.to_numpy(float)
        x_axis = lattice.columns.to_numpy(float)
        dx, dt = _spacing(x_axis, path), _spacing(t_axis, path)
        return FieldData(lattice.to_numpy(float), dx, dt, True, x_axis[0], t_axis[0])

    sidecar = path.with_suffix(".json")
    try:
        values = np.load(path.with_suffix(".npy"))
        with sidecar.open() as f:
            meta = json.load(f)
        return FieldData(
            values,
            meta["dx"],
            meta["dt"],
            meta.get("periodic", True),
            meta.get("x0", 0.0),
            meta.get("t0", 0.0),
        )
    except (OSError, ValueError, KeyError) as e:
        raise utils.ParseError(f"Could not read field {path}: {e}") from e


def _spacing(axis: np.ndarray, path) -> float:
    steps = np.diff(axis)
    if not len(steps) or np.any(np.abs(steps - steps.mean()) > 1e-9 * steps.mean()):
        raise utils.ParseError(f"{path} is not on a uniform lattice")
    return float(steps.mean())


########### Documents #############


def write_text(text: str, path: str | Path) -> Path:
    path = Path(path)
    _track(path).write_text(text)
    return path


def write_table(rows: t.Sequence[dict], path: str | Path) -> Path:
    """Tidy CSV of a list of records, for external plotting"""
    path = Path(path)
    pd.DataFrame(list(rows)).to_csv(_track(path), index=False, float_format=FLOAT_FORMAT)
    return path


def write_json(document: t.Any, path: str | Path) -> Path:
    path = Path(path)
    _track(path).write_text(schemas.dumps(document))
    return path


def read_model(path: str | Path) -> RecoveredModel:
    try:
        document = json.loads(Path(path).read_text())
        return RecoveredModel.from_dict(document.get("model", document))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise utils.ParseError(f"Could not read model report {path}: {e}") from e


def model_report(model: RecoveredModel) -> dict:
    """Model document plus readable equations"""
    return {"model": model.to_dict(), "equations": model.equations()}
