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

import numpy as np
import pytest

from .. import artifacts, cfg, cli, modules, utils
from ..__main__ import main
from ..modules import bifurcation
from ..schemas import RunConfig


def _manifest(directory):
    return json.loads((directory / "manifest.json").read_text())


@pytest.fixture(scope="module")
def lorenz_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("lorenz")
    assert main(["simulate", "--system", "lorenz", "--out", str(out)]) == cfg.EXIT_OK
    return out


def test_simulate_writes_series_and_manifest(lorenz_dir):
    manifest = _manifest(lorenz_dir)
    assert manifest["command"] == "simulate"
    assert manifest["status"] == cfg.EXIT_OK
    assert manifest["artifacts"] == [str(lorenz_dir / "series.csv")]
    assert manifest["diagnostics"][0]["simulation"]["system"] == "lorenz"

    series = artifacts.read_series(lorenz_dir / "series.csv")
    assert series.channel_names == ("x", "y", "z")
    assert len(series) == 5000
    assert series.dt == pytest.approx(0.01)


def test_discover_and_report(lorenz_dir, tmp_path, capsys):
    fit = tmp_path / "fit"
    status = main(
        [
            "discover-ode",
            "--input",
            str(lorenz_dir / "series.csv"),
            "--threshold",
            "0.01",
            "--scheme",
            "central4",
            "--out",
            str(fit),
        ]
    )
    assert status == cfg.EXIT_OK

    manifest = _manifest(fit)
    assert manifest["status"] == cfg.EXIT_OK
    assert len(manifest["config_hash"]) == 64
    assert len(manifest["library"]) == 64
    assert manifest["config"]["solver"]["threshold"] == 0.01
    assert manifest["wall_time_s"] >= 0

    model = artifacts.read_model(fit / "model.json")
    assert sum(len(model.support(i)) for i in range(3)) == 7

    rendered = tmp_path / "report"
    status = main(
        ["report", "--input", str(fit / "model.json"), "--out", str(rendered)]
    )
    assert status == cfg.EXIT_OK
    lines = (rendered / "equations.txt").read_text().splitlines()
    assert [line.split(" = ")[0] for line in lines] == ["dx/dt", "dy/dt", "dz/dt"]
    assert "dx/dt" in capsys.readouterr().out


def test_config_file_and_flags(lorenz_dir, tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('order = 2\n\n[solver]\nthreshold = 0.05\nsolver = "stls"\n')
    out = tmp_path / "fit"
    status = main(
        [
            "discover-ode",
            "--config",
            str(config),
            "--threshold",
            "0.01",
            "--input",
            str(lorenz_dir / "series.csv"),
            "--out",
            str(out),
        ]
    )
    assert status == cfg.EXIT_OK
    resolved = _manifest(out)["config"]
    assert resolved["order"] == 2
    # Flags beat the config file
    assert resolved["solver"]["threshold"] == 0.01


def test_simulation_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        args = ["simulate", "--system", "game", "--seed", "5", "--out", str(out)]
        assert main(args) == cfg.EXIT_OK
    for name in ("game.csv", "truth_edges.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.parametrize("mode", ["agent", "joint"])
def test_game_pipeline(tmp_path, mode):
    config = tmp_path / "game.toml"
    config.write_text(
        "[simulation]\n"
        'system = "game"\n'
        "seed = 2\n"
        "horizon = 15\n"
        "[simulation.parameters]\n"
        "n = 22\n"
        "mean_degree = 4\n"
    )
    data = tmp_path / "data"
    assert main(["simulate", "--config", str(config), "--out", str(data)]) == 0

    fit = tmp_path / "fit"
    status = main(
        [
            "discover-game",
            "--input",
            str(data / "game.csv"),
            "--mode",
            mode,
            "--out",
            str(fit),
        ]
    )
    assert status == cfg.EXIT_OK
    found = [(i, j) for i, j, _ in artifacts.read_edges(fit / "edges.csv")]
    truth = [(i, j) for i, j, _ in artifacts.read_edges(data / "truth_edges.csv")]
    assert found == truth
    assert json.loads((fit / "network.json").read_text())["continuous_fits"] == 0
    assert _manifest(fit)["config"]["solver"]["solver"] == "lasso"


def test_malformed_input_leaves_nothing(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x\n0,1\n1,abc\n2,3\n")
    out = tmp_path / "out"
    status = main(["discover-ode", "--input", str(bad), "--out", str(out)])
    assert status == cfg.EXIT_PARSE
    assert list(out.iterdir()) == []


def test_missing_input(tmp_path):
    status = main(["discover-ode", "--out", str(tmp_path / "out")])
    assert status == cfg.EXIT_PARSE


def test_invalid_config_values(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"solver": {"solver": "simplex"}}))
    status = main(["report", "--config", str(config), "--out", str(tmp_path)])
    assert status == cfg.EXIT_PARSE


def test_library_too_large(lorenz_dir, tmp_path):
    out = tmp_path / "out"
    status = main(
        [
            "discover-ode",
            "--input",
            str(lorenz_dir / "series.csv"),
            "--order",
            "30",
            "--out",
            str(out),
        ]
    )
    assert status == cfg.EXIT_USAGE
    assert not (out / "manifest.json").exists()


def test_divergent_simulation(tmp_path):
    config = tmp_path / "sim.json"
    config.write_text(
        json.dumps(
            {
                "simulation": {
                    "system": "quadratic_map",
                    "parameters": {"a": 2.5},
                    "horizon": 500,
                }
            }
        )
    )
    out = tmp_path / "out"
    status = main(["simulate", "--config", str(config), "--out", str(out)])
    assert status == cfg.EXIT_DIVERGED
    assert list(out.iterdir()) == []


def test_dense_model_exit_status(tmp_path):
    data = tmp_path / "data"
    assert main(["simulate", "--system", "ikeda", "--out", str(data)]) == 0
    out = tmp_path / "fit"
    status = main(
        [
            "discover-map",
            "--input",
            str(data / "series.csv"),
            "--order",
            "3",
            "--out",
            str(out),
        ]
    )
    assert status == cfg.EXIT_NOT_SPARSE
    # Results are still written
    assert _manifest(out)["status"] == cfg.EXIT_NOT_SPARSE
    assert (out / "model.json").exists()


def test_parse_grid():
    np.testing.assert_allclose(bifurcation.parse_grid("1.5:2.5:3"), [1.5, 2.0, 2.5])
    np.testing.assert_allclose(bifurcation.parse_grid("1, 2,4"), [1.0, 2.0, 4.0])
    with pytest.raises(utils.ParseError):
        bifurcation.parse_grid("1.5:two")


def test_map_crisis_pipeline(tmp_path):
    data, fit, scan = tmp_path / "data", tmp_path / "fit", tmp_path / "scan"
    assert main(["simulate", "--system", "quadratic_map", "--out", str(data)]) == 0
    status = main(
        ["discover-map", "--input", str(data / "series.csv"), "--out", str(fit)]
    )
    assert status == cfg.EXIT_OK

    status = main(
        [
            "scan-bifurcation",
            "--input",
            str(fit / "model.json"),
            "--parameter",
            "x:1",
            "--grid",
            "1.5:2.5:11",
            "--seed",
            "0",
            "--out",
            str(scan),
        ]
    )
    assert status == cfg.EXIT_OK
    report = json.loads((scan / "bifurcation.json").read_text())
    assert report["critical_value"] == pytest.approx(2.0, abs=0.05)
    assert (scan / "outcomes.csv").exists()


def test_scan_needs_a_parameter(tmp_path):
    data, fit = tmp_path / "data", tmp_path / "fit"
    assert main(["simulate", "--system", "quadratic_map", "--out", str(data)]) == 0
    main(["discover-map", "--input", str(data / "series.csv"), "--out", str(fit)])
    status = main(
        ["scan-bifurcation", "--input", str(fit / "model.json"), "--out", str(tmp_path)]
    )
    assert status == cfg.EXIT_PARSE


def test_heat_pipeline(tmp_path):
    data, fit = tmp_path / "data", tmp_path / "fit"
    assert main(["simulate", "--system", "heat_pde", "--out", str(data)]) == 0
    assert (data / "field.json").exists()

    status = main(
        [
            "discover-pde",
            "--input",
            str(data / "field.npy"),
            "--max-power",
            "1",
            "--max-derivative",
            "2",
            "--domains",
            "30",
            "--out",
            str(fit),
        ]
    )
    assert status == cfg.EXIT_OK
    model = artifacts.read_model(fit / "model.json")
    assert [model.library[i].label() for i in model.support(0)] == ["u_xx"]


def test_rolling_time_varying_pipeline(tmp_path):
    data, fit = tmp_path / "data", tmp_path / "fit"
    assert main(["simulate", "--system", "linear_drift", "--out", str(data)]) == 0
    status = main(
        [
            "discover-tv",
            "--input",
            str(data / "series.csv"),
            "--order",
            "1",
            "--time-order",
            "1",
            "--threshold",
            "0.02",
            "--scheme",
            "central4",
            "--window",
            "4",
            "--out",
            str(fit),
        ]
    )
    assert status == cfg.EXIT_OK
    names = sorted(p.name for p in fit.glob("model_*.json"))
    assert names == [f"model_{k:03d}.json" for k in range(4)]
    windows = [d["window"] for d in _manifest(fit)["diagnostics"]]
    np.testing.assert_allclose(windows, [[0, 4], [2, 6], [4, 8], [6, 10]])


def test_network_command(lorenz_dir, tmp_path):
    config = tmp_path / "ring.toml"
    config.write_text(
        "[simulation]\n"
        'system = "coupled_network"\n'
        "seed = 0\n"
        "horizon = 2000\n"
        "step = 0.01\n"
        "transient_discard = 1000\n"
        "[simulation.parameters]\n"
        "n = 6\n"
        'topology = "ring"\n'
        "k = 1\n"
    )
    data, fit = tmp_path / "data", tmp_path / "fit"
    assert main(["simulate", "--config", str(config), "--out", str(data)]) == 0
    assert len(artifacts.read_edges(data / "truth_edges.csv")) == 6

    args = ["discover-network", "--input", str(data / "series.csv"), "--out", str(fit)]
    assert main(args) == cfg.EXIT_PARSE

    status = main(args + ["--nodes", "6", "--node-order", "2", "--max-samples", "400"])
    assert status in (cfg.EXIT_OK, cfg.EXIT_NONCONVERGENCE, cfg.EXIT_NOT_SPARSE)
    network = json.loads((fit / "network.json").read_text())
    assert len(network["adjacency"]) == 6
    assert len(network["nodal_models"]) == 6
    assert _manifest(fit)["config"]["solver"]["solver"] == "omp"

    # Three lorenz channels cannot be split over two nodes
    bad = ["discover-network", "--input", str(lorenz_dir / "series.csv")]
    assert main(bad + ["--nodes", "2", "--out", str(tmp_path / "bad")]) == 3


@pytest.mark.parametrize(
    "error, status",
    [
        (utils.DivergenceError(12, 0.12), cfg.EXIT_DIVERGED),
        (utils.FriendlyValueError("bad option"), cfg.EXIT_USAGE),
        (utils.ParseError("bad cell"), cfg.EXIT_PARSE),
    ],
)
def test_failure_removes_partial_outputs(tmp_path, error, status):
    def handler(config):
        artifacts.write_json({"partial": True}, tmp_path / "first.json")
        artifacts.write_edges([(0, 1, 1.0)], tmp_path / "edges.csv")
        raise error

    config = RunConfig(command="discover-network", output=str(tmp_path))
    assert cli.run(config, handler) == status
    assert list(tmp_path.iterdir()) == []
    assert artifacts.written == []


def test_unexpected_failure_still_cleans_up(tmp_path):
    def handler(config):
        artifacts.write_json({}, tmp_path / "first.json")
        raise RuntimeError("boom")

    config = RunConfig(command="report", output=str(tmp_path))
    with pytest.raises(RuntimeError):
        cli.run(config, handler)
    assert not (tmp_path / "first.json").exists()


def test_command_modules():
    names = [m.__name__.rsplit(".", 1)[-1] for m in modules.command_modules()]
    assert names == [
        "bifurcation",
        "equations",
        "game",
        "network",
        "pde",
        "report",
        "simulate",
    ]
