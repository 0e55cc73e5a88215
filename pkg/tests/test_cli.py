import json
import subprocess
import sys

import numpy as np
import pytest

from mdccp import backtest, cli, series, solver
from mdccp.synth import synthetic_panel


@pytest.fixture(scope="module")
def panel_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    panel = synthetic_panel(n_assets=3, n_years=2, seed=5)
    path = d / "panel.csv"
    with open(path, "w", newline="") as fh:
        series.write_panel(panel, fh)
    return path


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    return code


def test_stats(panel_file, tmp_path, capsys):
    assert run(["stats", panel_file, "--out", tmp_path]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[0].startswith("Asset\tMean")
    assert [ln.split("\t")[0] for ln in lines[1:]] == ["A1", "A2", "A3"]
    assert (tmp_path / "stats.tsv").read_text() == out
    echo = json.loads((tmp_path / "config.json").read_text())
    assert echo["command"] == "stats" and echo["args"]["missing"] == ""


def test_out_from_environment(panel_file, tmp_path, monkeypatch):
    monkeypatch.setenv("MDCCP_OUT", str(tmp_path / "envout"))
    assert run(["stats", panel_file]) == 0
    assert (tmp_path / "envout" / "stats.tsv").exists()


def test_mfdcca_and_hurst(panel_file, tmp_path):
    assert run(["mfdcca", panel_file, "--q", "-2:2", "--s", "4,8,16", "--out", tmp_path]) == 0
    rows = (tmp_path / "surface.csv").read_text().splitlines()
    assert rows[0] == "pair_i,pair_j,q,s,F"
    assert len(rows) == 1 + 6 * 5 * 3
    assert run(["hurst", panel_file, "--q", "-2:2", "--s", "4,8,16", "--no-self", "--out", tmp_path]) == 0
    rows = (tmp_path / "hurst.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * 5
    echo = json.loads((tmp_path / "config.json").read_text())
    assert echo["resolved"]["detrend"] == {"tau": "scale", "normalization": "corrected", "q_zero_rule": "continuous"}


def test_optimize_full_grid_alpha(panel_file, tmp_path):
    argv = ["optimize", panel_file, "--u", "0.05", "--category", "C-I", "--q", "-20:20", "--s", "3:60", "--out", tmp_path]
    assert run(argv) == 0
    text = (tmp_path / "weights.csv").read_text()
    assert "# alpha: 1/2378\n" in text
    assert "# support_cells: 2378\n" in text
    assert "# Q: -20:20\n" in text and "# S: 3:60\n" in text
    agg = [ln for ln in text.splitlines() if ln.startswith("aggregate,")]
    w = np.array([float(ln.split(",")[-1]) for ln in agg])
    assert abs(w.sum() - 1) < 1e-10
    panel = series.load_panel(panel_file)
    assert abs(w @ panel.values.mean(axis=0) - 0.05) < 1e-10
    mvp = [float(ln.split(",")[-1]) for ln in text.splitlines() if ln.startswith("mvp,")]
    np.testing.assert_array_equal(mvp, solver.solve_mvp(panel, 0.05).weights)


def test_backtest_matches_module(panel_file, tmp_path):
    argv = ["backtest", panel_file, "--u", "0.05,0.15,0.30", "--models", "mvp,mdccp", "--categories", "C-I,C-IX",
            "--q", "-3:3", "--s", "3:20", "--out", tmp_path]
    assert run(argv) == 0
    plan = backtest.BacktestPlan(targets=(0.05, 0.15, 0.30), categories=("C-I", "C-IX"),
                                 q_grid=tuple(range(-3, 4)), s_grid=tuple(range(3, 21)))
    rep = backtest.run_many({"panel": series.load_panel(panel_file)}, plan)
    import io
    buf = io.StringIO()
    backtest.write_tables(rep, buf)
    assert (tmp_path / "report.tsv").read_text() == buf.getvalue()
    for name in ("report_long.csv", "series.csv", "config.json"):
        assert (tmp_path / name).exists()


def test_backtest_replay_byte_identical(panel_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["backtest", panel_file, "--u", "0.05,0.15", "--categories", "all", "--q", "-2:2", "--s", "3:12",
            "--rule", "calendar_year", "--out", a]
    assert run(argv) == 0
    assert run(["backtest", "--config", a / "config.json", "--out", b]) == 0
    for name in ("report.tsv", "report_long.csv", "series.csv", "config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_synth_roundtrip(tmp_path):
    assert run(["synth", "--kind", "correlated_pair", "--length", "512", "--rho", "0.3", "--seed", "4",
                "--name", "pair", "--out", tmp_path]) == 0
    p = series.load_panel(tmp_path / "pair.csv")
    assert p.assets == ("x", "y") and p.length == 512
    assert run(["synth", "--years", "1", "--out", tmp_path]) == 0
    assert series.load_panel(tmp_path / "panel.csv").n_assets == 5


def test_prices_input(tmp_path):
    path = tmp_path / "prices.csv"
    rng = np.random.default_rng(0)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, (30, 2)), axis=0))
    series.write_panel(series.ReturnPanel(("p", "q"), tuple(range(30)), prices), open(path, "w"))
    assert run(["stats", path, "--prices", "--out", tmp_path]) == 0
    echo = json.loads((tmp_path / "config.json").read_text())
    assert echo["resolved"]["return_mode"] == "log"


def test_domain_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n" + "".join(f"{k},0.1\n" for k in range(3)))
    assert run(["stats", bad, "--out", tmp_path]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("error: InsufficientDataError: ")
    flat = tmp_path / "flat.csv"
    flat.write_text("t,a,b\n" + "".join(f"{k},0.1,{(-1) ** k * 0.01}\n" for k in range(40)))
    assert run(["optimize", flat, "--q", "1:2", "--s", "3:5", "--out", tmp_path]) == 1
    assert capsys.readouterr().err == "error: DegenerateAssetError: asset 'a' is constant\n"


@pytest.mark.parametrize(
    "argv",
    [
        ["stats", "x.csv", "--bogus"],
        ["frobnicate"],
        ["optimize"],
        ["synth", "--kind", "nope"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_console_script_subprocess(panel_file, tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "mdccp.cli", "hurst", str(panel_file), "--q", "2", "--s", "4:10", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip().endswith("hurst.csv")


def test_parse_grid():
    assert cli.parse_grid("-2:2") == [-2, -1, 0, 1, 2]
    assert cli.parse_grid("1,2.5") == [1.0, 2.5]
    assert cli.parse_grid("3,4", integer=True) == [3, 4]
    assert cli.parse_categories("all") == list(solver.CATEGORIES)
