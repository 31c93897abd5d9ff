import csv
import io
import json
import math

import numpy as np
import pytest

from erm_asymptotics import cli
from erm_asymptotics.errors import ConfigError


def _run(args, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--output", str(out)])
    return code, out


def _rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


# -- grids and configuration


def test_grid_syntax():
    assert cli.parse_grid("0.5") == [0.5]
    assert cli.parse_grid("1,5,20") == [1.0, 5.0, 20.0]
    assert cli.parse_grid("0.5:4:8") == pytest.approx(list(np.linspace(0.5, 4, 8)))
    log = cli.parse_grid("0.1L100L4")
    assert log == pytest.approx([0.1, 1.0, 10.0, 100.0])
    assert cli.parse_grid("0,1", positive=False) == [0.0, 1.0]


@pytest.mark.parametrize("bad", ["", " ", "1:2", "a,b", "0,1", "-1L3L3", "1:2:0", "nan"])
def test_grid_errors(bad):
    with pytest.raises(ConfigError):
        cli.parse_grid(bad)


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bayes run\nalpha = 1,2\nformat=json\ntol = 1e-9\n")
    ns = cli.build_parser().parse_args(["bayes", "--config", str(cfg), "--alpha", "3"])
    s = cli.resolve_settings(ns)
    assert s["alpha_grid"] == [3.0]
    assert s["format"] == "json"
    assert s["tol"] == 1e-9
    assert s["d"] == 1000


def test_config_file_errors_name_the_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha=1\n\nnot a pair\n")
    with pytest.raises(ConfigError, match=r"bad.cfg:3"):
        cli.read_config_file(cfg)
    cfg.write_text("alpha=1\nwidth=3\n")
    with pytest.raises(ConfigError, match=r"bad.cfg:2: unknown key"):
        cli.read_config_file(cfg)
    cfg.write_text("d=many\n")
    with pytest.raises(ConfigError, match=r"bad.cfg:1: d expects int"):
        cli.read_config_file(cfg)


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    s = cli.resolve_settings(cli.build_parser().parse_args(["bayes", "--alpha", "1"]))
    assert s["threads"] == 3
    s = cli.resolve_settings(cli.build_parser().parse_args(["bayes", "--alpha", "1", "--threads", "1"]))
    assert s["threads"] == 1


def test_empty_grid_exits_without_output(tmp_path, capsys):
    code, out = _run(["solve", "--alpha", "", "--lambda", "0.1"], tmp_path)
    assert code == 2
    assert not out.exists()
    assert not list(tmp_path.iterdir())
    assert "alpha" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["solve", "--alpha", "1"],
    ["solve", "--alpha", "1", "--lambda", "0"],
    ["solve", "--alpha", "1", "--lambda", "0.1", "--d", "1"],
    ["solve", "--alpha", "1", "--lambda", "0.1", "--format", "xml"],
    ["solve", "--alpha", "1", "--lambda", "0.1", "--loss", "optimal"],
    ["solve", "--alpha", "1", "--lambda", "0.1", "--channel", "bogus"],
])
def test_invalid_configs_exit_2(args, tmp_path):
    code, out = _run(args, tmp_path)
    assert code == 2 and not out.exists()


# -- commands


def test_solve_rows_carry_audit_columns(tmp_path):
    code, out = _run(["solve", "--loss", "square", "--alpha", "1,2", "--lambda", "0.5708"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert list(rows[0]) == cli.COLUMNS["solve"]
    assert len(rows) == 2
    for r in rows:
        assert float(r["residual"]) < 1e-10 and int(r["iters"]) >= 1 and r["status"].startswith("ok")


def test_gordon_method_matches_replica(tmp_path):
    base = ["solve", "--loss", "hinge", "--alpha", "1.5", "--lambda", "0.2"]
    _, a = _run(base, tmp_path, "a.csv")
    _, b = _run(base + ["--method", "gordon"], tmp_path, "b.csv")
    ra, rb = _rows(a)[0], _rows(b)[0]
    assert abs(float(ra["m"]) - float(rb["m"])) < 1e-6
    assert abs(float(ra["q"]) - float(rb["q"])) < 1e-6


def test_lambda_opt_square(tmp_path):
    code, out = _run(["lambda-opt", "--loss", "square", "--alpha", "1,5,20"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert [float(r["alpha"]) for r in rows] == [1.0, 5.0, 20.0]
    for r in rows:
        assert abs(float(r["lambda_opt"]) - 0.5708) < 1e-3


def test_sweep_and_bayes(tmp_path):
    code, out = _run(["sweep", "--loss", "logistic", "--alpha", "0.5:2:4", "--lambda", "0.1,1"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 8
    code, out = _run(["bayes", "--alpha", "1,2"], tmp_path, "bayes.csv")
    rows = _rows(out)
    assert float(rows[1]["e_g"]) < float(rows[0]["e_g"]) < 0.5


def test_json_mirrors_csv(tmp_path):
    args = ["bayes", "--alpha", "0.5,3"]
    _, c = _run(args, tmp_path, "b.csv")
    _, j = _run(args + ["--format", "json"], tmp_path, "b.json")
    doc = json.loads(j.read_text())
    assert doc["columns"] == cli.COLUMNS["bayes"]
    csv_rows = _rows(c)
    for row, ref in zip(doc["rows"], csv_rows):
        assert list(row) == doc["columns"]
        for key, val in row.items():
            if isinstance(val, float):
                assert val == float(ref[key])
            else:
                assert str(val) == ref[key]


def test_rerun_is_byte_identical(tmp_path):
    args = ["simulate", "--loss", "logistic", "--lambda", "0.1", "--alpha", "0.5,1", "--d", "100", "--seeds", "3"]
    _, a = _run(args, tmp_path, "a.csv")
    _, b = _run(args, tmp_path, "b.csv")
    _, c = _run(args + ["--threads", "2"], tmp_path, "c.csv")
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    rows = _rows(a)
    assert [(r["alpha"], r["seed"]) for r in rows] == [
        (a_, s) for a_ in ("0.5", "1.0") for s in ("0", "1", "2")]


def test_solver_failure_marks_row_and_continues(tmp_path):
    code, out = _run(["compare", "--loss", "square", "--lambda", "0", "--alpha", "0.5,1,2", "--d", "60",
                      "--seeds", "2"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 3
    assert rows[1]["status"].startswith("error")
    assert rows[0]["status"].startswith("ok") and rows[2]["status"].startswith("ok")


def test_gamp_command(tmp_path):
    code, out = _run(["gamp", "--alpha", "2", "--d", "400", "--seeds", "1"], tmp_path)
    assert code == 0
    row = _rows(out)[0]
    assert row["mode"] == "bayes" and row["status"].startswith("ok")
    assert float(row["mean_v"]) > 0


def test_optimal_loss_export(tmp_path):
    prefix = tmp_path / "curves"
    code, out = _run(["optimal-loss", "--alpha", "2", "--z-range=-1:1:5", "--w-range=-1:1:3",
                      "--export-prefix", str(prefix)], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert {r["curve"] for r in rows} == {"loss", "reg"}
    exported = sorted(p.name for p in tmp_path.iterdir() if p.name.startswith("curves"))
    assert len(exported) == 2
    loss = np.loadtxt(next(p for p in tmp_path.iterdir() if "loss" in p.name and p.name.startswith("curves")))
    assert loss.shape == (5, 2)


@pytest.mark.slow
def test_compare_logistic_example(tmp_path):
    code, out = _run(["compare", "--loss", "logistic", "--lambda", "0.1", "--alpha", "0.5:4:8", "--d", "1000",
                      "--seeds", "20"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert len(rows) == 8
    worst = max(float(r["abs_diff"]) for r in rows)
    assert worst < 0.01
    assert all(int(r["n_seeds"]) == 20 for r in rows)


def test_nan_becomes_null_in_json():
    text = cli.format_rows([{"alpha": 1.0, "residual": math.nan, "iters": 0, "status": "error: x"}],
                           ["alpha", "residual", "iters", "status"], "json")
    assert json.loads(text)["rows"][0]["residual"] is None
