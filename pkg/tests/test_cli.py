import csv
import json
import subprocess
import sys

import pytest

from msqframe import cli, harness


def test_frame_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / "frame.csv"
    rc = cli.main(["frame", "--trials", "3", "--lambdas", "1,4", "--deltas", "0.1",
                   "--seed", "7", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 2 and rows[0]["experiment"] == "frame"
    side = json.loads((tmp_path / "frame.json").read_text())
    assert side["master_seed"] == 7 and side["config"]["trials"] == 3


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("trials = 2\nlambdas = 2, 3\ndeltas = 0.5\nk = 4\n")
    out = tmp_path / "o.csv"
    assert cli.main(["constant-term", "--config", str(cfgfile), "--trials", "4", "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["trials"] for r in rows] == ["4", "4"]
    assert [r["k"] for r in rows] == ["4", "4"]


def test_stdout_when_no_out(capsys):
    assert cli.main(["fourier", "--ambient-n", "64", "--k", "4", "--lambdas", "2", "--trials", "2"]) == 0
    assert capsys.readouterr().out.startswith(",".join(harness.CSV_HEADER))


@pytest.mark.parametrize("argv", [
    ["frame", "--deltas", "-1"],
    ["frame", "--trials", "0"],
    ["cs", "--ensemble", "dft"],
    ["frame", "--config", "/nonexistent/file.cfg"],
    ["mu", "--lambdas", "abc"],
])
def test_config_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2
    assert "config error" in capsys.readouterr().err


def test_solver_budget_exit_3(monkeypatch, tmp_path):
    from msqframe import cs

    def boom(*a, **k):
        raise cs.BpdnConvergenceError("forced")

    monkeypatch.setattr(harness, "two_stage", boom)
    out = tmp_path / "cs.csv"
    argv = ["cs", "--ambient-n", "60", "--k", "3", "--lambdas", "10", "--deltas", "0.01",
            "--trials", "2", "--out", str(out)]
    assert cli.main(argv) == 3
    assert out.exists()
    assert cli.main(argv + ["--failure-budget", "1"]) == 0


def test_thread_env(monkeypatch, tmp_path):
    out = tmp_path / "t.csv"
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    assert cli.main(["frame", "--trials", "2", "--lambdas", "1", "--out", str(out)]) == 0
    assert json.loads((tmp_path / "t.json").read_text())["config"]["threads"] == 3
    assert cli.main(["frame", "--trials", "2", "--lambdas", "1", "--threads", "1", "--out", str(out)]) == 0
    assert json.loads((tmp_path / "t.json").read_text())["config"]["threads"] == 1
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    assert cli.main(["frame"]) == 2


def test_full_scale_flag(tmp_path):
    args = cli.build_parser().parse_args(["frame", "--full-scale"])
    assert cli._overrides(args)["trials"] == 1000


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "msqframe.cli", "mu", "--trials", "1000"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0].startswith("experiment,ensemble,k,delta")
