import json
import shutil
import subprocess
import xml.etree.ElementTree as ET

import pytest

from contrarian import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bifurcate_reports_k_star(capsys):
    code, out, _ = run(["bifurcate", "--set", "gain.slope=-2", "--set", "gain.intercept=3", "--set", "delay.n=2"], capsys)
    assert code == 0
    assert "k* = 1.125" in out and "CH1 ok" in out


def test_bifurcate_json_format(capsys):
    code, out, _ = run(["bifurcate", "--set", "delay.n=3", "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert [r["j"] for r in rows] == list(range(1, 9))


def test_invalid_n_agents_names_field(capsys):
    code, _, err = run(["simulate", "--set", "n_agents=0"], capsys)
    assert code == 1 and "n_agents" in err


def test_unknown_run_key_rejected(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_agents": 10, "gain": {"kind": "linear", "slope": 0.0, "intercept": 1.0},
                               "run": {"command": "simulate", "colour": 1}}))
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 1 and "run.colour" in err


def test_nonempty_out_needs_force(capsys, tmp_path):
    (tmp_path / "x").write_text("")
    args = ["simulate", "--set", "n_agents=20", "--set", "horizon=1", "--seed", "1", "--out", str(tmp_path)]
    assert run(args, capsys)[0] == 1
    assert run(args + ["--force"], capsys)[0] == 0


def test_error_exit_codes(capsys):
    # a cooperative gain has no Hopf point at x*
    code, _, err = run(["bifurcate", "--set", "gain.slope=2", "--set", "gain.intercept=1", "--set", "delay.n=2"], capsys)
    assert code == 1 and "gain" in err
    # too short a path to measure a cycle on
    code, _, err = run(["sweep", "--set", "delay.n=2", "--set", "horizon=1", "--values", "1.0"], capsys)
    assert code == 2 and "runtime error" in err


def test_run_json_roundtrip_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["simulate", "--set", "n_agents=50", "--set", "delay.n=1", "--set", "horizon=5", "--m0", "0.3"]
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    record = json.loads((a / "run.json").read_text())
    assert isinstance(record["seed"], int)
    assert record["run"]["command"] == "simulate" and record["run"]["m0"] == 0.3
    assert run(["simulate", "--config", str(a / "run.json"), "--out", str(b)], capsys)[0] == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert json.loads((b / "run.json").read_text())["meta"]["config_hash"] == record["meta"]["config_hash"]


def test_plots_are_valid_svg(capsys, tmp_path):
    args = ["sweep", "--set", "delay.n=2", "--set", "horizon=200", "--values", "0.9,1.5",
            "--out", str(tmp_path), "--plot", "--seed", "3"]
    assert run(args, capsys)[0] == 0
    for name in ("bifurcation.svg", "m_vs_t.svg"):
        root = ET.parse(tmp_path / name).getroot()
        assert root.tag.endswith("svg")
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "k,amplitude,period,oscillating"
    assert [ln.split(",")[-1] for ln in lines[1:]] == ["1", "0"]
    assert (tmp_path / "trajectory_k0.9.csv").exists()


def test_generic_sweep_and_absorption(capsys, tmp_path):
    args = ["sweep", "--set", "n_agents=10", "--set", "gain.slope=0", "--set", "gain.intercept=1",
            "--parameter", "N", "--values", "4,8", "--statistic", "absorption_time", "--replicas", "5",
            "--set", "horizon=100", "--seed", "2", "--out", str(tmp_path / "s"), "--format", "csv"]
    code, out, err = run(args, capsys)
    assert code == 0, err
    assert out.splitlines()[0].startswith("N,")
    assert (tmp_path / "s" / "sweep.json").exists()
    code, _, err = run(["absorption", "--n-list", "4,8", "--replicas", "5", "--t-max", "100", "--seed", "1",
                        "--out", str(tmp_path / "a")], capsys)
    assert code == 0, err
    assert (tmp_path / "a" / "absorption.csv").read_text().startswith("N,n,mean")


def test_meanfield_and_chaos(capsys, tmp_path):
    assert run(["meanfield", "--set", "horizon=5", "--out", str(tmp_path / "m")], capsys)[0] == 0
    assert (tmp_path / "m" / "path.csv").read_text().startswith("t,m\n")
    code, _, err = run(["chaos", "--set", "n_agents=10", "--set", "horizon=1", "--replicas", "50", "--seed", "4",
                        "--out", str(tmp_path / "c"), "--jobs", "1"], capsys)
    assert code == 0, err
    summary = json.loads((tmp_path / "c" / "chaos.json").read_text())
    assert summary["N"] == 10 and len((tmp_path / "c" / "pair_cov.csv").read_text().splitlines()) == 6


@pytest.mark.skipif(shutil.which("contrarian") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["contrarian", "bifurcate", "--set", "delay.n=2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "k* = 1.125" in proc.stdout
