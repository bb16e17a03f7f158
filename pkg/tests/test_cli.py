from pathlib import Path

import numpy as np
import pytest

from queryreg.cli import main

ADAPTIVE_CFG = """
d = 5
sigma = 1.0
R = 1.0
k = 1500
replicates = 10
seed = 99
theta_star = sphere:1.0
design = gaussian-identity
b_override = 0.05
"""

NONADAPTIVE_CFG = """
d = 4
sigma = 1.0
R = 1.0
k = 800
replicates = 40
seed = 77
theta_star = sphere:0.8
design = gaussian-identity
"""


@pytest.fixture
def adaptive_config(tmp_path):
    path = tmp_path / "adaptive.cfg"
    path.write_text(ADAPTIVE_CFG)
    return path


@pytest.fixture
def nonadaptive_config(tmp_path):
    path = tmp_path / "nonadaptive.cfg"
    path.write_text(NONADAPTIVE_CFG)
    return path


def test_simulate_adaptive_outputs(tmp_path, adaptive_config, capsys):
    out = tmp_path / "run"
    code = main(["simulate", "adaptive", "--config", str(adaptive_config),
                 "--out", str(out), "--audit"])
    assert code == 0
    traj = (out / "trajectories.csv").read_text().splitlines()
    assert traj[0] == "replicate,k,sq_error,excess_risk,regime"
    assert len(traj) > 10
    summary = (out / "trajectory_summary.csv").read_text().splitlines()
    assert summary[0] == "k,mean_sq_error,stderr,n,regime"
    audit = (out / "audit_replicate0.csv").read_text().splitlines()
    assert len(audit) == 1501
    assert (out / "trajectory_summary.png").exists()
    assert "diverged = 0" in capsys.readouterr().out


def test_simulate_adaptive_reproducible_bytes(tmp_path, adaptive_config):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    main(["simulate", "adaptive", "--config", str(adaptive_config), "--out", str(out1),
          "--no-plots"])
    main(["simulate", "adaptive", "--config", str(adaptive_config), "--out", str(out2),
          "--no-plots"])
    assert (out1 / "trajectories.csv").read_bytes() == (out2 / "trajectories.csv").read_bytes()
    assert (out1 / "trajectory_summary.csv").read_bytes() == (out2 / "trajectory_summary.csv").read_bytes()


def test_simulate_nonadaptive_outputs(tmp_path, nonadaptive_config, capsys):
    out = tmp_path / "na"
    code = main(["simulate", "nonadaptive", "--config", str(nonadaptive_config),
                 "--out", str(out)])
    assert code == 0
    rows = (out / "nonadaptive.csv").read_text().splitlines()
    assert rows[0] == "replicate,mode,sq_error,bound"
    assert len(rows) == 41
    assert (out / "nonadaptive.png").exists()
    assert "bound" in capsys.readouterr().out


def test_simulate_nonadaptive_plugin_label(tmp_path, nonadaptive_config):
    out = tmp_path / "nap"
    main(["simulate", "nonadaptive", "--config", str(nonadaptive_config),
          "--out", str(out), "--plugin", "--no-plots"])
    rows = (out / "nonadaptive.csv").read_text().splitlines()
    assert rows[1].split(",")[1] == "blocks-plugin"


def test_gap_command(tmp_path, adaptive_config, capsys):
    out = tmp_path / "gap"
    code = main(["gap", "--dims", "3,4", "--config", str(adaptive_config), "--out", str(out)])
    assert code == 0
    rows = (out / "gap_sweep.csv").read_text().splitlines()
    assert rows[0] == "d,k,strategy,mean_risk,stderr,n,regime"
    assert (out / "gap_sweep.png").exists()
    printed = capsys.readouterr().out
    assert "separation" in printed


def test_gap_reproducible_bytes(tmp_path, adaptive_config):
    out1, out2 = tmp_path / "g1", tmp_path / "g2"
    for out in (out1, out2):
        main(["gap", "--dims", "3,4", "--config", str(adaptive_config),
              "--out", str(out), "--no-plots"])
    assert (out1 / "gap_sweep.csv").read_bytes() == (out2 / "gap_sweep.csv").read_bytes()


def test_rates_command(tmp_path, capsys):
    csv_path = tmp_path / "data.csv"
    lines = ["k,mean_risk"] + [f"{x},{7.0 / x!r}" for x in (10, 100, 1000, 10000)]
    csv_path.write_text("\n".join(lines) + "\n")
    code = main(["rates", "--in", str(csv_path), "--xcol", "k", "--ycol", "mean_risk",
                 "--out", str(tmp_path)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "slope     = -1" in printed
    assert (tmp_path / "rate_fit.png").exists()


def test_rates_missing_column(tmp_path, capsys):
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("a,b\n1,2\n")
    code = main(["rates", "--in", str(csv_path), "--xcol", "k", "--ycol", "mean_risk"])
    assert code == 2


def test_verify_querydist_exit_code_and_report(tmp_path, capsys):
    code = main(["verify", "querydist", "--out", str(tmp_path)])
    assert code == 0
    report = (tmp_path / "verify_querydist.csv").read_text().splitlines()
    assert report[0] == "check_name,statistic,threshold,pass"
    assert all(line.endswith("true") for line in report[1:])
    assert "checks passed" in capsys.readouterr().out


def test_verify_report_reproducible(tmp_path):
    out1, out2 = tmp_path / "v1", tmp_path / "v2"
    for out in (out1, out2):
        assert main(["verify", "querydist", "--out", str(out)]) == 0
    assert (out1 / "verify_querydist.csv").read_bytes() == (out2 / "verify_querydist.csv").read_bytes()
