import csv
import subprocess
import sys

import pytest

from pocmt import cli
from pocmt.config import load_config, serialize
from pocmt.simulator import InvariantViolation

SMALL = ["--set", "horizon_epochs=60", "--set", "honest.count=6", "--set", "sybil_count=10"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_drift_preset_emits_traces_summary_and_figure(tmp_path):
    assert cli.main(["--preset", "drift", "--seeds", "2", "--out", str(tmp_path), *SMALL]) == 0
    trace = read_csv(tmp_path / "trace_drift_base_seed1.csv")
    assert tuple(trace[0]) == cli.TRACE_COLUMNS and len(trace) == 61
    assert {row[5] for row in trace[1:]} <= {"honest", "adversarial", ""}
    windows = read_csv(tmp_path / "windows_drift_base_seed0.csv")
    assert tuple(windows[0]) == cli.WINDOW_COLUMNS and len(windows) == 61
    summary = read_csv(tmp_path / "summary_drift.csv")
    assert tuple(summary[0]) == cli.SUMMARY_COLUMNS and summary[1][:2] == ["base", "2"]
    runs = read_csv(tmp_path / "runs_drift.csv")
    assert [r[1] for r in runs[1:]] == ["0", "1"]
    assert (tmp_path / "figures" / "drift_drift.svg").stat().st_size > 0


def test_written_config_loads_back(tmp_path):
    assert cli.main(["--preset", "drift", "--seeds", "1", "--out", str(tmp_path),
                     "--no-figures", *SMALL]) == 0
    path = tmp_path / "config_drift_base.txt"
    (cfg,) = load_config(str(path))
    assert cfg.timeline.horizon_epochs == 60 and cfg.adversary.adversary_humans == 10
    assert serialize(cfg) == path.read_text()
    assert not (tmp_path / "figures").exists()


def test_sweep_writes_one_summary_row_per_point(tmp_path):
    args = ["--preset", "capacity-sweep", "--seeds", "0,3", "--out", str(tmp_path), *SMALL]
    assert cli.main(args) == 0
    rows = read_csv(tmp_path / "summary_capacity-sweep.csv")[1:]
    assert [r[0] for r in rows] == [f"m{m}" for m in range(0, 51, 5)]
    assert (tmp_path / "trace_capacity-sweep_m50_seed3.csv").exists()
    assert (tmp_path / "figures" / "capacity-leader_capacity-sweep.svg").exists()
    assert (tmp_path / "figures" / "capacity-weight_capacity-sweep.svg").exists()


def test_preset_specific_reports(tmp_path):
    assert cli.main(["--preset", "common-prefix", "--seeds", "2", "--out", str(tmp_path),
                     *SMALL]) == 0
    reorg = read_csv(tmp_path / "reorg_common-prefix.csv")
    assert reorg[0] == ["depth", "frequency", "publications"] and len(reorg) == 7
    assert cli.main(["--preset", "fairness", "--seeds", "1", "--out", str(tmp_path),
                     *SMALL]) == 0
    assert len(read_csv(tmp_path / "fairness_fairness.csv")) == 7
    assert cli.main(["--preset", "bft-safety", "--seeds", "1", "--out", str(tmp_path),
                     "--no-figures", "--set", "horizon_epochs=60"]) == 0
    enum = read_csv(tmp_path / "bft_enumeration_bft-safety.csv")
    assert enum[1][2] == "0"


def test_reruns_and_parallel_runs_are_byte_identical(tmp_path):
    args = ["--preset", "decay-ablation", "--seeds", "2", *SMALL]
    assert cli.main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "b")]) == 0
    assert cli.main([*args, "--out", str(tmp_path / "c"), "--jobs", "2"]) == 0
    a = files(tmp_path / "a")
    assert a == files(tmp_path / "b") == files(tmp_path / "c")
    assert any(p.suffix == ".svg" for p in a)


@pytest.mark.parametrize("argv", [
    ["--preset", "drift", "--set", "slash_factor=1.5"],
    ["--preset", "drift", "--set", "no_such_key=1"],
    ["--preset", "drift", "--seeds", "x-y"],
    ["--preset", "drift", "--jobs", "0"],
    ["--config", "does-not-exist.cfg"],
])
def test_config_errors_exit_1(argv, tmp_path, capsys):
    assert cli.main([*argv, "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err


def test_invariant_failure_exits_2(tmp_path, monkeypatch, capsys):
    def broken(config):
        raise InvariantViolation("epoch 3: conservation")
    monkeypatch.setattr(cli, "run", broken)
    assert cli.main(["--preset", "drift", "--seeds", "1", "--out", str(tmp_path), *SMALL]) == 2
    assert "epoch 3" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pocmt", "--preset", "drift", "--seeds", "1",
                           "--out", str(tmp_path), "--no-figures", *SMALL],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "drift: 1 runs" in proc.stdout
