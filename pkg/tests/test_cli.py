import json
import subprocess
import sys

import pytest
import yaml

import rescon.protocol as protocol
from conftest import small_raw
from rescon.cli import EXIT_IO, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VALIDATION, main
from rescon.geometry import KernelEmptyError


@pytest.fixture
def small_file(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(yaml.safe_dump(small_raw(n=7, horizon=20, adversaries=(7,))))
    return p


def test_validate_bundled(tmp_path, capsys):
    assert main(["validate", "table1_consensus", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "validation.json").read_text())
    assert all(r["passed"] for r in rep["report"] if r["enforced"])


def test_validate_rejects_alpha(tmp_path):
    assert main(["validate", "table1_consensus", "--set", "alpha=0.95", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_unknown_override_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "table1_consensus", "--set", "graph=1", "--out", str(tmp_path)])
    assert exc.value.code == EXIT_USAGE


def test_run_writes_trace_and_summary(tmp_path, small_file):
    assert main(["run", str(small_file), "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 20 * 7
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["horizon"] == 20 and summary["validity"] is True
    assert {r["id"] for r in summary["validation"]} >= {"A1", "A2", "A3"}


def test_out_from_environment(tmp_path, small_file, monkeypatch):
    monkeypatch.setenv("RESCON_OUT", str(tmp_path / "env"))
    assert main(["compare", str(small_file)]) == EXIT_OK
    out = tmp_path / "env"
    assert (out / "trace_hold-last.csv").exists() and (out / "trace_zero-substitute.csv").exists()
    cmp = json.loads((out / "comparison.json").read_text())
    assert cmp["identical_traces"] is True


def test_runtime_failure_exit_code(tmp_path, small_file, monkeypatch):
    def empty(*a, **k):
        raise KernelEmptyError("forced")

    monkeypatch.setattr(protocol, "safe_kernel_point", empty)
    assert main(["run", str(small_file), "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_io_failure_exit_code(tmp_path, small_file):
    assert main(["run", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(small_file), "--out", str(blocker / "sub")]) == EXIT_IO


def test_parse_error_exit_code(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("d: [1,\n")
    assert main(["validate", str(p), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_check_robustness(tmp_path):
    assert main(["check-robustness", "table1_consensus", "--r", "5", "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "robustness.json").read_text())["holds"] is True
    argv = ["check-robustness", "table1_consensus", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    cert = json.loads((tmp_path / "robustness.json").read_text())
    assert cert["r"] == 7 and cert["holds"] is False and cert["witness"]
    argv = ["check-robustness", "table1_consensus", "--r", "2", "--s", "3", "--out", str(tmp_path),
            "--drop-edge", "1 <- 9"]
    assert main(argv) == EXIT_OK


def test_check_sarymsakov_identity(tmp_path):
    m = tmp_path / "I.yaml"
    m.write_text("[[1, 0], [0, 1]]\n")
    assert main(["check-sarymsakov", str(m), "--out", str(tmp_path)]) == EXIT_OK
    cert = json.loads((tmp_path / "sarymsakov.json").read_text())
    assert cert["holds"] is False and sorted(map(tuple, cert["witness"])) == [(1,), (2,)]
    w = tmp_path / "rows.txt"
    w.write_text("0.5 0.5\n0.5 0.5\n")
    assert main(["check-sarymsakov", str(w), "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "sarymsakov.json").read_text())["holds"] is True
    bad = tmp_path / "bad.txt"
    bad.write_text("0.5 0.4\n0 1\n")
    assert main(["check-sarymsakov", str(bad), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_check_redundancy(tmp_path):
    argv = ["check-redundancy", "table1_optimization", "--resolution", "0.05", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    assert json.loads((tmp_path / "redundancy.json").read_text())["holds"] is True


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rescon", "check-robustness", "table1_consensus", "--r", "5",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and "5-robust: holds" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "rescon"], capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
