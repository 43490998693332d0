import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from secvault.cli import EXIT_IO, EXIT_OK, EXIT_UNRECOVERABLE, EXIT_USAGE, main, pack_bytes, parse_grid
from secvault.codec import CodeParams
from secvault.sim import synthesize_versions


@pytest.fixture
def root(tmp_path, monkeypatch):
    monkeypatch.setenv("SECVAULT_ROOT", str(tmp_path / "archives"))
    return tmp_path


def write(path, data):
    path.write_bytes(data)
    return str(path)


def read_csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_encode_single_input(root, capsys):
    a = write(root / "a", b"hello world")
    assert main(["encode", "--id", "one", a]) == EXIT_OK
    out = capsys.readouterr().out
    assert "pattern: {x1}" in out
    assert (root / "archives" / "one" / "manifest").is_file()


def test_encode_identical_inputs_reports_zero(root, capsys):
    a = write(root / "a", b"same bytes")
    assert main(["encode", "--id", "twin", a, a]) == EXIT_OK
    assert "record 2: stores z2 gamma=0 as delta" in capsys.readouterr().out


def test_encode_optimized_pattern(root, capsys):
    P = CodeParams.cauchy(20, 10)
    files = []
    for j, x in enumerate(synthesize_versions(P, (3, 8, 3, 6), seed=0)):
        files.append(write(root / f"v{j}", bytes(x.astype(np.uint8))))
    assert main(["encode", "--id", "l5", "--n", "20", "--k", "10", "--mode", "optimized"] + files) == EXIT_OK
    assert "pattern: {x1, z2, x3, z4, x5}" in capsys.readouterr().out


def test_encode_errors(root, capsys):
    a = write(root / "a", b"abc")
    b = write(root / "b", b"abcd")
    assert main(["encode", "--id", "x", a, b]) == EXIT_USAGE
    assert "same length" in capsys.readouterr().err
    assert main(["encode", "--id", "x", "--width", "4", a]) == EXIT_USAGE
    assert main(["encode", "--id", "x", "--n", "3", "--k", "3", a]) == EXIT_USAGE
    assert main(["encode", "--id", "x", str(root / "missing")]) == EXIT_IO
    assert main(["encode", "--id", "dup", a]) == EXIT_OK
    assert main(["encode", "--id", "dup", a]) == EXIT_IO
    with pytest.raises(SystemExit) as e:
        main(["encode", "--id", "x", "--mode", "sideways", a])
    assert e.value.code == EXIT_USAGE


def test_retrieve_two_version_example(root, capsys):
    a = write(root / "a", b"ABCDEF")
    b = write(root / "b", b"ABCDEz")
    for sys_flag in ([], ["--systematic"]):
        name = "s" if sys_flag else "n"
        assert main(["encode", "--id", name, a, b] + sys_flag) == EXIT_OK
        capsys.readouterr()
        out = root / f"out-{name}"
        assert main(["retrieve", "--id", name, "--version", "2", "--out", str(out)]) == EXIT_OK
        assert out.read_bytes() == b"ABCDEz"
        assert "total reads 5" in capsys.readouterr().out


def test_retrieve_first_version_and_failures(root, capsys):
    a = write(root / "a", b"0123456789")
    b = write(root / "b", b"0123456780")
    main(["encode", "--id", "r", a, b])
    capsys.readouterr()
    assert main(["retrieve", "--id", "r", "--version", "1"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out == "0123456789"
    assert "total reads 3" in captured.err
    assert main(["retrieve", "--id", "r", "--version", "2", "--failed", "0,1,2,3"]) == EXIT_UNRECOVERABLE
    assert "record 1" in capsys.readouterr().err
    assert main(["retrieve", "--id", "r", "--version", "9"]) == EXIT_USAGE
    assert main(["retrieve", "--id", "r", "--version", "1", "--failed", "x"]) == EXIT_USAGE
    assert main(["retrieve", "--id", "nope", "--version", "1"]) == EXIT_IO


def test_resilience_csv(root, capsys):
    assert main(["resilience", "--p-grid", "0,0.1"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    census = {(r["variant"], r["metric"]): r["value"] for r in rows if r["p"] == ""}
    assert census[("nonsys", "census_recoverable_mds")] == "41"
    assert census[("nonsys", "census_total_handled")] == "56"
    assert census[("sys", "census_total_handled")] == "44"
    assert all(float(r["value"]) == 0 for r in rows if r["p"] == "0.0" and r["metric"].startswith("loss"))
    colo = {r["value"] for r in rows if r["p"] == "0.1" and r["placement"] == "colocated" and r["metric"] == "retention"}
    assert len(colo) == 1


def test_simulate_mu(root, capsys):
    args = ["simulate", "--mu", "--p-grid", "0.05,0.15", "--trials", "20000", "--seed", "9"]
    assert main(args) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("# seed=9")
    rows = read_csv(text)
    assert {r["value"] for r in rows if r["metric"] == "mu_nonsys"} == {"2.0"}
    assert {r["value"] for r in rows if r["metric"] == "mu_nondiff"} == {"3.0"}
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out == text
    assert main(["simulate", "--mu", "--gamma", "2"]) == EXIT_USAGE


def test_simulate_scenario_and_expected_io(root, capsys):
    out = root / "l5.csv"
    assert main(["simulate", "--scenario-l5", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out.read_text())
    last = {r["metric"]: r["value"] for r in rows if r["sweep_value"] == "5"}
    assert last["nonsys_basic_eta_cumulative"] == "42"
    assert last["nondiff_eta_cumulative"] == "50"
    assert [r["value"] for r in rows if r["metric"] == "saving_pct_l5"] == ["16.0"]
    assert main(["simulate", "--expected-io", "--pmf", "poisson:4"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    red = [float(r["value"]) for r in rows if r["metric"] == "reduction_pct_pair"]
    assert red == [pytest.approx(2.94, abs=0.01)]
    assert main(["simulate", "--expected-io", "--pmf", "gauss:1"]) == EXIT_USAGE


def test_config_precedence(root, capsys):
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"n": 8, "k": 4, "p_grid": "0.1"}))
    assert main(["resilience", "--config", str(cfg)]) == EXIT_OK
    assert "n=8 k=4" in capsys.readouterr().out
    assert main(["resilience", "--config", str(cfg), "--n", "6", "--k", "3"]) == EXIT_OK
    assert "n=6 k=3" in capsys.readouterr().out
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["resilience", "--config", str(cfg)]) == EXIT_USAGE


def test_helpers():
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]
    assert parse_grid("0.5,0.25") == [0.5, 0.25]
    blocks = pack_bytes([b"abcde"], 3)
    assert blocks[0].shape == (3, 2)
    assert blocks[0].ravel().tolist() == [97, 98, 99, 100, 101, 0]


def test_module_entry_point(root):
    proc = subprocess.run([sys.executable, "-m", "secvault", "simulate", "--scenario-l5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "scenario_l5" in proc.stdout
