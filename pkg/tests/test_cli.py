import json
import os
import subprocess
import sys

import pytest

from cablefield.cli import main

VERIFY_CFG = """\
[verify]
fixtures = p2k grid3x3
random = 8
"""

RUN_CFG = """\
[graph]
kind = p2k

[experiment]
kind = two-point
samples = 4000
base = a
"""


@pytest.fixture
def cfgs(tmp_path):
    v = tmp_path / "verify.cfg"
    v.write_text(VERIFY_CFG)
    r = tmp_path / "run.cfg"
    r.write_text(RUN_CFG)
    return {"verify": str(v), "run": str(r), "dir": tmp_path}


def test_verify_passes(cfgs, capsys):
    out = str(cfgs["dir"] / "vout")
    assert main(["verify", "--config", cfgs["verify"], "--seed", "7",
                 "--out", out]) == 0
    text = capsys.readouterr().out
    assert "max residual" in text
    report = json.loads(open(os.path.join(out, "verify.json")).read())
    assert all(v < 1e-9 for v in report["worst_residuals"].values())


def test_verify_requires_seed_for_random(cfgs):
    assert main(["verify", "--config", cfgs["verify"]]) == 2


def test_run_and_report_roundtrip(cfgs, capsys):
    out = str(cfgs["dir"] / "r1")
    assert main(["run", "--config", cfgs["run"], "--seed", "42",
                 "--out", out]) == 0
    capsys.readouterr()
    manifest = json.loads(open(os.path.join(out, "manifest.json")).read())
    assert manifest["experiment"] == "two-point"
    assert manifest["seed"] == 42
    assert set(manifest["artifacts"]) == {"two-point.csv", "two-point.json"}
    assert main(["report", "--out", out]) == 0
    text = capsys.readouterr().out
    assert "two-point" in text
    assert os.path.exists(os.path.join(out, "two-point.dat"))


def test_run_byte_identical_across_threads(cfgs):
    outs = []
    for threads in (1, 4, 8):
        out = str(cfgs["dir"] / f"t{threads}")
        assert main(["run", "--config", cfgs["run"], "--seed", "9",
                     "--threads", str(threads), "--out", out]) == 0
        outs.append(open(os.path.join(out, "two-point.csv"), "rb").read())
    assert outs[0] == outs[1] == outs[2]
    manifests = [json.loads(open(str(cfgs["dir"] / f"t{t}" /
                                     "manifest.json")).read())
                 for t in (1, 4, 8)]
    assert len({m["payload_sha256"] for m in manifests}) == 1


def test_run_requires_seed(cfgs):
    assert main(["run", "--config", cfgs["run"]]) == 2


def test_seed_range_checked(cfgs):
    assert main(["run", "--config", cfgs["run"], "--seed",
                 str(2**64)]) == 2
    assert main(["run", "--config", cfgs["run"], "--seed", "banana"]) == 2


def test_unknown_experiment(cfgs):
    assert main(["run", "--config", cfgs["run"], "--seed", "1",
                 "--experiment", "frobnicate"]) == 2


def test_report_missing_manifest(tmp_path):
    assert main(["report", "--out", str(tmp_path / "nope")]) == 2


def test_report_malformed_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{not json")
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_bad_graph_file_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.graph"
    bad.write_text("vertices 2\nedge 0 1 -3.5\nkill 0 1\n")
    cfg = tmp_path / "v.cfg"
    cfg.write_text(f"[verify]\nfixtures = {bad}\n")
    assert main(["verify", "--config", cfg.as_posix()]) == 2
    err = capsys.readouterr().err
    assert "bad.graph:2" in err


def test_console_entrypoint_runs():
    proc = subprocess.run([sys.executable, "-m", "cablefield"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stdout + proc.stderr
