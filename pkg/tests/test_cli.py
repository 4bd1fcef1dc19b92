import json
import math
import subprocess
import sys

import numpy as np
import pytest

from taulattice import PfaffLax, goe_lax_init
from taulattice.cli import main


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_tau_unitary_value(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "tau",
                     "--ensemble", "unitary", "--n", "2")
    assert rc == 0
    lines = out.strip().split("\n")
    assert len(lines) == 1
    summary = json.loads(lines[0])
    assert abs(summary["tau"] - 2.0 * math.pi) < 1e-10
    on_disk = json.loads((tmp_path / "tau.json").read_text())
    assert on_disk["tau"] == summary["tau"]


def test_tau_orthogonal_value(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "tau",
                     "--ensemble", "orthogonal", "--n", "4")
    assert rc == 0
    assert abs(json.loads(out)["tau"] - math.pi / 2.0) < 1e-10


def test_tau_couplings_flag(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "tau",
                     "--ensemble", "unitary", "--n", "1",
                     "--couplings", '{"t": {"2": -0.05}}')
    assert rc == 0
    assert abs(json.loads(out)["tau"] - math.sqrt(2.0 * math.pi / 1.1)) < 1e-10


def test_tau_odd_orthogonal_is_usage_error(tmp_path, capsys):
    rc, _, err = run(capsys, "--out", str(tmp_path), "tau",
                     "--ensemble", "orthogonal", "--n", "3")
    assert rc == 2
    assert json.loads(err)["error"] == "config"


def test_tau_non_integrable_coupling_fails(tmp_path, capsys):
    rc, _, err = run(capsys, "--out", str(tmp_path), "tau",
                     "--ensemble", "unitary", "--n", "2",
                     "--couplings", '{"t": {"4": 0.1}}')
    assert rc == 1
    assert json.loads(err)["error"] == "NonIntegrableWeight"


def test_usage_errors_exit_2(tmp_path, capsys):
    rc, _, _ = run(capsys, "tau", "--n", "2")                  # missing flag
    assert rc == 2
    rc, _, err = run(capsys, "--out", str(tmp_path), "tau", "--ensemble",
                     "unitary", "--n", "2", "--couplings", "{bad json")
    assert rc == 2
    assert json.loads(err)["error"] == "config"


def test_lax_init_gue_csv(tmp_path, capsys):
    rc, _, _ = run(capsys, "--out", str(tmp_path), "lax-init",
                   "--ensemble", "gue", "--N", "5")
    assert rc == 0
    lines = (tmp_path / "lax_init.csv").read_text().strip().split("\n")
    assert lines[0] == "n,a,b"
    assert len(lines) == 6
    row3 = lines[3].split(",")
    assert float(row3[1]) == 0.0
    assert abs(float(row3[2]) - math.sqrt(3.0)) < 1e-15
    assert float(lines[5].split(",")[2]) == 0.0


def test_lax_init_goe_round_trip(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "lax-init",
                     "--N", "6", "--K-pos", "4", "--K-neg", "4")
    assert rc == 0
    path = json.loads(out)["artifact"]
    back = PfaffLax.from_json(open(path).read())
    assert np.allclose(back.w, goe_lax_init(6, 4, 4).w, rtol=0, atol=0)


def test_evolve_volterra(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "evolve", "volterra",
                     "--t2", "0.1", "--N", "16")
    assert rc == 0
    lines = (tmp_path / "evolve_volterra.csv").read_text().strip().split("\n")
    assert lines[0].startswith("time,B[1],B[2]")
    final = [float(v) for v in lines[-1].split(",")]
    assert abs(final[0] - 0.1) < 1e-15
    assert abs(final[4] - 4.0 / 0.8) < 1e-8          # B_4(t) = 4/(1-2t)


def test_evolve_needs_one_time_flag(tmp_path, capsys):
    rc, _, _ = run(capsys, "--out", str(tmp_path), "evolve", "volterra")
    assert rc == 2
    rc, _, _ = run(capsys, "--out", str(tmp_path), "evolve", "volterra",
                   "--t2", "0.1", "--t4", "0.1")
    assert rc == 2


def test_evolve_reduced(tmp_path, capsys):
    rc, _, _ = run(capsys, "--out", str(tmp_path), "evolve", "reduced",
                   "--t2", "0.2")
    assert rc == 0
    lines = (tmp_path / "evolve_reduced.csv").read_text().strip().split("\n")
    head = lines[0].split(",")
    assert head[:2] == ["time", "W[-1]"]
    final = [float(v) for v in lines[-1].split(",")]
    assert abs(final[1] - 0.5 / 0.6) < 1e-8


def test_verify_pass_and_artifact(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "verify", "init-gue")
    assert rc == 0
    summary = json.loads(out)
    assert summary["pass"] is True
    report = json.loads((tmp_path / "verify_init-gue.json").read_text())
    assert report["pass"] is True
    assert report["residual_rel"] < 1e-9


def test_verify_tight_tolerance_fails(tmp_path, capsys):
    rc, out, _ = run(capsys, "--out", str(tmp_path), "verify", "init-gue",
                     "--tolerance", "1e-30")
    assert rc == 1
    assert json.loads(out)["pass"] is False


def test_scan_determinism(tmp_path, capsys):
    args = ("scan-haantjes", "--window", "10", "--points", "3", "--seed", "5")
    rc1, out1, _ = run(capsys, "--out", str(tmp_path / "a"), *args)
    rc2, out2, _ = run(capsys, "--out", str(tmp_path / "b"), *args)
    assert rc1 == rc2 == 0
    strip = lambda s: s.replace(str(tmp_path / "a"), "").replace(str(tmp_path / "b"), "")
    assert strip(out1) == strip(out2)
    assert ((tmp_path / "a" / "scan_haantjes.json").read_bytes()
            == (tmp_path / "b" / "scan_haantjes.json").read_bytes())


def test_outdir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TAULATTICE_OUT", str(tmp_path / "envdir"))
    rc, _, _ = run(capsys, "tau", "--ensemble", "unitary", "--n", "1")
    assert rc == 0
    assert (tmp_path / "envdir" / "tau.json").exists()


def test_config_file_merge(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ensemble": "gue", "N": 6,
                               "out": str(tmp_path / "cfgout")}))
    rc, _, _ = run(capsys, "--config", str(cfg), "lax-init")
    assert rc == 0
    lines = (tmp_path / "cfgout" / "lax_init.csv").read_text().strip().split("\n")
    assert len(lines) == 7                            # N from config
    rc, _, _ = run(capsys, "--config", str(cfg), "lax-init", "--N", "4")
    assert rc == 0
    lines = (tmp_path / "cfgout" / "lax_init.csv").read_text().strip().split("\n")
    assert len(lines) == 5                            # flag wins


def test_config_missing_file(tmp_path, capsys):
    rc, _, err = run(capsys, "--config", str(tmp_path / "nope.json"),
                     "tau", "--ensemble", "unitary", "--n", "1")
    assert rc == 2
    assert json.loads(err)["error"] == "config"


def test_continuum_hopf_csv(tmp_path, capsys):
    rc, _, _ = run(capsys, "--out", str(tmp_path), "continuum", "hopf",
                   "--t2", "0.1", "--n-x", "11")
    assert rc == 0
    lines = (tmp_path / "continuum_hopf.csv").read_text().strip().split("\n")
    assert lines[0] == "x,u"
    x0, u0 = (float(v) for v in lines[1].split(","))
    assert abs(u0 - x0 / 0.8) < 1e-12


def test_console_script(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "taulattice.cli", "--out", str(tmp_path),
         "tau", "--ensemble", "orthogonal", "--n", "2"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert abs(json.loads(proc.stdout)["tau"] - math.sqrt(math.pi)) < 1e-10
