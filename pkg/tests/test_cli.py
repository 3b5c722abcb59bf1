import json
import subprocess
import sys

import numpy as np
import pytest
import scipy.io

from oddpairing import cli
from oddpairing.errors import GapClosed
from oddpairing.toeplitz import IndexReport


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_localize_shift_matches(capsys):
    code, out, _ = run(capsys, "localize", "--model", "shift", "--m", "1", "--kappa", "1/12", "--rho", "25")
    assert code == cli.EXIT_OK
    assert "half-signature -1" in out
    assert "match" in out


def test_localize_identity_zero(capsys):
    code, out, _ = run(capsys, "localize", "--model", "identity", "--kappa", "1/12", "--rho", "10", "--oracle", "none")
    assert code == 0
    assert "half-signature 0" in out


def test_localize_mismatch_exit_2(capsys, monkeypatch):
    monkeypatch.setattr(cli, "_oracle", lambda model, kind: IndexReport("fake", 5))
    code, out, _ = run(capsys, "localize", "--model", "shift", "--m", "1", "--kappa", "1/12", "--rho", "10")
    assert code == cli.EXIT_MISMATCH
    assert "MISMATCH" in out


def test_localize_gap_closed_exit_3(capsys, monkeypatch):
    def closed(*a, **k):
        raise GapClosed("zero eigenvalue")

    monkeypatch.setattr(cli, "localize", closed)
    code, _, err = run(capsys, "localize", "--model", "shift", "--m", "1", "--kappa", "1/12", "--rho", "10",
                       "--oracle", "none")
    assert code == cli.EXIT_GAP
    assert "GapClosed" in err


def test_kappa_zero_warns_not_index(capsys):
    code, out, err = run(capsys, "localize", "--model", "shift", "--m", "1", "--kappa", "0", "--rho", "8")
    assert code == 0
    assert "not an index" in out
    assert "NotAnIndex" in err


def test_unknown_model_exit_1(capsys):
    code, _, err = run(capsys, "localize", "--model", "nope", "--kappa", "0.1", "--rho", "5")
    assert code == cli.EXIT_ERROR
    assert "error" in err


def test_usage_error_exit_64(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["localize", "--mode", "sphere"])
    assert exc.value.code == cli.EXIT_USAGE


def test_fraction_parsing():
    assert cli.eval_fraction("1/12") == pytest.approx(1 / 12)
    assert cli._floats("1/12,0.5") == pytest.approx([1 / 12, 0.5])


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nmodel = shift\nm = 2\nkappa = 1/12\nrho = 12\noracle = none\n")
    code, out, _ = run(capsys, "localize", "--config", str(cfg))
    assert code == 0 and "half-signature -2" in out
    code, out, _ = run(capsys, "localize", "--config", str(cfg), "--m", "-1")
    assert code == 0 and "half-signature 1" in out


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["localize", "--config", str(cfg)])
    assert exc.value.code == cli.EXIT_USAGE


def test_manifest_contents(tmp_path, capsys):
    path = tmp_path / "m.json"
    code, _, _ = run(capsys, "localize", "--model", "shift", "--m", "1", "--kappa", "1/12", "--rho", "10",
                     "--oracle", "symbol", "--manifest", str(path))
    assert code == 0
    man = json.loads(path.read_text())
    assert man["command"] == "localize"
    assert {"numpy", "scipy", "oddpairing"} <= set(man["versions"])
    assert man["result"]["row"]["half_signature"] == -1
    assert man["oracle"]["value"] == -1


def test_sweep_csv_deterministic(tmp_path, capsys):
    args = ["sweep", "--model", "shift", "--m", "1", "--kappas", "1/12,1/24", "--rhos", "10,12",
            "--oracle", "symbol"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--csv", str(a)]) == 0
    assert cli.main(args + ["--csv", str(b), "--workers", "2"]) == 0
    capsys.readouterr()
    assert a.read_text() == b.read_text()
    assert len(a.read_text().splitlines()) == 1 + 4


def test_sweep_warns_without_certified_rows(capsys):
    code, out, err = run(capsys, "sweep", "--model", "shift", "--m", "1", "--kappas", "1/12", "--rhos", "10",
                         "--oracle", "none")
    assert code == 0
    assert "no certified" in err
    assert out.splitlines()[0].split(",") == list(cli.CSV_COLUMNS)


def test_verify_proofchain_and_failure(capsys):
    code, out, _ = run(capsys, "verify", "proofchain", "--model", "shift", "--m", "1")
    assert code == 0
    assert all(line.split()[1] == "PASS" for line in out.splitlines())
    code, out, _ = run(capsys, "verify", "axioms", "--instances", "3")
    assert code == 0 and out.count("PASS") == 6


def test_verify_failing_suite_exit_2(capsys, monkeypatch):
    from oddpairing.checks import Check
    monkeypatch.setitem(cli.SUITES, "axioms", lambda **kw: [Check("broken", False)])
    code, out, _ = run(capsys, "verify", "axioms")
    assert code == cli.EXIT_MISMATCH
    assert "FAIL broken" in out


def test_models_lists_gallery(capsys):
    code, out, _ = run(capsys, "models")
    assert code == 0
    for name in cli.GALLERY:
        assert name in out


def test_export_roundtrip(tmp_path, capsys):
    code, _, _ = run(capsys, "export", "--model", "shift", "--m", "1", "--kappa", "1/12", "--rho", "6",
                     "--out", str(tmp_path))
    assert code == 0
    L = scipy.io.mmread(tmp_path / "L.mtx").toarray()
    np.testing.assert_allclose(L, L.conj().T)
    A = scipy.io.mmread(tmp_path / "A.mtx")
    D = scipy.io.mmread(tmp_path / "D.mtx")
    assert A.shape == D.shape
    comment = (tmp_path / "L.mtx").read_text().splitlines()[1]
    meta = json.loads(comment.split("oddpairing ", 1)[1])
    assert meta["rho"] == 6 and L.shape[0] == 2 * len(meta["rows"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "oddpairing", "models"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "shift" in proc.stdout
