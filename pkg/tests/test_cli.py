import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nodalab import __version__
from nodalab.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_nodal_degree_one(capsys):
    code, out, _ = run(capsys, "nodal", "--ell", "1", "--seed", "7", "--replicate", "0")
    assert code == EXIT_OK
    (row,) = rows(out)
    assert float(row["length"]) == pytest.approx(2 * math.pi, abs=1e-3)
    assert (row["n_theta"], row["n_phi"]) == ("64", "128")


def test_nodal_with_epsilon(capsys):
    code, out, _ = run(capsys, "nodal", "--ell", "1", "--seed", "7", "--epsilon", "0.001")
    assert code == EXIT_OK
    contour, band = rows(out)
    assert band["epsilon"] == "0.001"
    assert float(band["length"]) == pytest.approx(2 * math.pi, rel=0.02)
    code, _, err = run(capsys, "nodal", "--ell", "1", "--epsilon", "0.001", "--level", "0.5")
    assert code == EXIT_DOMAIN and "zero level" in err


def test_cross_corr_columns(capsys):
    code, out, _ = run(capsys, "cross-corr", "--ell", "100", "--psi-min", "10", "--psi-max", "150", "--steps", "500")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "psi,j_exact,j_asym,envelope"
    data = rows(out)
    assert len(data) == 500
    assert all(math.isfinite(float(r["j_exact"])) for r in data)
    assert float(data[0]["psi"]) == 10.0 and float(data[-1]["psi"]) == 150.0


def test_cross_corr_domain(capsys):
    code, _, err = run(capsys, "cross-corr", "--ell", "10", "--psi-min", "5", "--psi-max", "100")
    assert code == EXIT_DOMAIN and "psi" in err


def test_variance_scan(capsys):
    code, out, _ = run(capsys, "variance-scan", "--ells", "64,128,256,512")
    assert code == EXIT_OK
    var = np.array([float(r["var_M"]) for r in rows(out)])
    assert np.allclose(np.diff(var), math.log(2) / 32, rtol=0.1)
    assert math.log(2) / 32 == pytest.approx(0.02166, abs=1e-5)


def test_trispectrum(capsys):
    code, out, _ = run(capsys, "trispectrum", "--ell", "6", "--seed", "3", "--replicates", "4")
    assert code == EXIT_OK
    data = rows(out)
    assert [r["replicate"] for r in data] == ["0", "1", "2", "3"]
    lam = 42
    for r in data:
        assert float(r["m"]) == pytest.approx(-0.25 * math.sqrt(lam / 2) / 24 * float(r["h4"]), rel=1e-14)


def test_sample_writes_field(capsys, tmp_path):
    out = tmp_path / "field.csv"
    code, text, _ = run(capsys, "sample", "--ell", "3", "--seed", "5", "--out", str(out))
    assert code == EXIT_OK
    assert [r["m"] for r in rows(text)] == ["-3", "-2", "-1", "0", "1", "2", "3"]
    assert out.exists()
    meta = json.loads((tmp_path / "field.csv.meta.json").read_text())
    assert meta["seed"] == 5 and meta["version"] == __version__ and meta["args"]["ell"] == 3


def test_clt_and_meta(capsys, tmp_path):
    out = tmp_path / "clt.csv"
    code, text, _ = run(capsys, "clt", "--ells", "4", "--seed", "11", "--replicates", "120", "--out", str(out))
    assert code == EXIT_OK
    assert out.read_text() == text
    (row,) = rows(text)
    assert float(row["d_wasserstein"]) >= 0 and float(row["var_M"]) > 0
    meta = json.loads((tmp_path / "clt.csv.meta.json").read_text())
    assert meta["seed"] == 11 and meta["config"]["replicates"] == 120 and meta["version"] == __version__


@pytest.mark.parametrize("argv", [
    ("nodal", "--ell", "4", "--seed", "9", "--replicate", "2"),
    ("trispectrum", "--ell", "5", "--replicates", "3"),
    ("cross-corr", "--ell", "30", "--steps", "40"),
    ("campaign", "--ells", "3", "--replicates", "5", "--seed", "1"),
])
def test_byte_reproducible(capsys, tmp_path, argv):
    outputs = []
    for k in range(2):
        out = tmp_path / f"o{k}.csv"
        assert run(capsys, *argv, "--out", str(out))[0] == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_campaign_config(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    report, samples = tmp_path / "r.csv", tmp_path / "s.csv"
    cfg.write_text(json.dumps({"ells": [3], "replicates": 6, "master_seed": 2,
                               "outputs": {"report": str(report), "samples": str(samples)}}))
    code, text, _ = run(capsys, "campaign", "--config", str(cfg))
    assert code == EXIT_OK
    assert report.read_text() == text and samples.exists()
    assert (tmp_path / "r.csv.meta.json").exists()
    cfg.write_text(json.dumps({"ells": [3], "replicates": 6, "master_seed": 2, "unknown": 1}))
    code, _, err = run(capsys, "campaign", "--config", str(cfg))
    assert code == EXIT_DOMAIN and "unknown" in err


def test_dry_run(capsys):
    code, out, _ = run(capsys, "campaign", "--ells", "20,64", "--replicates", "10", "--seed", "1", "--dry-run")
    assert code == EXIT_OK
    assert rows(out) == [{"ell": "20", "n_theta": "100", "n_phi": "200"},
                         {"ell": "64", "n_theta": "320", "n_phi": "640"}]
    code, out, _ = run(capsys, "clt", "--ells", "64", "--dry-run")
    assert rows(out) == [{"ell": "64", "n_theta": "129", "n_phi": "258"}]
    code, _, _ = run(capsys, "nodal", "--ell", "-1", "--dry-run")
    assert code == EXIT_DOMAIN


@pytest.mark.parametrize("argv, code", [
    (("nodal", "--ell", "4", "--colour", "red"), EXIT_USAGE),
    (("nodal",), EXIT_USAGE),
    (("frobnicate",), EXIT_USAGE),
    (("variance-scan", "--ells", "a,b"), EXIT_USAGE),
    (("nodal", "--ell", "4", "--grid-mult", "0.5"), EXIT_USAGE),
    (("nodal", "--ell", "4", "--seed", "-3"), EXIT_USAGE),
    (("campaign", "--ells", "4"), EXIT_USAGE),
    (("nodal", "--ell", "4", "--epsilon", "-1"), EXIT_DOMAIN),
    (("variance-scan", "--ells", "1,4"), EXIT_DOMAIN),
    (("trispectrum", "--ell", "0"), EXIT_DOMAIN),
])
def test_exit_codes(capsys, argv, code):
    got, out, err = run(capsys, *argv)
    assert got == code
    assert out == ""
    assert err


def test_usage_error_names_flag(capsys):
    _, _, err = run(capsys, "nodal", "--ell", "4", "--colour", "red")
    assert "--colour" in err
    _, _, err = run(capsys, "variance-scan", "--ells", "a,b")
    assert "--ells" in err and "comma-separated integers" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nodalab.cli", "nodal", "--ell", "1", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
    proc = subprocess.run([sys.executable, "-m", "nodalab.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK and __version__ in proc.stdout
