import numpy as np
import pytest
from fastapi.testclient import TestClient

from qbm.service import app

from conftest import base_config

client = TestClient(app, raise_server_exceptions=False)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_ground_endpoint(outdir):
    r = client.post("/ground", json=base_config(output_dir=outdir))
    assert r.status_code == 200
    body = r.json()
    assert body["E_total"] == pytest.approx(2.73017, abs=1e-4)
    assert body["solver"] == "basis"


def test_config_errors_are_400():
    r = client.post("/ground", json={"system": {"dimension": 5}})
    assert r.status_code == 400
    assert r.json()["detail"]["kind"] == "config"
    r2 = client.post("/run", json={"solver": {"method": "nope"}})
    assert r2.status_code == 400


def test_numeric_errors_are_500(outdir):
    # a 4-function basis cannot hold the driven state: truncation failure
    r = client.post("/run", json=base_config(
        output_dir=outdir, solver={"method": "basis", "n_basis": 4}))
    assert r.status_code == 500
    assert r.json()["detail"]["kind"] == "numeric"


def test_run_endpoint(outdir):
    r = client.post("/run", json=base_config(output_dir=outdir, t_final=80.0))
    assert r.status_code == 200
    body = r.json()
    assert body["report"]["omega_r"] == pytest.approx(1.90436, abs=1e-3)
    assert body["stage_errors"] == []


def test_sweep_endpoint(outdir):
    r = client.post("/sweep", json=base_config(
        output_dir=outdir, couplings=[1.0], t_final=60.0))
    assert r.status_code == 200
    body = r.json()
    assert not body["partial"]
    assert len(body["points"]) == 1
    # sweep without an axis is a config error
    r2 = client.post("/sweep", json=base_config(output_dir=outdir))
    assert r2.status_code == 400


def test_scan_endpoint_requires_axis(outdir):
    r = client.post("/scan", json=base_config(output_dir=outdir))
    assert r.status_code == 400


def test_meanfield_endpoint(outdir):
    cfg = base_config(output_dir=outdir)
    cfg["system"]["coupling"] = 0.1
    r = client.post("/meanfield", json={"config": cfg, "model": "hartree"})
    assert r.status_code == 200
    assert r.json()["hartree"]["omega_r"] == pytest.approx(1.9867, abs=1e-3)
    r2 = client.post("/meanfield", json={"config": cfg, "model": "quantum"})
    assert r2.status_code == 422


def test_fitformula_endpoint_with_curve():
    from qbm.analysis import FitFormulaParams, eval_fit_formula
    lam = list(np.geomspace(0.1, 30, 20))
    omega = list(eval_fit_formula(FitFormulaParams(1.1, -0.7), lam))
    r = client.post("/fitformula", json={"couplings": lam, "omegas": omega})
    assert r.status_code == 200
    body = r.json()
    assert body["b"] == pytest.approx(1.1, abs=1e-4)
    assert body["omega_at_0"] == pytest.approx(2.0, abs=1e-9)
    assert body["omega_at_inf"] == pytest.approx(np.sqrt(3.0), abs=1e-9)
    assert body["max_deviation"] < 1e-8


def test_emit_endpoint_errors(tmp_path):
    r = client.post("/emit", json={"figure_id": "fig9", "inputs": ["x"],
                                   "out_path": str(tmp_path / "o.txt")})
    assert r.status_code == 400
    assert r.json()["detail"]["kind"] == "config"
