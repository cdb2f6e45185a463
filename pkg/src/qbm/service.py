"""HTTP service exposing the simulation drivers.

Thin translation layer: request models validate into RunConfig, responses
are the runner's JSON-ready dictionaries.  Config problems map to 400,
numeric failures to 500 with a "numeric" kind, partial sweeps/scans return
200 with their partial flag set.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import analysis, runner
from .config import ConfigError, RunConfig, parse_config

app = FastAPI(title="qbm", description="quantum breathing modes of two "
                                       "trapped particles")


def _numeric_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=500,
                         detail={"kind": "numeric", "error": repr(exc)})


def _config(raw: dict) -> RunConfig:
    try:
        return parse_config(raw)
    except ConfigError as exc:
        raise HTTPException(status_code=400,
                            detail={"kind": "config", "error": str(exc)})


class MeanfieldRequest(BaseModel):
    config: dict
    model: str = Field("both", pattern="^(hartree|semiclassical|both)$")


class FitFormulaRequest(BaseModel):
    config: Optional[dict] = None
    couplings: Optional[list[float]] = None
    omegas: Optional[list[float]] = None


class EmitRequest(BaseModel):
    figure_id: str
    inputs: list[str]
    out_path: str


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/ground")
def ground(config: dict) -> dict:
    cfg = _config(config)
    try:
        return runner.ground_info(cfg)
    except Exception as exc:  # noqa: BLE001 - boundary translation
        raise _numeric_error(exc)


@app.post("/run")
def run(config: dict) -> dict:
    cfg = _config(config)
    try:
        return runner.run_single(cfg).to_dict()
    except Exception as exc:  # noqa: BLE001
        raise _numeric_error(exc)


@app.post("/sweep")
def sweep(config: dict) -> dict:
    cfg = _config(config)
    if not cfg.couplings:
        raise HTTPException(status_code=400,
                            detail={"kind": "config",
                                    "error": "sweep requires couplings"})
    try:
        return runner.run_sweep(cfg)
    except Exception as exc:  # noqa: BLE001
        raise _numeric_error(exc)


@app.post("/scan")
def scan(config: dict) -> dict:
    cfg = _config(config)
    if cfg.scan is None:
        raise HTTPException(status_code=400,
                            detail={"kind": "config",
                                    "error": "scan requires a scan axis"})
    try:
        spectrum = runner.run_scan(cfg)
    except Exception as exc:  # noqa: BLE001
        raise _numeric_error(exc)
    from dataclasses import asdict
    return {
        "omegas": spectrum.omegas.tolist(),
        "energies": spectrum.energies.tolist(),
        "coupling": spectrum.coupling,
        "symmetry": spectrum.symmetry,
        "partial": spectrum.partial,
        "failures": spectrum.failures,
        "peaks": [asdict(p) for p in spectrum.peaks()],
    }


@app.post("/meanfield")
def meanfield(req: MeanfieldRequest) -> dict:
    cfg = _config(req.config)
    try:
        return runner.meanfield_eval(cfg, req.model)
    except Exception as exc:  # noqa: BLE001
        raise _numeric_error(exc)


DEFAULT_FORMULA_GRID = np.geomspace(0.1, 30.0, 25)


@app.post("/fitformula")
def fitformula(req: FitFormulaRequest) -> dict:
    if req.couplings is not None and req.omegas is not None:
        lams = np.asarray(req.couplings, dtype=float)
        omegas = np.asarray(req.omegas, dtype=float)
    else:
        cfg = _config(req.config or {})
        try:
            lams, omegas = runner.gap_curve(cfg, DEFAULT_FORMULA_GRID)
        except Exception as exc:  # noqa: BLE001
            raise _numeric_error(exc)
    try:
        out = runner.fit_formula_from_curve(lams, omegas)
    except analysis.FitError as exc:
        raise _numeric_error(exc)
    out["couplings"] = np.asarray(lams).tolist()
    out["omegas"] = np.asarray(omegas).tolist()
    return out


@app.post("/emit")
def emit(req: EmitRequest) -> dict:
    try:
        return runner.figure_emit(req.figure_id, req.inputs, req.out_path)
    except runner.EmitError as exc:
        raise HTTPException(status_code=400,
                            detail={"kind": "config", "error": str(exc)})
    except Exception as exc:  # noqa: BLE001
        raise _numeric_error(exc)
