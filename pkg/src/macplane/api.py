"""HTTP service wrapping the simulator: run scenarios, sweep parameters,
validate configs. The CLI is a thin client of this app; it can also be
served standalone with uvicorn for multi-client use."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .config import ScenarioConfig, config_from_dict
from .errors import ConfigError, SimError
from .metrics import Summary
from .runner import build_and_run, sweep
from .scenarios import BUILTIN_SCENARIOS, builtin, list_scenarios
from .schemas import (
    RunRequest,
    RunResponse,
    ScenarioInfo,
    SweepRequest,
    SweepResponse,
    ValidateRequest,
    ValidateResponse,
)
from .validate import validate_trace

app = FastAPI(
    title="macplane",
    version=__version__,
    description="Deterministic discrete-event simulation of 802.11-style "
                "MAC channel access: contention baseline vs plane-separated "
                "reservation variant.",
)


def _resolve_config(payload) -> ScenarioConfig:
    if payload.scenario is not None:
        if payload.scenario not in BUILTIN_SCENARIOS:
            raise HTTPException(404, f"unknown scenario {payload.scenario!r}")
        return builtin(payload.scenario)
    try:
        return config_from_dict(payload.config)
    except ConfigError as exc:
        raise HTTPException(422, str(exc)) from exc


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/scenarios", response_model=list[ScenarioInfo])
def scenarios() -> list[dict]:
    return list_scenarios()


@app.get("/scenarios/{name}")
def scenario_config(name: str) -> dict:
    if name not in BUILTIN_SCENARIOS:
        raise HTTPException(404, f"unknown scenario {name!r}")
    return builtin(name).model_dump()


@app.post("/validate", response_model=ValidateResponse)
def validate_config(req: ValidateRequest) -> ValidateResponse:
    try:
        config_from_dict(req.config)
    except ConfigError as exc:
        return ValidateResponse(valid=False, errors=[str(exc)])
    return ValidateResponse(valid=True)


@app.post("/runs", response_model=RunResponse)
def run(req: RunRequest) -> RunResponse:
    cfg = _resolve_config(req)
    try:
        result = build_and_run(cfg, seed_override=req.seed)
    except SimError as exc:
        raise HTTPException(500, f"simulation failed: {exc}") from exc
    summary: Summary = result.summary
    violations = None
    if req.validate_trace:
        violations = validate_trace(result.trace, cfg)
    return RunResponse(
        name=cfg.name,
        seed=result.seed,
        duration_us=cfg.sim.duration_us,
        summary=dict(zip(summary.csv_header(), summary.csv_row())),
        summary_csv=summary.to_csv(),
        trace_jsonl=result.trace.to_jsonl(),
        trace_records=len(result.trace),
        violations=violations,
    )


@app.post("/sweeps", response_model=SweepResponse)
def run_sweep(req: SweepRequest) -> SweepResponse:
    cfg = _resolve_config(req)
    try:
        csv_text, rows = sweep(cfg, req.axis, req.values, req.seeds)
    except SimError as exc:
        raise HTTPException(422, str(exc)) from exc
    return SweepResponse(axis=req.axis, csv=csv_text, rows=rows)
