"""Request/response models for the simulation service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, model_validator


class ScenarioInfo(BaseModel):
    name: str
    description: str
    variant: str


class ConfigPayload(BaseModel):
    """Either an inline config mapping or the name of a builtin scenario."""

    model_config = ConfigDict(extra="forbid")

    config: Optional[dict[str, Any]] = None
    scenario: Optional[str] = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.config is None) == (self.scenario is None):
            raise ValueError("provide exactly one of 'config' or 'scenario'")
        return self


class RunRequest(ConfigPayload):
    model_config = ConfigDict(extra="forbid")

    seed: Optional[int] = None
    validate_trace: bool = False


class RunResponse(BaseModel):
    name: str
    seed: int
    duration_us: int
    summary: dict[str, Any]
    summary_csv: str
    trace_jsonl: str
    trace_records: int
    violations: Optional[list[str]] = None


class SweepRequest(ConfigPayload):
    model_config = ConfigDict(extra="forbid")

    axis: str
    values: list[Any]
    seeds: list[int] = [1]


class SweepResponse(BaseModel):
    axis: str
    csv: str
    rows: list[dict[str, Any]]


class ValidateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict[str, Any]


class ValidateResponse(BaseModel):
    valid: bool
    errors: list[str] = []
