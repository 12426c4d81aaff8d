"""Request and response models of the service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, Field


class Health(BaseModel):
    status: str = "ok"
    version: str


class ExperimentKind(BaseModel):
    kind: str
    description: str


class RunResponse(BaseModel):
    run_id: str
    verdict: str
    exit_code: int
    summary: dict[str, Any]


class ConfigErrorResponse(BaseModel):
    detail: str
    exit_code: int = 3


class CacheEntryModel(BaseModel):
    name: str
    size: int
    valid: bool


class CacheInfo(BaseModel):
    root: str
    enabled: bool
    entries: list[CacheEntryModel]


class HermiteRequest(BaseModel):
    k: int = Field(ge=0, le=20000)
    t: list[float]


class HermiteResponse(BaseModel):
    k: int
    values: list[float]


class CriticalIndexResponse(BaseModel):
    p: str
    n: int
    critical_index: str
    ae_threshold: str


class MultiplierRequest(BaseModel):
    expansion: str = Field(description='text form: header "n K", then "μ_1 … μ_n re im" lines')
    profile: str = Field(description="riesz | band | bump | lp | power")
    params: dict[str, float]


class MultiplierResponse(BaseModel):
    expansion: str
