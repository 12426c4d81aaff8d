"""FastAPI application: experiments, run store, cache and small numeric endpoints."""

from __future__ import annotations

from typing import Any

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..cache import ArtifactCache
from ..experiments import DESCRIPTIONS, ConfigError, ExperimentError, RunStore, parse_config, run_experiment
from ..hermite import hermite_1d
from ..spectral import ae_threshold, apply_multiplier, critical_index, profile_from_config
from ..transform import read_expansion, write_expansion
from .schemas import (
    CacheEntryModel,
    CacheInfo,
    CriticalIndexResponse,
    ExperimentKind,
    Health,
    HermiteRequest,
    HermiteResponse,
    MultiplierRequest,
    MultiplierResponse,
    RunResponse,
)


def create_app(store: RunStore | None = None, cache: ArtifactCache | None = None) -> FastAPI:
    store = RunStore() if store is None else store
    cache = ArtifactCache() if cache is None else cache
    app = FastAPI(title="riesz-lab", version=__version__)

    @app.get("/health", response_model=Health)
    def health():
        return Health(version=__version__)

    @app.get("/experiments", response_model=list[ExperimentKind])
    def experiments():
        return [ExperimentKind(kind=k, description=d) for k, d in DESCRIPTIONS.items()]

    @app.post("/runs", response_model=RunResponse, responses={422: {"description": "invalid config"}})
    def create_run(config: dict[str, Any] = Body(...)):
        try:
            cfg = parse_config(config)
            result = run_experiment(cfg, cache)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except ExperimentError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        store.save(result)
        return RunResponse(run_id=result.run_id, verdict=result.verdict, exit_code=result.exit_code, summary=result.summary)

    @app.get("/runs")
    def list_runs() -> list[str]:
        return store.list()

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> dict[str, Any]:
        try:
            return store.summary(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")

    @app.get("/runs/{run_id}/csv", response_class=PlainTextResponse)
    def get_run_csv(run_id: str):
        try:
            return PlainTextResponse(store.csv(run_id), media_type="text/csv")
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")

    @app.get("/cache", response_model=CacheInfo)
    def cache_info():
        return CacheInfo(
            root=str(cache.root),
            enabled=cache.enabled,
            entries=[CacheEntryModel(name=e.name, size=e.size, valid=e.valid) for e in cache.entries()],
        )

    @app.post("/hermite/values", response_model=HermiteResponse)
    def hermite_values(req: HermiteRequest):
        vals = hermite_1d(req.k, req.t) if req.t else []
        return HermiteResponse(k=req.k, values=[float(v) for v in vals])

    @app.get("/critical-index", response_model=CriticalIndexResponse)
    def critical(p: str = Query(..., description="exponent, or 'inf'"), n: int = Query(..., ge=1)):
        try:
            lam, thr = critical_index(p, n), ae_threshold(p, n)
        except (ValueError, ZeroDivisionError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return CriticalIndexResponse(p=p, n=n, critical_index=str(lam), ae_threshold=str(thr))

    @app.post("/expansions/multiplier", response_model=MultiplierResponse)
    def multiplier(req: MultiplierRequest):
        try:
            e = read_expansion(req.expansion)
            m = profile_from_config(req.profile, req.params)
            out = apply_multiplier(e, m)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return MultiplierResponse(expansion=write_expansion(out))

    return app
