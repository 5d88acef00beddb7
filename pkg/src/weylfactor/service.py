"""HTTP front end over the same commands the CLI runs locally.

    uvicorn weylfactor.service:app
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ValidationError

from . import pipeline
from .schemas import ErrorBody, RunConfig, RunResult, SweepRequest

app = FastAPI(title="weylfactor", version="0.1.0")

_STATUS = {pipeline.EXIT_USAGE: 400, pipeline.EXIT_INADMISSIBLE: 422, pipeline.EXIT_COLLISION: 409}


class VerifyRequest(BaseModel):
    config: Optional[RunConfig] = None
    solution: Optional[dict[str, str]] = None


@app.exception_handler(pipeline.PipelineError)
async def _pipeline_error(request: Request, exc: pipeline.PipelineError):
    body = ErrorBody(error=str(exc), exit_code=exc.code)
    return JSONResponse(status_code=_STATUS.get(exc.code, 500), content=body.model_dump())


@app.exception_handler(ValidationError)
async def _bad_config(request: Request, exc: ValidationError):
    body = ErrorBody(error=str(exc), exit_code=pipeline.EXIT_USAGE)
    return JSONResponse(status_code=400, content=body.model_dump())


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/factorize", response_model=RunResult)
def factorize(cfg: RunConfig):
    return pipeline.factorize(cfg)


@app.post("/solve", response_model=RunResult)
def solve(cfg: RunConfig):
    return pipeline.solve(cfg)


@app.post("/verify", response_model=RunResult)
def verify(req: VerifyRequest):
    if req.solution is not None:
        return pipeline.verify(req.config or RunConfig(), solution=req.solution)
    if req.config is None:
        raise pipeline.PipelineError("verify needs a config or a solution", pipeline.EXIT_USAGE)
    return pipeline.verify(req.config)


@app.post("/sweep", response_model=RunResult)
def sweep(req: SweepRequest):
    return pipeline.sweep(req.config, req.param, req.values)


@app.get("/catalog", response_model=RunResult)
def catalog(check: bool = False, m: float = 1.0):
    return pipeline.catalog(check=check, m=m)
