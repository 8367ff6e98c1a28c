"""FastAPI app exposing each pipeline stage as a POST endpoint.

Stages run synchronously inside the request: the service is a local
orchestration surface, not a job queue.  Failures surface as a uniform
JSON body {error_kind, message}; the status code mirrors the CLI exit
codes (usage -> 400, data -> 422, divergence -> 500).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import XidsError
from ..pipeline import PipelineConfig, run_stage
from .schemas import ErrorBody, HealthResponse, StageRequest, StageResponse

STAGE_NAMES = (
    "preprocess",
    "train-vae",
    "train-teacher",
    "distill",
    "evaluate",
    "explain",
    "report",
    "run",
)

_STATUS_BY_KIND = {"usage": 400, "data": 422, "divergence": 500}

app = FastAPI(title="xids pipeline service", version=__version__)


@app.exception_handler(XidsError)
async def _xids_error(request: Request, exc: XidsError) -> JSONResponse:
    body = ErrorBody(error_kind=exc.kind, message=str(exc))
    return JSONResponse(status_code=_STATUS_BY_KIND.get(exc.kind, 500), content=body.model_dump())


@app.exception_handler(RequestValidationError)
async def _bad_request(request: Request, exc: RequestValidationError) -> JSONResponse:
    body = ErrorBody(error_kind="usage", message=f"invalid request body: {exc.errors()}")
    return JSONResponse(status_code=400, content=body.model_dump())


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(version=__version__)


def _make_endpoint(stage: str):
    def endpoint(req: StageRequest) -> StageResponse:
        cfg = PipelineConfig.from_doc(req.config, req.overrides)
        return StageResponse(stage=stage, summary=run_stage(stage, cfg))

    endpoint.__name__ = f"stage_{stage.replace('-', '_')}"
    return endpoint


for _stage in STAGE_NAMES:
    app.post(
        f"/pipeline/{_stage}",
        response_model=StageResponse,
        responses={400: {"model": ErrorBody}, 422: {"model": ErrorBody}, 500: {"model": ErrorBody}},
    )(_make_endpoint(_stage))
