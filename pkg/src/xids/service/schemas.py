"""Request and response bodies for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class StageRequest(BaseModel):
    """A pipeline config document plus optional per-call overrides.

    `config` is the same JSON object the CLI reads from --config;
    `overrides` is a partial document deep-merged on top (seed, out,
    train_fraction, features, explain.*, ...).
    """

    config: dict
    overrides: dict | None = None


class StageResponse(BaseModel):
    stage: str
    summary: dict


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class ErrorBody(BaseModel):
    """Uniform error shape; error_kind matches the CLI exit-code names."""

    error_kind: str = Field(examples=["usage", "data", "divergence"])
    message: str
