"""Batch-scoring HTTP service.

POST /v1/score scores whole rollout groups; GET /healthz reports upstream
reachability without ever failing. Scoring is per-request state only, and a
failed upstream call fails the whole request (HTTP 502) so RL trainers can
retry the batch — no partial scores.
"""

from __future__ import annotations

import json
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .answers import MissingComponentError, MockJudge, RewardMode
from .clients import (
    HttpEmbedderClient,
    HttpJudgeClient,
    UpstreamError,
    probe_reachable,
)
from .config import ServiceConfig
from .embedding import HashEmbedder
from .grpo import GrpoConfig
from .scoring import GroupRequest, RewardEngine

ModeName = Literal["citation_only", "semantic", "cov_con", "combined"]


class WireGroup(BaseModel):
    prompt_id: str
    completions: list[str] = Field(min_length=1)
    gold_citations: list[int]
    context_codes: list[int]
    reference_answer: str | None = None
    question: str = ""
    logp_new: list[float] | None = None
    logp_old: list[float] | None = None
    logp_ref: list[float] | None = None


class ScoreRequest(BaseModel):
    mode: ModeName
    groups: list[WireGroup] = Field(min_length=1)


class WireBreakdown(BaseModel):
    format: float
    format_pass: bool
    non_hallucination: float
    halluc_pass: bool
    citation_f1: float
    subtotal: float
    semantic: float | None = None
    coverage: float | None = None
    consistency: float | None = None
    total: float


class WireGroupResult(BaseModel):
    prompt_id: str
    breakdowns: list[WireBreakdown]
    advantages: list[float]
    loss: float | None = None


class ScoreResponse(BaseModel):
    mode: ModeName
    groups: list[WireGroupResult]


class HealthResponse(BaseModel):
    status: str
    version: str
    upstreams: dict[str, str]


def wire_schemas() -> dict:
    """The published request/response schemas (the --schema dump)."""
    return {
        "score_request": ScoreRequest.model_json_schema(),
        "score_response": ScoreResponse.model_json_schema(),
        "health_response": HealthResponse.model_json_schema(),
    }


def schema_dump() -> str:
    return json.dumps(wire_schemas(), indent=2, sort_keys=True)


def build_engine(config: ServiceConfig, mode: RewardMode | None = None) -> RewardEngine:
    """Wire an engine from config; unset upstream URLs select the mocks."""
    embedder = (
        HttpEmbedderClient(config.embedder_url, max_in_flight=config.max_in_flight)
        if config.embedder_url
        else HashEmbedder()
    )
    if config.judge_url:
        kwargs = {}
        if config.coverage_template_path:
            kwargs["coverage_template"] = open(
                config.coverage_template_path, encoding="utf-8"
            ).read()
        if config.contradiction_template_path:
            kwargs["contradiction_template"] = open(
                config.contradiction_template_path, encoding="utf-8"
            ).read()
        judge = HttpJudgeClient(
            config.judge_url, max_in_flight=config.max_in_flight, **kwargs
        )
    else:
        judge = MockJudge()
    return RewardEngine(
        mode=mode or config.reward_mode(),
        weights=config.head_weights(),
        order=config.block_order(),
        embedder=embedder,
        judge=judge,
        grpo=GrpoConfig(
            clip_epsilon=config.clip_epsilon,
            kl_beta=config.kl_beta,
            std_floor=config.std_floor,
            group_size=config.group_size,
        ),
    )


def _to_engine_request(group: WireGroup) -> GroupRequest:
    return GroupRequest(
        prompt_id=group.prompt_id,
        completions=group.completions,
        gold_citations=set(group.gold_citations),
        context_codes=set(group.context_codes),
        reference_answer=group.reference_answer,
        question=group.question,
        logp_new=group.logp_new,
        logp_old=group.logp_old,
        logp_ref=group.logp_ref,
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = (config or ServiceConfig()).validate()
    app = FastAPI(title="nitireward scoring service", version=__version__)
    engines: dict[RewardMode, RewardEngine] = {}

    def engine_for(mode: RewardMode) -> RewardEngine:
        if mode not in engines:
            engines[mode] = build_engine(config, mode)
        return engines[mode]

    @app.exception_handler(RequestValidationError)
    async def schema_violation(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        engine = engine_for(RewardMode(request.mode))
        try:
            results = engine.score_groups([_to_engine_request(g) for g in request.groups])
        except MissingComponentError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except UpstreamError as exc:
            return JSONResponse(
                status_code=502,
                content={"detail": str(exc), "upstream": exc.upstream},
                headers={"Retry-After": "1"},
            )
        return ScoreResponse(
            mode=request.mode,
            groups=[
                WireGroupResult(
                    prompt_id=r.prompt_id,
                    breakdowns=[WireBreakdown(**b.to_json()) for b in r.breakdowns],
                    advantages=r.advantages,
                    loss=r.loss,
                )
                for r in results
            ],
        )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        upstreams = {}
        for name, url in (
            ("embedder", config.embedder_url),
            ("judge", config.judge_url),
            ("tokenizer", config.tokenizer_url),
        ):
            if not url:
                upstreams[name] = "mock"
            elif probe_reachable(url, timeout=1.0):
                upstreams[name] = "ok"
            else:
                upstreams[name] = "unreachable"
        degraded = any(state == "unreachable" for state in upstreams.values())
        return HealthResponse(
            status="degraded" if degraded else "ok",
            version=__version__,
            upstreams=upstreams,
        )

    return app
