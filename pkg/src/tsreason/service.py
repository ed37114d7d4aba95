"""HTTP facade over the annotation store for review tooling.

Endpoints:
  GET  /review/next?reviewer=ID   lease the next queued sample for a reviewer
  POST /review/{sample_id}        submit a sufficiency verdict
  GET  /queue/stats               stage counts and export sizes
  POST /pipeline/run              run the analyzer / rewriter / curation pass
  GET  /export/{stage}            stage1 or stage2 training records as JSONL
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .annotation import (
    DEFAULT_LEASE_SECONDS,
    DEFAULT_TASK3_BUDGET,
    AnnotationStore,
    ConflictError,
    HumanVerdict,
    curate_task3,
    export_stage,
    next_review,
    register_samples,
    run_analyzer_stage,
    run_rewriter_stage,
    submit_review,
)
from .core import Choice, Sample, canonical_encode
from .harness import Responder


@dataclass(frozen=True)
class ServiceConfig:
    lease_seconds: float = DEFAULT_LEASE_SECONDS
    show_analyzer_attempt: bool = True
    task3_budget: int = DEFAULT_TASK3_BUDGET


class VerdictBody(BaseModel):
    reviewer: str
    sufficient: bool
    reasoning: str = ""


class PipelineBody(BaseModel):
    stage: str
    budget: int | None = None


def _sample_payload(sample: Sample, record_attempt: str | None, leased_until: float) -> dict[str, Any]:
    return {
        "sample_id": sample.id,
        "task": sample.task.value,
        "context": sample.context,
        "series": [
            {
                "values": list(s.values),
                "start": s.start,
                "step": s.step,
                "unit": s.unit,
                "domain": s.domain,
            }
            for s in sample.series
        ],
        "events": [{"time": e.time, "description": e.description} for e in sample.events],
        "options": [{"letter": letter, "text": text} for letter, text in sample.options],
        "gold": sample.gold.letter if isinstance(sample.gold, Choice) else list(sample.gold.values),
        "analyzer_attempt": record_attempt,
        "leased_until": leased_until,
    }


def create_app(
    store: AnnotationStore,
    dataset: Sequence[Sample],
    *,
    analyzer: Responder | None = None,
    rewriter: Responder | None = None,
    config: ServiceConfig | None = None,
    clock: Callable[[], float] = time.time,
) -> FastAPI:
    cfg = config or ServiceConfig()
    by_id = {sample.id: sample for sample in dataset}
    register_samples(store, dataset, now=clock())

    app = FastAPI(title="annotation review service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.config = cfg

    @app.get("/review/next")
    def review_next(reviewer: str = Query(min_length=1)) -> dict[str, Any]:
        now = clock()
        record = next_review(store, reviewer, now, cfg.lease_seconds)
        if record is None:
            raise HTTPException(status_code=404, detail="review queue is empty")
        sample = by_id[record.sample_id]
        attempt = record.analyzer_output if cfg.show_analyzer_attempt else None
        return _sample_payload(sample, attempt, leased_until=now + cfg.lease_seconds)

    @app.post("/review/{sample_id}")
    def review_submit(sample_id: str, body: VerdictBody) -> dict[str, Any]:
        verdict = HumanVerdict(
            sufficient=body.sufficient, reasoning=body.reasoning, reviewer_id=body.reviewer
        )
        try:
            record = submit_review(store, sample_id, verdict, clock(), cfg.lease_seconds)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id}")
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return record.to_record()

    @app.get("/queue/stats")
    def queue_stats() -> dict[str, Any]:
        counts = store.stage_counts()
        return {
            "stages": counts,
            "total": sum(counts.values()),
            "stage1_exportable": len(export_stage(store, dataset, "stage1")),
            "stage2_exportable": len(export_stage(store, dataset, "stage2")),
        }

    @app.post("/pipeline/run")
    def pipeline_run(body: PipelineBody) -> dict[str, Any]:
        now = clock()
        if body.stage == "analyzer":
            if analyzer is None:
                raise HTTPException(status_code=400, detail="no analyzer responder configured")
            return {"stage": "analyzer", "moved": run_analyzer_stage(store, dataset, analyzer, now)}
        if body.stage == "rewriter":
            if rewriter is None:
                raise HTTPException(status_code=400, detail="no rewriter responder configured")
            return {"stage": "rewriter", "moved": run_rewriter_stage(store, dataset, rewriter, now)}
        if body.stage == "curate":
            budget = body.budget if body.budget is not None else cfg.task3_budget
            selected, short = curate_task3(store, budget, now)
            return {"stage": "curate", "selected": len(selected), "under_budget": short}
        raise HTTPException(status_code=400, detail=f"unknown pipeline stage {body.stage!r}")

    @app.get("/export/{stage}")
    def export(stage: str) -> PlainTextResponse:
        if stage not in ("stage1", "stage2"):
            raise HTTPException(status_code=404, detail=f"unknown export stage {stage!r}")
        samples = export_stage(store, dataset, stage)
        body = "".join(canonical_encode(sample) + "\n" for sample in samples)
        return PlainTextResponse(body, media_type="application/x-ndjson")

    return app
