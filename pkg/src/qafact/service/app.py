"""FastAPI application serving the two-step annotation protocol.

Write endpoints use optimistic concurrency: the body carries the version
the client last saw, and a mismatch returns 409 so the client refreshes
instead of silently overwriting. Auth is a bearer token taken from the
``QAFACT_TOKEN`` environment variable; when unset the service is open
(local/dev use).
"""

from __future__ import annotations

import json
import os
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from fastapi.responses import StreamingResponse

from ..annotation.store import AnnotationStore
from ..errors import (
    IncompleteRecordError,
    InsufficientAnnotatorsError,
    RecordSubmittedError,
    SpanNotCoveredError,
    StoreError,
    UnknownInstanceError,
    UnknownQAError,
    UnknownRecordError,
    UnknownSpanError,
    VersionConflictError,
)
from . import schemas

TOKEN_ENV_VAR = "QAFACT_TOKEN"


def _error(status: int, code: str, detail: str) -> HTTPException:
    return HTTPException(
        status_code=status, detail={"error": code, "detail": detail}
    )


def _translate(exc: StoreError) -> HTTPException:
    if isinstance(exc, VersionConflictError):
        return _error(409, "version-conflict", str(exc))
    if isinstance(exc, (UnknownInstanceError, UnknownRecordError,
                        UnknownSpanError, UnknownQAError)):
        return _error(404, "not-found", str(exc))
    if isinstance(exc, SpanNotCoveredError):
        return _error(409, "span-not-covered", str(exc))
    if isinstance(exc, RecordSubmittedError):
        return _error(409, "record-submitted", str(exc))
    if isinstance(exc, IncompleteRecordError):
        return _error(409, "incomplete-record", str(exc))
    if isinstance(exc, InsufficientAnnotatorsError):
        return _error(409, "insufficient-annotators", str(exc))
    return _error(400, "store-error", str(exc))


def create_app(store: AnnotationStore,
               token: Optional[str] = None) -> FastAPI:
    """Build the service over a store; token defaults to $QAFACT_TOKEN."""
    expected_token = token if token is not None else os.environ.get(TOKEN_ENV_VAR)

    async def require_auth(authorization: Optional[str] = Header(None)) -> None:
        if not expected_token:
            return
        if authorization != f"Bearer {expected_token}":
            raise _error(401, "unauthorized", "missing or invalid bearer token")

    app = FastAPI(title="qafact annotation service",
                  dependencies=[Depends(require_auth)])

    # Instance ids may contain "/" (e.g. corpus-prefixed ids), so instance
    # routes use path converters; the more specific routes register first.

    @app.post("/instances", response_model=schemas.InstanceView, status_code=201)
    def upload_instance(body: schemas.InstanceUpload):
        try:
            store.add_instance(body.instance, body.decomposition)
        except StoreError as exc:
            raise _translate(exc)
        return schemas.InstanceView(
            instance=body.instance, decomposition=body.decomposition
        )

    @app.post("/instances/{instance_id:path}/assign",
              response_model=list[schemas.RecordView])
    def assign(instance_id: str, body: schemas.AssignRequest):
        try:
            created = store.assign(instance_id, body.n_annotators)
        except StoreError as exc:
            raise _translate(exc)
        return [
            schemas.RecordView.build(r, store.decomposition_for_record(r))
            for r in created
        ]

    @app.get("/instances/{instance_id:path}", response_model=schemas.InstanceView)
    def get_instance(instance_id: str):
        try:
            instance, decomposition = store.get_instance(instance_id)
        except StoreError as exc:
            raise _translate(exc)
        return schemas.InstanceView(instance=instance, decomposition=decomposition)

    @app.get("/assignments", response_model=list[schemas.RecordView])
    def assignments(annotator: str):
        found = store.records_for_annotator(annotator)
        return [
            schemas.RecordView.build(r, store.decomposition_for_record(r))
            for r in found
        ]

    @app.get("/records/{record_id}", response_model=schemas.RecordView)
    def get_record(record_id: str):
        try:
            record = store.get_record(record_id)
        except StoreError as exc:
            raise _translate(exc)
        return schemas.RecordView.build(
            record, store.decomposition_for_record(record)
        )

    @app.put("/records/{record_id}/spans", response_model=schemas.RecordView)
    def put_span(record_id: str, body: schemas.SpanWrite):
        try:
            record = store.apply_span(record_id, body.span, body.expected_version)
        except StoreError as exc:
            raise _translate(exc)
        return schemas.RecordView.build(
            record, store.decomposition_for_record(record)
        )

    @app.put("/records/{record_id}/qas/{qa_id:path}",
             response_model=schemas.RecordView)
    def put_qa(record_id: str, qa_id: str, body: schemas.QAWrite):
        try:
            record = store.apply_qa(
                record_id, qa_id, body.label, body.note, body.expected_version
            )
        except StoreError as exc:
            raise _translate(exc)
        return schemas.RecordView.build(
            record, store.decomposition_for_record(record)
        )

    @app.post("/records/{record_id}/submit", response_model=schemas.RecordView)
    def submit(record_id: str, body: schemas.SubmitRequest):
        try:
            record = store.submit_record(record_id, body.expected_version)
        except StoreError as exc:
            raise _translate(exc)
        return schemas.RecordView.build(
            record, store.decomposition_for_record(record)
        )

    @app.put("/sbs/{pair_id}", response_model=schemas.SbsView)
    def put_sbs(pair_id: str, body: schemas.SbsWrite):
        try:
            record = store.record_side_by_side(
                pair_id, body.annotator_id, body.likert
            )
        except StoreError as exc:
            raise _translate(exc)
        return schemas.SbsView.build(record)

    @app.get("/review/queue")
    def review_queue():
        return store.review_queue()

    @app.post("/review/{qa_id:path}")
    def review_decide(qa_id: str, body: schemas.ReviewDecision):
        try:
            store.review_decide(qa_id, body.decision)
        except StoreError as exc:
            raise _translate(exc)
        return {"qa_id": qa_id, "decision": body.decision}

    @app.get("/export/gold")
    def export_gold():
        def generate():
            for row in store.export_gold():
                yield json.dumps(row, ensure_ascii=False) + "\n"

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.get("/export/records")
    def export_records():
        def generate():
            for row in store.export_records():
                yield json.dumps(row, ensure_ascii=False) + "\n"

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    return app
