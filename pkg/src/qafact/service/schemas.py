"""Request and response bodies for the annotation HTTP API.

All payloads reuse the canonical JSON shapes of the core types; record
views additionally carry the derived QA-step map and a content hash so
clients can verify immutability after submit.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from ..annotation.records import (
    AnnotationRecord,
    QAStepEntry,
    SideBySideRecord,
    content_hash,
    effective_qa_step,
)
from ..decompose import Decomposition
from ..model import Instance, JudgmentLabel, SpanCoverage


class InstanceView(BaseModel):
    instance: Instance
    decomposition: Optional[Decomposition] = None


class RecordView(BaseModel):
    record_id: str
    instance_id: str
    annotator_id: str
    span_step: list[SpanCoverage]
    qa_step: dict[str, QAStepEntry]
    state: str
    version: int
    content_hash: str

    @classmethod
    def build(cls, record: AnnotationRecord,
              decomposition: Optional[Decomposition]) -> "RecordView":
        qa_step = (
            effective_qa_step(record, decomposition) if decomposition else {}
        )
        return cls(
            record_id=record.record_id,
            instance_id=record.instance_id,
            annotator_id=record.annotator_id,
            span_step=record.span_step,
            qa_step=qa_step,
            state=record.state,
            version=record.version,
            content_hash=content_hash(record),
        )


class SpanWrite(BaseModel):
    span: SpanCoverage
    expected_version: Optional[int] = None


class QAWrite(BaseModel):
    label: JudgmentLabel
    note: Optional[str] = None
    expected_version: Optional[int] = None


class SubmitRequest(BaseModel):
    expected_version: Optional[int] = None


class AssignRequest(BaseModel):
    n_annotators: int = 3


class SbsWrite(BaseModel):
    annotator_id: str
    likert: int = Field(ge=1, le=5)


class SbsView(BaseModel):
    pair_id: str
    annotator_id: str
    likert: int
    version: int

    @classmethod
    def build(cls, record: SideBySideRecord) -> "SbsView":
        return cls(**record.model_dump())


class ReviewDecision(BaseModel):
    decision: str  # accept | reject


class InstanceUpload(BaseModel):
    instance: Instance
    decomposition: Optional[Decomposition] = None


class ErrorBody(BaseModel):
    error: str
    detail: str
