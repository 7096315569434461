"""The two-step annotation record: span coverage, then QA verification.

A record stores only what the annotator did: span verdicts and manual QA
labels. The QA-step view is derived on demand — any QA whose answer set
touches a not-covered span shows an auto not-supported label (extrinsic
error), and flipping the span back to covered restores the manual state
exactly, because the manual state was never overwritten.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict

from ..decompose import Decomposition
from ..errors import (
    IncompleteRecordError,
    RecordSubmittedError,
    SpanNotCoveredError,
    UnknownQAError,
    UnknownSpanError,
)
from ..model import (
    CharRange,
    ErrorKind,
    JudgmentLabel,
    QAPair,
    SpanCoverage,
)

RecordState = Literal["spans-in-progress", "qas-in-progress", "submitted"]
Provenance = Literal["manual", "auto:span-propagation"]

AUTO_PROVENANCE: Provenance = "auto:span-propagation"


class ManualEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: JudgmentLabel
    note: Optional[str] = None


class QAStepEntry(BaseModel):
    """Effective QA-step state for one QA, manual or auto-derived."""

    model_config = ConfigDict(frozen=True)

    label: JudgmentLabel
    note: Optional[str] = None
    provenance: Provenance
    error_kind: Optional[ErrorKind] = None


class AnnotationRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    record_id: str
    instance_id: str
    annotator_id: str
    span_step: list[SpanCoverage] = []
    manual_qa: dict[str, ManualEntry] = {}
    state: RecordState = "spans-in-progress"
    version: int = 1


class SideBySideRecord(BaseModel):
    """A 1-5 consistency comparison of two generations over one reference;
    3 means almost equivalent, 5 strong advantage for the first."""

    model_config = ConfigDict(frozen=True)

    pair_id: str
    annotator_id: str
    likert: int
    version: int = 1


def span_key(surface: str, char_range: Optional[CharRange]) -> str:
    if char_range is None:
        return f"~:{surface}"
    return f"{char_range[0]}:{char_range[1]}:{surface}"


def coverage_key(span: SpanCoverage) -> str:
    return span_key(span.answer_surface, span.char_range)


def answer_spans(decomposition: Decomposition) -> dict[str, SpanCoverage]:
    """Distinct answer spans of the accepted QAs, keyed for verdict lookup.

    The returned values carry verdict 'covered' as a placeholder shape;
    only keys and surfaces matter here.
    """
    spans: dict[str, SpanCoverage] = {}
    for qa in decomposition.accepted():
        for answer in qa.answers:
            key = span_key(answer.surface, answer.char_range)
            if key not in spans:
                spans[key] = SpanCoverage(
                    answer_surface=answer.surface,
                    char_range=answer.char_range,
                    verdict="covered",
                )
    return spans


def qa_span_keys(qa: QAPair) -> set[str]:
    return {span_key(a.surface, a.char_range) for a in qa.answers}


def not_covered_keys(record: AnnotationRecord) -> set[str]:
    return {
        coverage_key(s) for s in record.span_step if s.verdict == "not-covered"
    }


def new_record(record_id: str, instance_id: str,
               annotator_id: str) -> AnnotationRecord:
    return AnnotationRecord(
        record_id=record_id, instance_id=instance_id, annotator_id=annotator_id
    )


def _require_mutable(record: AnnotationRecord) -> None:
    if record.state == "submitted":
        raise RecordSubmittedError(
            f"record {record.record_id} is submitted and immutable"
        )


def record_span(record: AnnotationRecord, decomposition: Decomposition,
                span: SpanCoverage) -> AnnotationRecord:
    """Store a span verdict; QA-step effects follow from the derived view.

    Step 1 stays revisitable until submit, so this is legal in both
    in-progress states.
    """
    _require_mutable(record)
    key = coverage_key(span)
    known = answer_spans(decomposition)
    if key not in known:
        raise UnknownSpanError(
            f"span {span.answer_surface!r} at {span.char_range} is not an "
            f"answer span of instance {record.instance_id}"
        )
    updated = [s for s in record.span_step if coverage_key(s) != key]
    updated.append(span)
    return record.model_copy(update={
        "span_step": updated,
        "version": record.version + 1,
    })


def record_qa(record: AnnotationRecord, decomposition: Decomposition,
              qa_id: str, label: JudgmentLabel,
              note: Optional[str] = None) -> AnnotationRecord:
    """Store a manual QA label; legal only while every answer span is covered."""
    _require_mutable(record)
    qa = next((q for q in decomposition.qas if q.id == qa_id), None)
    if qa is None or qa.status != "accepted":
        status = "unknown" if qa is None else qa.status
        raise UnknownQAError(f"QA {qa_id} is {status} for this record")
    blocked = qa_span_keys(qa) & not_covered_keys(record)
    if blocked:
        raise SpanNotCoveredError(
            f"QA {qa_id} has not-covered answer spans; its label is "
            f"auto-derived and cannot be set manually"
        )
    manual = dict(record.manual_qa)
    manual[qa_id] = ManualEntry(label=label, note=note)
    state = record.state if record.state != "spans-in-progress" else "qas-in-progress"
    return record.model_copy(update={
        "manual_qa": manual,
        "state": state,
        "version": record.version + 1,
    })


def effective_qa_step(record: AnnotationRecord,
                      decomposition: Decomposition) -> dict[str, QAStepEntry]:
    """Derived QA-step view over (span verdicts, manual labels).

    Auto entries win over manual ones while any answer span is not
    covered; a manual entry under a not-covered span is therefore never
    visible, and reappears unchanged once the span is covered again.
    """
    blocked = not_covered_keys(record)
    view: dict[str, QAStepEntry] = {}
    for qa in decomposition.accepted():
        if qa_span_keys(qa) & blocked:
            view[qa.id] = QAStepEntry(
                label="not-supported",
                provenance=AUTO_PROVENANCE,
                error_kind="extrinsic",
            )
        elif qa.id in record.manual_qa:
            entry = record.manual_qa[qa.id]
            view[qa.id] = QAStepEntry(
                label=entry.label,
                note=entry.note,
                provenance="manual",
                error_kind="intrinsic" if entry.label == "not-supported" else None,
            )
    return view


def unlabeled_qa_ids(record: AnnotationRecord,
                     decomposition: Decomposition) -> list[str]:
    view = effective_qa_step(record, decomposition)
    return [qa.id for qa in decomposition.accepted() if qa.id not in view]


def submit(record: AnnotationRecord,
           decomposition: Decomposition) -> AnnotationRecord:
    """Finalize the record; every accepted QA must carry a label."""
    _require_mutable(record)
    missing = unlabeled_qa_ids(record, decomposition)
    if missing:
        raise IncompleteRecordError(missing)
    return record.model_copy(update={
        "state": "submitted",
        "version": record.version + 1,
    })


def content_hash(record: AnnotationRecord) -> str:
    payload = json.dumps(
        record.model_dump(mode="json"), sort_keys=True, ensure_ascii=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
