from .records import (
    AnnotationRecord,
    QAStepEntry,
    SideBySideRecord,
    answer_spans,
    content_hash,
    effective_qa_step,
    new_record,
    record_qa,
    record_span,
    span_key,
    submit,
)
from .store import AnnotationStore

__all__ = [
    "AnnotationRecord",
    "AnnotationStore",
    "QAStepEntry",
    "SideBySideRecord",
    "answer_spans",
    "content_hash",
    "effective_qa_step",
    "new_record",
    "record_qa",
    "record_span",
    "span_key",
    "submit",
]
