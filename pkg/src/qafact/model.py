"""Shared domain types and their structural validity rules.

Every other module consumes these. All types are immutable values; the
canonical JSON shape of each type (declared field order, snake_case) is the
unit of every file format and wire payload in the toolkit.

Semantic invariants that depend on surrounding text (span bounds, surface
agreement) are checked by the ``validate_*`` functions, which report
violations as data rather than raising, so malformed inputs can be
inspected and triaged.
"""

from __future__ import annotations

import json
import re
from typing import Literal, NamedTuple, Optional

from pydantic import BaseModel, ConfigDict, model_validator

TaskType = Literal["summarization", "biography", "cited-response", "other"]
PredicateKind = Literal["verbal", "nominal", "copular"]
QAStatus = Literal["pending-review", "accepted", "rejected-nonsensical"]
JudgmentLabel = Literal["supported", "not-supported"]
JudgmentSource = Literal["human", "model"]
ErrorKind = Literal["extrinsic", "intrinsic"]
CoverageVerdict = Literal["covered", "not-covered"]

CharRange = tuple[int, int]

WH_WORDS = frozenset(
    ["who", "what", "when", "where", "why", "how", "whom", "whose"]
)


class Violation(NamedTuple):
    """One validity finding: a stable code plus a human-readable message."""

    code: str
    message: str


class Instance(BaseModel):
    """A reference text paired with the generated text to be checked against it."""

    model_config = ConfigDict(frozen=True)

    id: str
    reference: str
    generation: str
    task: TaskType = "other"
    model_name: Optional[str] = None
    sentence_spans: list[CharRange] = []


class Predicate(BaseModel):
    """A verbal, nominal, or copular predicate anchored in the generation text."""

    model_config = ConfigDict(frozen=True)

    surface: str
    char_range: CharRange
    kind: PredicateKind


class Answer(BaseModel):
    """One answer surface; the range is present only when the surface is verbatim."""

    model_config = ConfigDict(frozen=True)

    surface: str
    char_range: Optional[CharRange] = None


class QAPair(BaseModel):
    """A single predicate-argument relation expressed as a question plus answer(s)."""

    model_config = ConfigDict(frozen=True)

    id: str
    predicate: Predicate
    question: str
    answers: list[Answer]
    status: QAStatus = "accepted"
    affirmative: Optional[str] = None


class Judgment(BaseModel):
    """A support verdict for one QA pair, from a human or a model backend."""

    model_config = ConfigDict(frozen=True)

    qa_id: str
    score: float
    label: JudgmentLabel
    source: JudgmentSource
    source_detail: str
    note: Optional[str] = None
    error_kind: Optional[ErrorKind] = None

    @model_validator(mode="after")
    def _check_score_label(self) -> "Judgment":
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.source == "model":
            expected = "supported" if self.score >= 0.5 else "not-supported"
            if self.label != expected:
                raise ValueError(
                    f"model judgment label {self.label!r} inconsistent with "
                    f"score {self.score} under the >=0.5 rule"
                )
        else:
            if self.score not in (0.0, 1.0):
                raise ValueError(
                    f"human judgments carry score 0 or 1, got {self.score}"
                )
        return self


class SpanCoverage(BaseModel):
    """Step-1 verdict for one distinct answer span.

    ``char_range`` is None for answers that are not verbatim in the
    generation; the span is then identified by its surface alone.
    """

    model_config = ConfigDict(frozen=True)

    answer_surface: str
    char_range: Optional[CharRange] = None
    verdict: CoverageVerdict


def model_judgment(qa_id: str, score: float, source_detail: str,
                   note: Optional[str] = None) -> Judgment:
    """Build a model-source Judgment, deriving the label from the score."""
    label: JudgmentLabel = "supported" if score >= 0.5 else "not-supported"
    return Judgment(qa_id=qa_id, score=score, label=label, source="model",
                    source_detail=source_detail, note=note)


def human_judgment(qa_id: str, label: JudgmentLabel, annotator_id: str,
                   note: Optional[str] = None,
                   error_kind: Optional[ErrorKind] = None) -> Judgment:
    """Build a human-source Judgment; the score mirrors the binary label."""
    return Judgment(qa_id=qa_id, score=1.0 if label == "supported" else 0.0,
                    label=label, source="human", source_detail=annotator_id,
                    note=note, error_kind=error_kind)


def _check_spans_in_bounds(spans: list[CharRange], text: str,
                           what: str) -> list[Violation]:
    out: list[Violation] = []
    for start, end in spans:
        if start < 0 or end > len(text) or start > end:
            out.append(Violation(
                "span-out-of-bounds",
                f"{what} span [{start}, {end}) outside text of length {len(text)}",
            ))
    return out


def validate_instance(instance: Instance) -> list[Violation]:
    """Return every invariant violation of the instance; empty list means valid."""
    out: list[Violation] = []
    if not instance.id:
        out.append(Violation("empty-id", "instance id is empty"))
    if not instance.reference:
        out.append(Violation("empty-reference", "reference text is empty"))
    if not instance.generation:
        out.append(Violation("empty-generation", "generation text is empty"))
    out.extend(_check_spans_in_bounds(
        instance.sentence_spans, instance.generation, "sentence"))
    spans = instance.sentence_spans
    for prev, cur in zip(spans, spans[1:]):
        if cur[0] < prev[0]:
            out.append(Violation(
                "spans-out-of-order",
                f"sentence span [{cur[0]}, {cur[1]}) precedes [{prev[0]}, {prev[1]})",
            ))
        elif cur[0] < prev[1]:
            out.append(Violation(
                "overlapping-spans",
                f"sentence spans [{prev[0]}, {prev[1]}) and [{cur[0]}, {cur[1]}) overlap",
            ))
    return out


def validate_question(question: str) -> Optional[str]:
    """Check the structural shape of a QA question.

    Returns None when valid, otherwise the reason it is invalid. Nonsense
    detection is a separate human or heuristic step; a structurally valid
    question may still be semantically broken.
    """
    stripped = question.strip()
    if not stripped:
        return "empty question"
    reasons = []
    first = re.match(r"[A-Za-z']+", stripped)
    if first is None or first.group(0).lower() not in WH_WORDS:
        reasons.append("does not begin with a wh-word")
    if not stripped.endswith("?"):
        reasons.append("does not end with '?'")
    if reasons:
        return "; ".join(reasons)
    return None


def validate_qa_pair(qa: QAPair, generation: str) -> list[Violation]:
    """Check a QA pair against the generation text it was extracted from."""
    out: list[Violation] = []
    problem = validate_question(qa.question)
    if problem is not None:
        out.append(Violation("invalid-question", f"{qa.question!r}: {problem}"))
    if not qa.answers:
        out.append(Violation("no-answers", "QA pair has no answers"))
    for answer in qa.answers:
        if not answer.surface:
            out.append(Violation("empty-answer", "answer surface is empty"))
        if answer.char_range is not None:
            start, end = answer.char_range
            if start < 0 or end > len(generation) or start > end:
                out.append(Violation(
                    "span-out-of-bounds",
                    f"answer span [{start}, {end}) outside generation",
                ))
            elif generation[start:end] != answer.surface:
                out.append(Violation(
                    "surface-mismatch",
                    f"answer surface {answer.surface!r} != text at [{start}, {end})",
                ))
    pred = qa.predicate
    start, end = pred.char_range
    if start < 0 or end > len(generation) or start > end:
        out.append(Violation(
            "span-out-of-bounds",
            f"predicate span [{start}, {end}) outside generation",
        ))
    elif generation[start:end] != pred.surface:
        out.append(Violation(
            "surface-mismatch",
            f"predicate surface {pred.surface!r} != text at [{start}, {end})",
        ))
    return out


def to_json_line(model: BaseModel) -> str:
    """Serialize a record to its canonical one-line JSON form."""
    return json.dumps(model.model_dump(mode="json"), ensure_ascii=False)


def dump_json(payload: dict) -> str:
    """Serialize a plain dict the same way record lines are written."""
    return json.dumps(payload, ensure_ascii=False)
