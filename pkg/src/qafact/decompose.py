"""Decompose a generated text into predicate-argument QA pairs via a
remote model backend, then validate and filter the output.

The backend answers with one tab-separated line per QA:

    PREDICATE <tab> QUESTION <tab> ANSWER[; ANSWER]* [<tab> KIND]

Lines that fail structural validation are dropped and counted, never
silently repaired. Replaying a recorded backend transcript reproduces the
decomposition exactly.
"""

from __future__ import annotations

import re
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .backends import BackendAdapter
from .errors import (
    BackendMalformedError,
    InstanceInvalidError,
    MissingAffirmativeError,
)
from .model import (
    Answer,
    Instance,
    Predicate,
    PredicateKind,
    QAPair,
    validate_instance,
    validate_question,
)
from .templates import load_template, render_template

ALL_PREDICATE_KINDS: tuple[PredicateKind, ...] = ("verbal", "nominal", "copular")
BE_FORMS = frozenset(["is", "are", "was", "were", "am", "be", "been", "being"])
FilterMode = Literal["heuristic", "mark-for-review"]

# Shared stem prefix required between the question's main verb token and the
# predicate surface; capped by the shorter word so short predicates ("got")
# can still match exactly.
STEM_PREFIX = 4


class DecompositionRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    instance: Instance
    predicate_kinds: list[PredicateKind] = Field(
        default_factory=lambda: list(ALL_PREDICATE_KINDS)
    )
    few_shot_profile: str = "decompose-default"

    @model_validator(mode="after")
    def _non_empty_kinds(self) -> "DecompositionRequest":
        if not self.predicate_kinds:
            raise ValueError("predicate_kinds must be non-empty")
        return self


class DroppedLine(BaseModel):
    model_config = ConfigDict(frozen=True)

    line: str
    reason: str


class DecompositionDiagnostics(BaseModel):
    model_config = ConfigDict(frozen=True)

    dropped_lines: int = 0
    dropped: list[DroppedLine] = []
    prompt_template_hash: str = ""


class Decomposition(BaseModel):
    """All QA pairs extracted from one instance's generation, grouped by predicate."""

    model_config = ConfigDict(frozen=True)

    instance_id: str
    qas: list[QAPair]
    backend_name: str
    raw_backend_output: str
    diagnostics: DecompositionDiagnostics = DecompositionDiagnostics()

    @model_validator(mode="after")
    def _check_qas(self) -> "Decomposition":
        by_range: dict[tuple[int, int], Predicate] = {}
        for qa in self.qas:
            problem = validate_question(qa.question)
            if problem is not None:
                raise ValueError(f"QA {qa.id}: {problem}")
            seen = by_range.setdefault(tuple(qa.predicate.char_range), qa.predicate)
            if seen != qa.predicate:
                raise ValueError(
                    f"predicate range {qa.predicate.char_range} bound to two "
                    f"different predicates"
                )
        return self

    def by_predicate(self) -> list[tuple[Predicate, list[QAPair]]]:
        """QAs grouped by predicate, in first-appearance order."""
        groups: dict[tuple[int, int], list[QAPair]] = {}
        predicates: dict[tuple[int, int], Predicate] = {}
        for qa in self.qas:
            key = tuple(qa.predicate.char_range)
            groups.setdefault(key, []).append(qa)
            predicates.setdefault(key, qa.predicate)
        return [(predicates[k], groups[k]) for k in groups]

    def accepted(self) -> list[QAPair]:
        return [qa for qa in self.qas if qa.status == "accepted"]


class _ParsedLine(BaseModel):
    predicate_surface: str
    question: str
    answers: list[str]
    kind: PredicateKind


def _infer_kind(predicate_surface: str) -> PredicateKind:
    return "copular" if predicate_surface.lower() in BE_FORMS else "verbal"


def _parse_line(line: str) -> _ParsedLine | str:
    """Parse one backend line; returns the reason string when invalid."""
    fields = line.split("\t")
    if len(fields) < 3:
        return "expected at least 3 tab-separated fields"
    predicate = fields[0].strip()
    question = fields[1].strip()
    answers = [a.strip() for a in fields[2].split(";")]
    answers = [a for a in answers if a]
    if not predicate:
        return "empty predicate"
    problem = validate_question(question)
    if problem is not None:
        return f"invalid question: {problem}"
    if not answers:
        return "no answers"
    if len(fields) >= 4 and fields[3].strip():
        kind = fields[3].strip().lower()
        if kind not in ALL_PREDICATE_KINDS:
            return f"unknown predicate kind {kind!r}"
    else:
        kind = _infer_kind(predicate)
    return _ParsedLine(
        predicate_surface=predicate, question=question, answers=answers, kind=kind
    )


def _find_surface(surface: str, text: str, offset: int) -> Optional[tuple[int, int]]:
    """Locate a verbatim surface in text, preferring word-boundary matches."""
    pattern = re.compile(r"(?<!\w)" + re.escape(surface) + r"(?!\w)")
    match = pattern.search(text)
    if match is None:
        index = text.find(surface)
        if index < 0:
            return None
        return (offset + index, offset + index + len(surface))
    return (offset + match.start(), offset + match.end())


def _windows(instance: Instance) -> list[tuple[int, str]]:
    """Sentence windows (offset, text); the whole generation if no spans."""
    if instance.sentence_spans:
        return [
            (start, instance.generation[start:end])
            for start, end in instance.sentence_spans
        ]
    return [(0, instance.generation)]


def decompose(req: DecompositionRequest, adapter: BackendAdapter) -> Decomposition:
    """Run the backend over the instance and keep only structurally valid QAs.

    Deterministic given identical backend responses; invalid lines are
    dropped into the diagnostics, and a response with zero parseable QAs is
    a backend-malformed error with the raw output attached.
    """
    violations = validate_instance(req.instance)
    if violations:
        raise InstanceInvalidError(violations)

    template = load_template(req.few_shot_profile)
    kinds_text = ", ".join(req.predicate_kinds)

    raw_parts: list[str] = []
    dropped: list[DroppedLine] = []
    # (window offset, surface, kind) -> resolved predicate; same surface and
    # kind within a window always denote the same predicate occurrence.
    predicates: dict[tuple[int, str, str], Predicate] = {}
    # predicate range -> (window offset, window text, parsed question/answer rows)
    grouped: dict[tuple[int, int], tuple[int, str, list[tuple[str, list[str]]]]] = {}
    group_order: list[tuple[int, int]] = []

    for offset, window_text in _windows(req.instance):
        prompt = render_template(
            template.text, SENTENCE=window_text, PREDICATE_KINDS=kinds_text
        )
        response = adapter.invoke({"op": "complete", "prompt": prompt})
        text = response.get("text", "") or ""
        raw_parts.append(text)
        for line in text.splitlines():
            if not line.strip():
                continue
            parsed = _parse_line(line)
            if isinstance(parsed, str):
                dropped.append(DroppedLine(line=line, reason=parsed))
                continue
            if parsed.kind not in req.predicate_kinds:
                dropped.append(DroppedLine(
                    line=line,
                    reason=f"predicate kind {parsed.kind!r} not requested",
                ))
                continue
            key = (offset, parsed.predicate_surface, parsed.kind)
            if key not in predicates:
                span = _find_surface(parsed.predicate_surface, window_text, offset)
                if span is None:
                    dropped.append(DroppedLine(
                        line=line,
                        reason=f"predicate {parsed.predicate_surface!r} not in text",
                    ))
                    continue
                predicates[key] = Predicate(
                    surface=parsed.predicate_surface,
                    char_range=span,
                    kind=parsed.kind,
                )
            predicate = predicates[key]
            range_key = tuple(predicate.char_range)
            if range_key not in grouped:
                grouped[range_key] = (offset, window_text, [])
                group_order.append(range_key)
            grouped[range_key][2].append((parsed.question, parsed.answers))

    raw_output = "\n".join(raw_parts)
    range_to_predicate = {tuple(p.char_range): p for p in predicates.values()}
    qas: list[QAPair] = []
    index = 0
    for range_key in group_order:
        predicate = range_to_predicate[range_key]
        window_offset, window_text, rows = grouped[range_key]
        for question, answer_surfaces in rows:
            answers = []
            for surface in answer_surfaces:
                span = _find_surface(surface, window_text, window_offset)
                answers.append(Answer(surface=surface, char_range=span))
            qas.append(QAPair(
                id=f"{req.instance.id}/qa{index:03d}",
                predicate=predicate,
                question=question,
                answers=answers,
                status="accepted",
            ))
            index += 1

    if not qas:
        raise BackendMalformedError(
            "backend produced zero parseable QA lines", raw_output=raw_output
        )
    return Decomposition(
        instance_id=req.instance.id,
        qas=qas,
        backend_name=adapter.backend.name,
        raw_backend_output=raw_output,
        diagnostics=DecompositionDiagnostics(
            dropped_lines=len(dropped),
            dropped=dropped,
            prompt_template_hash=template.sha256,
        ),
    )


def _longest_common_prefix(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def shares_stem(question: str, predicate_surface: str) -> bool:
    """Whether some question token shares a character-level stem with the
    predicate surface (longest common prefix >= 4, capped by word length)."""
    surface = predicate_surface.lower()
    tokens = re.findall(r"[a-z']+", question.lower())
    for token in tokens[1:]:  # skip the wh-word
        required = min(STEM_PREFIX, len(token), len(surface))
        if required and _longest_common_prefix(token, surface) >= required:
            return True
    return False


def filter_nonsensical(d: Decomposition, mode: FilterMode) -> Decomposition:
    """Triage nonsensical QAs.

    Heuristic mode rejects QAs whose question shares no stem with its
    predicate; it is deliberately cheap and known to pass some nonsense
    (e.g. near-miss nominalizations), so mark-for-review mode queues every
    QA for human triage instead.
    """
    if mode == "mark-for-review":
        qas = [qa.model_copy(update={"status": "pending-review"}) for qa in d.qas]
    else:
        qas = []
        for qa in d.qas:
            if shares_stem(qa.question, qa.predicate.surface):
                qas.append(qa)
            else:
                qas.append(qa.model_copy(update={"status": "rejected-nonsensical"}))
    return d.model_copy(update={"qas": qas})


def rule_based_affirmative(qa: QAPair) -> str:
    """Fallback rendering: strip the wh-word and '?', prepend the answer."""
    question = qa.question.strip().rstrip("?").strip()
    parts = question.split(None, 1)
    rest = parts[1] if len(parts) > 1 else ""
    answer_text = "; ".join(a.surface for a in qa.answers)
    return f"{answer_text} {rest}".strip()


def to_affirmative(qa: QAPair, adapter: Optional[BackendAdapter] = None,
                   template_id: str = "affirmative-default") -> str:
    """Declarative rendering of an accepted QA, for the form ablation.

    Uses the backend when configured, otherwise the rule-based fallback.
    """
    if qa.status != "accepted":
        raise ValueError(f"QA {qa.id} is {qa.status}, not accepted")
    if adapter is None:
        return rule_based_affirmative(qa)
    template = load_template(template_id)
    qa_text = hypothesis_text(qa, form="qa")
    prompt = render_template(template.text, QA=qa_text)
    response = adapter.invoke({"op": "complete", "prompt": prompt})
    text = (response.get("text") or "").strip()
    if not text:
        raise BackendMalformedError(
            "backend returned an empty affirmative rendering", raw_output=qa_text
        )
    return text.splitlines()[0].strip()


def hypothesis_text(qa: QAPair, form: Literal["qa", "affirmative"] = "qa") -> str:
    """Hypothesis string for entailment: question plus answers, or the
    stored affirmative rendering."""
    if qa.status != "accepted":
        raise ValueError(f"QA {qa.id} is {qa.status}, not accepted")
    if form == "qa":
        answer_text = "; ".join(a.surface for a in qa.answers)
        return f"{qa.question} {answer_text}"
    if qa.affirmative is None:
        raise MissingAffirmativeError(
            f"QA {qa.id} has no stored affirmative rendering"
        )
    return qa.affirmative


def with_affirmatives(d: Decomposition,
                      adapter: Optional[BackendAdapter] = None) -> Decomposition:
    """Attach affirmative renderings to every accepted QA."""
    qas = []
    for qa in d.qas:
        if qa.status == "accepted" and qa.affirmative is None:
            qas.append(qa.model_copy(update={"affirmative": to_affirmative(qa, adapter)}))
        else:
            qas.append(qa)
    return d.model_copy(update={"qas": qas})
