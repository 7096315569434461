"""Judge whether each QA hypothesis is supported by the reference text.

The premise is always the reference text; the hypothesis is either the
question-answer concatenation or its affirmative rendering. Prompted
backends are scored from first-token Yes/No likelihoods when available
(renormalized so scores compare across backends), otherwise from the
leading word of the text response. The supported threshold is fixed at
0.5 with no per-dataset tuning.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from .backends import BackendAdapter, ModelBackend, build_adapter
from .decompose import Decomposition, hypothesis_text
from .errors import QafactError, UnparseableResponseError
from .model import Instance, Judgment, model_judgment
from .templates import load_template, render_template

HypothesisForm = Literal["qa", "affirmative"]

SUPPORT_THRESHOLD = 0.5

_FORM_TEMPLATES = {
    "qa": ("entailment-qa", "QA"),
    "affirmative": ("entailment-affirmative", "STATEMENT"),
}


class EntailmentQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    premise: str
    hypothesis: str
    form: HypothesisForm = "qa"

    @model_validator(mode="after")
    def _non_empty(self) -> "EntailmentQuery":
        if not self.premise.strip():
            raise ValueError("premise must be non-empty")
        if not self.hypothesis.strip():
            raise ValueError("hypothesis must be non-empty")
        return self


def render_prompt(query: EntailmentQuery) -> str:
    """Instantiate the verification prompt for a query, slot-for-slot.

    The QA form fills the ARTICLE/QA template; the affirmative form uses
    the parallel template with STATEMENT in place of QA.
    """
    template_id, slot = _FORM_TEMPLATES[query.form]
    template = load_template(template_id)
    return render_template(
        template.text, ARTICLE=query.premise, **{slot: query.hypothesis}
    )


def _score_from_token_probs(token_probs: dict[str, float]) -> Optional[float]:
    """Renormalized P(Yes) / (P(Yes) + P(No)) over first-token likelihoods."""
    p_yes = sum(p for token, p in token_probs.items()
                if token.strip().lower() == "yes")
    p_no = sum(p for token, p in token_probs.items()
               if token.strip().lower() == "no")
    if p_yes + p_no == 0:
        return None
    return p_yes / (p_yes + p_no)


def _score_from_text(text: str) -> float:
    words = text.strip().split(None, 1)
    first = words[0].strip(".,:;!\"'").lower() if words else ""
    if first == "yes":
        return 1.0
    if first == "no":
        return 0.0
    raise UnparseableResponseError(
        "response starts with neither Yes nor No and no probabilities available",
        raw_output=text,
    )


def judge(query: EntailmentQuery, backend: ModelBackend,
          adapter: Optional[BackendAdapter] = None,
          qa_id: str = "") -> Judgment:
    """Produce one support Judgment for a hypothesis against the premise."""
    adapter = adapter or build_adapter(backend)
    if backend.kind == "score-endpoint":
        response = adapter.invoke({
            "op": "score",
            "premise": query.premise,
            "hypothesis": query.hypothesis,
        })
        score = float(response["score"])
    else:
        prompt = render_prompt(query)
        response = adapter.invoke({"op": "complete", "prompt": prompt})
        token_probs = response.get("token_probs")
        score = _score_from_token_probs(token_probs) if token_probs else None
        if score is None:
            score = _score_from_text(response.get("text", "") or "")
    return model_judgment(qa_id=qa_id, score=score, source_detail=backend.name)


class SkippedQA(BaseModel):
    model_config = ConfigDict(frozen=True)

    qa_id: str
    status: str


class JudgeFailure(BaseModel):
    model_config = ConfigDict(frozen=True)

    qa_id: str
    error: str
    message: str


class JudgeAllResult(BaseModel):
    """Order-stable judgments plus the skip report and error manifest."""

    model_config = ConfigDict(frozen=True)

    judgments: list[Judgment]
    skipped: list[SkippedQA] = []
    errors: list[JudgeFailure] = []


def judge_all(decomposition: Decomposition, instance: Instance,
              backend: ModelBackend, form: HypothesisForm = "qa",
              adapter: Optional[BackendAdapter] = None,
              parallelism: Optional[int] = None) -> JudgeAllResult:
    """Judge every accepted QA of a decomposition, preserving QA order.

    Pending-review and rejected QAs are skipped and reported; per-QA
    backend failures go to the error manifest and the remaining judgments
    are still returned.
    """
    adapter = adapter or build_adapter(backend)
    skipped = [
        SkippedQA(qa_id=qa.id, status=qa.status)
        for qa in decomposition.qas
        if qa.status != "accepted"
    ]
    accepted = decomposition.accepted()

    def run_one(qa):
        query = EntailmentQuery(
            premise=instance.reference,
            hypothesis=hypothesis_text(qa, form=form),
            form=form,
        )
        return judge(query, backend, adapter=adapter, qa_id=qa.id)

    workers = max(1, min(parallelism or backend.parallelism, len(accepted) or 1))
    outcomes: list[tuple[str, Optional[Judgment], Optional[Exception]]] = []
    if workers == 1:
        for qa in accepted:
            try:
                outcomes.append((qa.id, run_one(qa), None))
            except QafactError as exc:
                outcomes.append((qa.id, None, exc))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(qa.id, pool.submit(run_one, qa)) for qa in accepted]
            for qa_id, future in futures:
                try:
                    outcomes.append((qa_id, future.result(), None))
                except QafactError as exc:
                    outcomes.append((qa_id, None, exc))

    judgments = [j for _, j, _ in outcomes if j is not None]
    errors = [
        JudgeFailure(qa_id=qa_id, error=type(exc).__name__, message=str(exc))
        for qa_id, _, exc in outcomes
        if exc is not None
    ]
    return JudgeAllResult(judgments=judgments, skipped=skipped, errors=errors)


def cited_response_premise(sources: list[str]) -> str:
    """Reference text for cited-response tasks: the cited sources
    concatenated in order, deduplicated, separated by blank lines."""
    seen: set[str] = set()
    ordered: list[str] = []
    for source in sources:
        if source not in seen:
            seen.add(source)
            ordered.append(source)
    return "\n\n".join(ordered)
