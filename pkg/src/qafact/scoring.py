"""Aggregate per-QA judgments into instance-level consistency scores.

Scores are exact rationals (supported count over total count); the decimal
rendering is derived, never stored upstream of it, so reports cannot drift.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from typing import Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from .errors import EmptyJudgmentsError, MismatchedReferenceError
from .model import Judgment, JudgmentLabel

ScoreSource = Literal["human-majority", "model", "single-annotator"]
MajorityOutcome = Literal["supported", "not-supported", "tie"]


class ConsistencyScore(BaseModel):
    """Fraction of supported QAs for one instance.

    ``supported``/``total`` carry the exact rational; ``value`` is its
    decimal rendering.
    """

    model_config = ConfigDict(frozen=True)

    instance_id: str
    supported: int
    total: int
    value: float
    source: ScoreSource

    @model_validator(mode="after")
    def _check(self) -> "ConsistencyScore":
        if self.total < 1:
            raise ValueError("total_count must be >= 1")
        if not 0 <= self.supported <= self.total:
            raise ValueError("supported_count must be within [0, total]")
        if self.value != self.supported / self.total:
            raise ValueError("value must equal supported/total")
        return self

    @property
    def exact(self) -> Fraction:
        return Fraction(self.supported, self.total)


class PairDiff(BaseModel):
    """Difference between the consistency scores of two generations that
    share a reference text."""

    model_config = ConfigDict(frozen=True)

    instance_pair_id: str
    value: float

    @model_validator(mode="after")
    def _check(self) -> "PairDiff":
        if not -1.0 <= self.value <= 1.0:
            raise ValueError("pair difference must lie in [-1, 1]")
        return self


def _infer_source(judgments: Sequence[Judgment]) -> ScoreSource:
    sources = {j.source for j in judgments}
    if sources == {"model"}:
        return "model"
    annotators = {j.source_detail for j in judgments if j.source == "human"}
    if sources == {"human"} and len(annotators) == 1:
        return "single-annotator"
    return "human-majority"


def consistency_score(
    judgments: Sequence[Judgment],
    instance_id: str,
    source: Optional[ScoreSource] = None,
) -> ConsistencyScore:
    """Percentage of supported QAs over all judged QAs, as an exact rational.

    The judgments must all belong to ``instance_id``; an empty list is an
    error because a zero-QA text signals upstream failure, not perfect
    consistency.
    """
    if not judgments:
        raise EmptyJudgmentsError(
            f"no judgments for instance {instance_id!r}; score undefined"
        )
    supported = sum(1 for j in judgments if j.label == "supported")
    total = len(judgments)
    return ConsistencyScore(
        instance_id=instance_id,
        supported=supported,
        total=total,
        value=supported / total,
        source=source or _infer_source(judgments),
    )


def pair_diff(
    s1: ConsistencyScore,
    s2: ConsistencyScore,
    pair_id: Optional[str] = None,
    references: Optional[tuple[str, str]] = None,
) -> PairDiff:
    """Score difference s1 - s2 for two generations over one reference.

    When the caller can supply both reference texts, they are checked for
    equality; otherwise sharing a reference is the caller's precondition.
    """
    if references is not None and references[0] != references[1]:
        raise MismatchedReferenceError(
            f"{s1.instance_id} and {s2.instance_id} have different references"
        )
    diff = s1.exact - s2.exact
    return PairDiff(
        instance_pair_id=pair_id or f"{s1.instance_id}::{s2.instance_id}",
        value=float(diff),
    )


def majority_label(human_judgments: Sequence[Judgment]) -> MajorityOutcome:
    """Strict majority label among human judgments for one QA.

    Ties are reported as ``tie`` and are excluded from gold downstream;
    with the standard 3 annotators a tie cannot occur.
    """
    if not human_judgments:
        raise ValueError("majority vote needs at least one judgment")
    non_human = [j for j in human_judgments if j.source != "human"]
    if non_human:
        raise ValueError("majority vote is defined over human judgments only")
    counts = Counter(j.label for j in human_judgments)
    sup = counts.get("supported", 0)
    unsup = counts.get("not-supported", 0)
    if sup > unsup:
        return "supported"
    if unsup > sup:
        return "not-supported"
    return "tie"


def majority_judgment(
    qa_id: str, human_judgments: Sequence[Judgment]
) -> Optional[Judgment]:
    """Collapse human judgments on one QA into a gold judgment, or None on a tie."""
    outcome = majority_label(human_judgments)
    if outcome == "tie":
        return None
    label: JudgmentLabel = outcome
    voters = sorted(j.source_detail for j in human_judgments)
    return Judgment(
        qa_id=qa_id,
        score=1.0 if label == "supported" else 0.0,
        label=label,
        source="human",
        source_detail=f"majority:{','.join(voters)}",
    )
