"""Evaluation mathematics: balanced accuracy, ROC-AUC, Fleiss' kappa,
Spearman correlation, and character-span IOU matching.

All functions are pure. AUC uses the rank-based Mann-Whitney computation
(the pair-counting definition serves as the independent test oracle);
the Spearman p-value comes from a seeded permutation test, which stays
valid at small sample sizes where the t-approximation does not.
"""

from __future__ import annotations

import math
import random
from typing import Iterable, NamedTuple, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, model_validator

from .errors import (
    ConstantInputError,
    DegenerateAgreementError,
    DegenerateClassError,
)
from .model import CharRange, JudgmentLabel


class ConfusionCounts(BaseModel):
    """Binary confusion counts with 'supported' as the positive class."""

    model_config = ConfigDict(frozen=True)

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @model_validator(mode="after")
    def _non_negative(self) -> "ConfusionCounts":
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        return self


def confusion_counts(
    pairs: Iterable[tuple[JudgmentLabel, JudgmentLabel]],
) -> ConfusionCounts:
    """Count (predicted, gold) label pairs into a confusion table."""
    tp = fp = tn = fn = 0
    for pred, gold in pairs:
        if gold == "supported":
            if pred == "supported":
                tp += 1
            else:
                fn += 1
        else:
            if pred == "supported":
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def balanced_accuracy(c: ConfusionCounts) -> float:
    """Mean of true-positive rate and true-negative rate."""
    if c.tp + c.fn == 0 or c.tn + c.fp == 0:
        raise DegenerateClassError(
            "balanced accuracy needs at least one item of each gold class"
        )
    return 0.5 * (c.tp / (c.tp + c.fn) + c.tn / (c.tn + c.fp))


def _as_positive(gold: Union[str, bool]) -> bool:
    if isinstance(gold, bool):
        return gold
    return gold == "supported"


def _average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties assigned the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def roc_auc(scores: Sequence[tuple[float, Union[str, bool]]]) -> float:
    """Probability that a random positive outscores a random negative.

    Ranks-based Mann-Whitney statistic; score ties count half. Equals the
    fraction of (positive, negative) pairs won, which is what the test
    oracle computes by brute force.
    """
    values = [s for s, _ in scores]
    positives = [_as_positive(g) for _, g in scores]
    n_pos = sum(positives)
    n_neg = len(scores) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError(
            "ROC-AUC needs at least one positive and one negative"
        )
    ranks = _average_ranks(values)
    rank_sum_pos = sum(r for r, pos in zip(ranks, positives) if pos)
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


class RatingTable(BaseModel):
    """Items-by-categories matrix of annotator counts for Fleiss' kappa.

    Categories are [supported, not-supported]; every row must sum to the
    same number of raters.
    """

    model_config = ConfigDict(frozen=True)

    rows: list[list[int]]

    @model_validator(mode="after")
    def _check_shape(self) -> "RatingTable":
        if len(self.rows) < 2:
            raise ValueError("rating table needs at least 2 items")
        widths = {len(r) for r in self.rows}
        if len(widths) != 1:
            raise ValueError("all rows must have the same category count")
        sums = {sum(r) for r in self.rows}
        if len(sums) != 1:
            raise ValueError("every item must be rated by the same number of raters")
        n_raters = sums.pop()
        if n_raters < 2:
            raise ValueError("Fleiss' kappa needs at least 2 raters per item")
        if any(c < 0 for r in self.rows for c in r):
            raise ValueError("counts must be non-negative")
        return self

    @property
    def n_raters(self) -> int:
        return sum(self.rows[0])


def fleiss_kappa(table: RatingTable) -> float:
    """Chance-corrected agreement among a fixed number of raters."""
    rows = table.rows
    n = table.n_raters
    n_items = len(rows)
    n_categories = len(rows[0])

    p_bar = sum(
        sum(c * (c - 1) for c in row) / (n * (n - 1)) for row in rows
    ) / n_items
    category_totals = [
        sum(row[j] for row in rows) for j in range(n_categories)
    ]
    grand_total = n_items * n
    p_e = sum((t / grand_total) ** 2 for t in category_totals)
    if p_e == 1.0:
        raise DegenerateAgreementError(
            "expected agreement is 1 (all ratings in one category)"
        )
    return (p_bar - p_e) / (1 - p_e)


class SpearmanResult(NamedTuple):
    rho: float
    p_value: float


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation on average ranks."""
    if len(xs) != len(ys):
        raise ValueError("sequences must have equal length")
    if len(xs) < 3:
        raise ValueError("need at least 3 observations")
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    return _pearson(rx, ry)


def _pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise ConstantInputError("ranks are constant; correlation undefined")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def spearman(
    xs: Sequence[float],
    ys: Sequence[float],
    n_permutations: int = 10_000,
    seed: int = 0,
) -> SpearmanResult:
    """Spearman correlation with a two-sided permutation p-value.

    The p-value is the chance-of-at-least-as-extreme estimate with the
    standard +1 correction, over ``n_permutations`` seeded shuffles of the
    second sequence.
    """
    rho = spearman_rho(xs, ys)

    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    sx = math.sqrt(sum((x - mx) ** 2 for x in rx))
    sy = math.sqrt(sum((y - my) ** 2 for y in ry))
    cx = [x - mx for x in rx]

    rng = random.Random(seed)
    shuffled = list(ry)
    threshold = abs(rho) - 1e-12
    extreme = 0
    for _ in range(n_permutations):
        rng.shuffle(shuffled)
        sxy = sum(c * (y - my) for c, y in zip(cx, shuffled))
        if abs(sxy / (sx * sy)) >= threshold:
            extreme += 1
    p_value = (extreme + 1) / (n_permutations + 1)
    return SpearmanResult(rho=rho, p_value=p_value)


def span_iou(a: CharRange, b: CharRange) -> float:
    """Intersection-over-union of two character ranges in the same text."""
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    if union == 0:
        return 0.0
    return inter / union


class SpanMatch(NamedTuple):
    pred_index: int
    gold_index: int
    iou: float


def match_spans(
    pred_spans: Sequence[CharRange],
    gold_spans: Sequence[CharRange],
    threshold: float = 0.3,
) -> list[SpanMatch]:
    """Greedy best-first one-to-one pairing of spans with IOU >= threshold.

    Candidate pairs are taken in decreasing IOU order (ties broken by
    index) so no two predicted spans ever share a gold span.
    """
    candidates = []
    for i, p in enumerate(pred_spans):
        for j, g in enumerate(gold_spans):
            iou = span_iou(p, g)
            if iou >= threshold:
                candidates.append(SpanMatch(i, j, iou))
    candidates.sort(key=lambda m: (-m.iou, m.pred_index, m.gold_index))
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    matches: list[SpanMatch] = []
    for m in candidates:
        if m.pred_index in used_pred or m.gold_index in used_gold:
            continue
        used_pred.add(m.pred_index)
        used_gold.add(m.gold_index)
        matches.append(m)
    matches.sort(key=lambda m: m.pred_index)
    return matches


def rating_table_from_labels(
    items: Sequence[Sequence[JudgmentLabel]],
) -> RatingTable:
    """Build a [supported, not-supported] rating table from per-item label lists."""
    rows = [
        [sum(1 for x in labels if x == "supported"),
         sum(1 for x in labels if x != "supported")]
        for labels in items
    ]
    return RatingTable(rows=rows)


def optional_roc_auc(
    scores: Sequence[tuple[float, Union[str, bool]]],
) -> Optional[float]:
    """ROC-AUC, or None when a class is absent (degenerate input)."""
    try:
        return roc_auc(scores)
    except DegenerateClassError:
        return None
