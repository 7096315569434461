"""qafact: localize factual inconsistencies in attributable text generation.

Generated text is decomposed into minimal predicate-argument question-answer
pairs; each pair is judged for support against the reference text (by model
backends or human annotators); judgments aggregate into consistency scores
and evaluation reports.
"""

from .backends import ModelBackend, build_adapter
from .decompose import (
    Decomposition,
    DecompositionRequest,
    decompose,
    filter_nonsensical,
    hypothesis_text,
    to_affirmative,
)
from .entailment import EntailmentQuery, judge, judge_all, render_prompt
from .model import (
    Answer,
    Instance,
    Judgment,
    Predicate,
    QAPair,
    SpanCoverage,
    validate_instance,
    validate_question,
)
from .scoring import (
    ConsistencyScore,
    PairDiff,
    consistency_score,
    majority_label,
    pair_diff,
)
from .metrics import (
    ConfusionCounts,
    RatingTable,
    balanced_accuracy,
    fleiss_kappa,
    roc_auc,
    span_iou,
    spearman,
)

__version__ = "0.1.0"
