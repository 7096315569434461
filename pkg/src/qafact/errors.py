"""Exception types shared across the toolkit.

Validation *findings* (e.g. a malformed instance) are returned as data, not
raised; these classes cover genuine failures: unreachable backends, broken
preconditions, undefined math.
"""

from __future__ import annotations


class QafactError(Exception):
    """Base class for all toolkit errors."""


class InstanceInvalidError(QafactError):
    """An operation received an instance that fails structural validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(f"{v.code}: {v.message}" for v in self.violations)
        super().__init__(f"invalid instance: {detail}")


class BackendUnreachableError(QafactError):
    """The model backend could not be reached or refused the request."""

    def __init__(self, message: str, raw_output: str = ""):
        self.raw_output = raw_output
        super().__init__(message)


class BackendMalformedError(QafactError):
    """The backend answered, but nothing usable could be parsed."""

    def __init__(self, message: str, raw_output: str = ""):
        self.raw_output = raw_output
        super().__init__(message)


class ReplayMissError(BackendUnreachableError):
    """A replay transcript has no entry for the issued request."""


class UnparseableResponseError(QafactError):
    """A text-only verdict started with neither Yes nor No."""

    def __init__(self, message: str, raw_output: str = ""):
        self.raw_output = raw_output
        super().__init__(message)


class MissingAffirmativeError(QafactError):
    """Affirmative form requested but no rendering is stored on the QA."""


class EmptyJudgmentsError(QafactError):
    """Consistency score is undefined over zero judgments."""


class MismatchedReferenceError(QafactError):
    """Pair difference requested for scores over different reference texts."""


class DegenerateClassError(QafactError):
    """A metric needs both classes present and one is missing."""


class DegenerateAgreementError(QafactError):
    """Fleiss' kappa is undefined when expected agreement is 1."""


class ConstantInputError(QafactError):
    """Rank correlation is undefined for a constant sequence."""


class StoreError(QafactError):
    """Base class for annotation store failures."""


class UnknownInstanceError(StoreError):
    pass


class UnknownRecordError(StoreError):
    pass


class UnknownSpanError(StoreError):
    pass


class UnknownQAError(StoreError):
    pass


class SpanNotCoveredError(StoreError):
    """Manual QA label attempted while an answer span is not covered."""


class RecordSubmittedError(StoreError):
    """Submitted records are immutable."""


class IncompleteRecordError(StoreError):
    """Submit attempted with unlabeled accepted QAs."""

    def __init__(self, qa_ids):
        self.qa_ids = list(qa_ids)
        super().__init__(f"unlabeled QAs: {', '.join(self.qa_ids)}")


class InsufficientAnnotatorsError(StoreError):
    pass


class VersionConflictError(StoreError):
    """Optimistic-concurrency check failed; the caller should refresh."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"version conflict: expected {expected}, store has {actual}")


class StoreCorruptError(StoreError):
    """The event log is damaged somewhere other than a torn tail."""


class ImportFileError(QafactError):
    """A dataset file could not be read or is not the declared format."""
