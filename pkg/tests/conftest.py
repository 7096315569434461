"""Shared fixtures: the measles summary with its 12-QA decomposition and
reference labels, the two-predicate QA-SRL example sentence, and helpers that
build replay transcripts matching what the pipeline will actually ask."""

from __future__ import annotations

from pathlib import Path

import pytest

from qafact.backends import ModelBackend, build_adapter, write_transcript_entry
from qafact.decompose import DecompositionRequest, decompose, hypothesis_text
from qafact.entailment import EntailmentQuery, render_prompt
from qafact.model import Instance
from qafact.templates import load_template, render_template

MEASLES_SOURCE = (
    "Gareth Colfer-Williams, 25, died last week at his home in Swansea, the "
    "city at the centre of an epidemic of the disease which has reached 942 "
    "cases. But the examination was unable to establish whether measles was "
    "the main cause of his death. An inquest will be opened and adjourned on "
    "Tuesday to allow further tests. Public Health Wales said on Friday that "
    "laboratory tests confirmed a diagnosis of measles but further tests "
    "were needed to determine the cause of death."
)

MEASLES_SUMMARY = (
    "An inquest into the death of a man who died of measles has been opened "
    "and adjourned after a post-mortem examination failed to establish how "
    "he got the illness."
)

# One backend line per QA, grouped by predicate, in presentation order.
MEASLES_LINES = [
    "died\tWho died?\tA man\tverbal",
    "died\tHow someone died?\tfrom measles\tverbal",
    "failed\tWhat failed to do something?\ta post-mortem examination\tverbal",
    "failed\tWhat did something fail to do?\tto establish how he got the illness\tverbal",
    "got\tWho got something?\the; A man\tverbal",
    "got\tWhat did someone get?\tthe illness; measles\tverbal",
    "opened\tWhat has been opened?\tAn inquest into the death of a man\tverbal",
    "establish\tWhat didn't establish something?\ta post-mortem examination\tverbal",
    "establish\tWhat didn't something establish?\thow he got the illness\tverbal",
    "examination\tWho was examined?\tA man who died of measles\tnominal",
    "examination\tWhen was someone examined?\tpost-mortem\tnominal",
    "examination\tWhy was someone examined?\tto establish how he got the illness\tnominal",
]

# Support verdicts aligned with MEASLES_LINES: 7 of 12 supported.
MEASLES_VERDICTS = [
    "Yes", "No",
    "Yes", "No",
    "Yes", "Yes",
    "No",
    "Yes", "No",
    "Yes", "Yes", "No",
]

TWO_EVENT_SENTENCE = "Mary bought a book yesterday and gave it to John with a smile."

TWO_EVENT_LINES = [
    "bought\tWho bought something?\tMary\tverbal",
    "bought\tWhat did someone buy?\tA book\tverbal",
    "bought\tWhen did someone buy something?\tYesterday\tverbal",
    "gave\tWho gave something?\tMary\tverbal",
    "gave\tWho gave something to?\tJohn\tverbal",
    "gave\tWhat did someone give?\tA book\tverbal",
    "gave\tHow did someone give?\tWith a smile\tverbal",
]


def decompose_prompt(sentence: str,
                     kinds: tuple[str, ...] = ("verbal", "nominal", "copular"),
                     profile: str = "decompose-default") -> str:
    template = load_template(profile)
    return render_template(
        template.text, SENTENCE=sentence, PREDICATE_KINDS=", ".join(kinds)
    )


def make_decompose_transcript(path: Path, instance: Instance,
                              response_lines: list[str],
                              kinds: tuple[str, ...] = ("verbal", "nominal",
                                                        "copular")) -> None:
    """Record the decomposition exchange the pipeline will replay."""
    if instance.sentence_spans:
        windows = [
            instance.generation[start:end]
            for start, end in instance.sentence_spans
        ]
    else:
        windows = [instance.generation]
    # Single-window fixtures carry the whole response; multi-window ones
    # would need per-window line lists.
    assert len(windows) == 1
    write_transcript_entry(
        path,
        {"op": "complete", "prompt": decompose_prompt(windows[0], kinds)},
        {"text": "\n".join(response_lines), "token_probs": None},
        timestamp="1970-01-01T00:00:00+00:00",
    )


def make_judge_transcript(path: Path, instance: Instance, decomposition,
                          verdicts: dict[str, str], form: str = "qa") -> None:
    """Record one Yes/No text exchange per accepted QA."""
    for qa in decomposition.accepted():
        query = EntailmentQuery(
            premise=instance.reference,
            hypothesis=hypothesis_text(qa, form=form),
            form=form,
        )
        write_transcript_entry(
            path,
            {"op": "complete", "prompt": render_prompt(query)},
            {"text": verdicts[qa.id], "token_probs": None},
            timestamp="1970-01-01T00:00:00+00:00",
        )


def replay_backend(path: Path, name: str = "replay-fixture") -> ModelBackend:
    return ModelBackend(name=name, kind="replay", transcript=str(path))


@pytest.fixture
def measles_instance() -> Instance:
    return Instance(
        id="cliff/measles",
        reference=MEASLES_SOURCE,
        generation=MEASLES_SUMMARY,
        task="summarization",
        model_name="bart",
        sentence_spans=[(0, len(MEASLES_SUMMARY))],
    )


@pytest.fixture
def measles_decomposition(measles_instance, tmp_path):
    transcript = tmp_path / "measles-decompose.jsonl"
    make_decompose_transcript(transcript, measles_instance, MEASLES_LINES)
    backend = replay_backend(transcript, name="replay-parser")
    return decompose(
        DecompositionRequest(instance=measles_instance),
        build_adapter(backend),
    )


@pytest.fixture
def measles_verdicts(measles_decomposition) -> dict[str, str]:
    qas = measles_decomposition.qas
    assert len(qas) == len(MEASLES_VERDICTS)
    return {qa.id: verdict for qa, verdict in zip(qas, MEASLES_VERDICTS)}


@pytest.fixture
def two_event_instance() -> Instance:
    return Instance(
        id="qasrl/two-events",
        reference=TWO_EVENT_SENTENCE,
        generation=TWO_EVENT_SENTENCE,
        task="other",
    )


@pytest.fixture
def two_event_decomposition(two_event_instance, tmp_path):
    transcript = tmp_path / "two-event-decompose.jsonl"
    make_decompose_transcript(transcript, two_event_instance, TWO_EVENT_LINES)
    backend = replay_backend(transcript, name="replay-parser")
    return decompose(
        DecompositionRequest(instance=two_event_instance),
        build_adapter(backend),
    )
