"""Benchmark loading, storage, deterministic splits, and import adapters.

The generic JSONL layout is the single source of truth: a directory with
``instances.jsonl`` plus optional ``qas.jsonl`` and ``gold.jsonl``
siblings. The three task-specific adapters are read-only importers that
map their fields onto it. Splits are seeded-hash based so they survive
re-import on any machine.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from .decompose import Decomposition
from .entailment import cited_response_premise
from .errors import ImportFileError
from .jsonl import make_header, read_jsonl, write_jsonl
from .model import Instance, JudgmentLabel, validate_instance

BenchmarkName = Literal[
    "cliff-style", "factscore-style", "verifiability-style", "generic"
]
SplitTag = Literal["dev", "test"]


class Benchmark(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: BenchmarkName = "generic"
    instances: list[Instance] = []
    decompositions: list[Decomposition] = []
    gold: dict[str, JudgmentLabel] = {}
    split_tags: dict[str, SplitTag] = {}
    split_seed: Optional[int] = None


class ImportIssue(BaseModel):
    model_config = ConfigDict(frozen=True)

    line: int
    message: str


class ImportResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    benchmark: Benchmark
    issues: list[ImportIssue] = []


def _split_key(seed: int, instance_id: str) -> str:
    return hashlib.sha256(f"{seed}\x00{instance_id}".encode("utf-8")).hexdigest()


def split_ids(ids: list[str], seed: int) -> dict[str, SplitTag]:
    """Partition ids 50/50 (dev gets the odd one) by seeded hash order."""
    ranked = sorted(ids, key=lambda i: (_split_key(seed, i), i))
    n_dev = math.ceil(len(ranked) / 2)
    tags: dict[str, SplitTag] = {}
    for rank, instance_id in enumerate(ranked):
        tags[instance_id] = "dev" if rank < n_dev else "test"
    return tags


def split(benchmark: Benchmark, seed: int) -> Benchmark:
    """Assign dev/test tags; stable across runs and machines for one seed."""
    tags = split_ids([i.id for i in benchmark.instances], seed)
    return benchmark.model_copy(update={"split_tags": tags, "split_seed": seed})


def save_benchmark(benchmark: Benchmark, directory: Union[str, Path]) -> None:
    directory = Path(directory)
    write_jsonl(
        directory / "instances.jsonl",
        benchmark.instances,
        header=make_header(
            "instances",
            name=benchmark.name,
            split_seed=benchmark.split_seed,
            split_tags=benchmark.split_tags,
        ),
    )
    if benchmark.decompositions:
        write_jsonl(
            directory / "qas.jsonl",
            benchmark.decompositions,
            header=make_header("qas"),
        )
    if benchmark.gold:
        tasks = {i.id: i.task for i in benchmark.instances}
        qa_owner = {
            qa.id: d.instance_id
            for d in benchmark.decompositions
            for qa in d.qas
        }
        rows = []
        for qa_id, label in benchmark.gold.items():
            instance_id = qa_owner.get(qa_id, qa_id.rsplit("/", 1)[0])
            rows.append({
                "qa_id": qa_id,
                "label": label,
                "instance_id": instance_id,
                "split": benchmark.split_tags.get(instance_id),
                "task": tasks.get(instance_id),
            })
        write_jsonl(directory / "gold.jsonl", rows, header=make_header("gold"))


def load_benchmark(directory: Union[str, Path]) -> Benchmark:
    directory = Path(directory)
    header, rows = read_jsonl(directory / "instances.jsonl")
    header = header or {}
    instances = [Instance.model_validate(row) for row in rows]
    decompositions: list[Decomposition] = []
    qas_path = directory / "qas.jsonl"
    if qas_path.exists():
        _, qa_rows = read_jsonl(qas_path)
        decompositions = [Decomposition.model_validate(row) for row in qa_rows]
    gold: dict[str, JudgmentLabel] = {}
    gold_path = directory / "gold.jsonl"
    if gold_path.exists():
        _, gold_rows = read_jsonl(gold_path)
        for row in gold_rows:
            gold[row["qa_id"]] = row["label"]
    return Benchmark(
        name=header.get("name", "generic"),
        instances=instances,
        decompositions=decompositions,
        gold=gold,
        split_tags=header.get("split_tags", {}),
        split_seed=header.get("split_seed"),
    )


def _import_generic(path: Path) -> ImportResult:
    if path.is_dir():
        return ImportResult(benchmark=load_benchmark(path))
    header, rows = read_jsonl(path)
    issues: list[ImportIssue] = []
    instances: list[Instance] = []
    for lineno, row in enumerate(rows, start=2 if header is not None else 1):
        try:
            instance = Instance.model_validate(row)
        except ValidationError as exc:
            issues.append(ImportIssue(line=lineno, message=str(exc)))
            continue
        violations = validate_instance(instance)
        if violations:
            issues.append(ImportIssue(
                line=lineno,
                message="; ".join(f"{v.code}: {v.message}" for v in violations),
            ))
            continue
        instances.append(instance)
    header = header or {}
    return ImportResult(
        benchmark=Benchmark(
            name="generic",
            instances=instances,
            split_tags=header.get("split_tags", {}),
            split_seed=header.get("split_seed"),
        ),
        issues=issues,
    )


def _require(row: dict, *names: str) -> list[str]:
    return [n for n in names if not row.get(n)]


def _import_cliff(path: Path) -> ImportResult:
    """Summarization records: {id, source, summary, model?}."""
    _, rows = read_jsonl(path)
    issues: list[ImportIssue] = []
    instances: list[Instance] = []
    for lineno, row in enumerate(rows, start=1):
        missing = _require(row, "id", "source", "summary")
        if missing:
            issues.append(ImportIssue(
                line=lineno, message=f"missing fields: {', '.join(missing)}"
            ))
            continue
        summary = row["summary"]
        instances.append(Instance(
            id=str(row["id"]),
            reference=row["source"],
            generation=summary,
            task="summarization",
            model_name=row.get("model"),
            sentence_spans=[(0, len(summary))],
        ))
    return ImportResult(
        benchmark=Benchmark(name="cliff-style", instances=instances),
        issues=issues,
    )


def _import_factscore(path: Path) -> ImportResult:
    """Biography records: {topic, wikipedia_text, output, model?}."""
    _, rows = read_jsonl(path)
    issues: list[ImportIssue] = []
    instances: list[Instance] = []
    for lineno, row in enumerate(rows, start=1):
        missing = _require(row, "topic", "wikipedia_text", "output")
        if missing:
            issues.append(ImportIssue(
                line=lineno, message=f"missing fields: {', '.join(missing)}"
            ))
            continue
        model = row.get("model")
        instance_id = f"{row['topic']}--{model}" if model else str(row["topic"])
        instances.append(Instance(
            id=instance_id,
            reference=row["wikipedia_text"],
            generation=row["output"],
            task="biography",
            model_name=model,
            sentence_spans=[tuple(s) for s in row.get("sentence_spans", [])],
        ))
    return ImportResult(
        benchmark=Benchmark(name="factscore-style", instances=instances),
        issues=issues,
    )


def _import_verifiability(path: Path) -> ImportResult:
    """Cited-response records: {id, response, sentences: [{text, sources}]}.

    The reference text is the concatenation of all cited sources, in
    citation order, deduplicated, separated by blank lines.
    """
    _, rows = read_jsonl(path)
    issues: list[ImportIssue] = []
    instances: list[Instance] = []
    for lineno, row in enumerate(rows, start=1):
        missing = _require(row, "id", "response")
        if missing or not row.get("sentences"):
            missing = missing + (["sentences"] if not row.get("sentences") else [])
            issues.append(ImportIssue(
                line=lineno, message=f"missing fields: {', '.join(missing)}"
            ))
            continue
        response = row["response"]
        sources: list[str] = []
        spans: list[tuple[int, int]] = []
        cursor = 0
        bad_sentence = None
        for sentence in row["sentences"]:
            text = sentence.get("text", "")
            index = response.find(text, cursor) if text else -1
            if index < 0:
                bad_sentence = text
                break
            spans.append((index, index + len(text)))
            cursor = index + len(text)
            sources.extend(sentence.get("sources", []))
        if bad_sentence is not None:
            issues.append(ImportIssue(
                line=lineno,
                message=f"sentence not found in response: {bad_sentence[:60]!r}",
            ))
            continue
        if not sources:
            issues.append(ImportIssue(line=lineno, message="no cited sources"))
            continue
        instances.append(Instance(
            id=str(row["id"]),
            reference=cited_response_premise(sources),
            generation=response,
            task="cited-response",
            model_name=row.get("model"),
            sentence_spans=spans,
        ))
    return ImportResult(
        benchmark=Benchmark(name="verifiability-style", instances=instances),
        issues=issues,
    )


_IMPORTERS = {
    "generic": _import_generic,
    "cliff-style": _import_cliff,
    "factscore-style": _import_factscore,
    "verifiability-style": _import_verifiability,
}


def import_benchmark(path: Union[str, Path],
                     format: BenchmarkName = "generic") -> ImportResult:
    """Import a dataset file in one of the supported formats.

    Per-record problems are collected as issues, not fatal; an unreadable
    file raises ImportFileError.
    """
    path = Path(path)
    if not path.exists():
        raise ImportFileError(f"file not found: {path}")
    importer = _IMPORTERS.get(format)
    if importer is None:
        raise ImportFileError(f"unknown import format {format!r}")
    return importer(path)


class BenchmarkStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    responses: int
    sentences: int
    qas: int
    qas_per_sentence: float
    predicates: int
    mixed_support_predicates: int
    mixed_support_fraction: Optional[float]


def stats(benchmark: Benchmark) -> BenchmarkStats:
    """Summary counts over a benchmark; QA counts cover accepted QAs only."""
    responses = len(benchmark.instances)
    sentences = sum(
        max(1, len(i.sentence_spans)) for i in benchmark.instances
    )
    qa_total = 0
    predicates = 0
    mixed = 0
    labeled_predicates = 0
    for decomposition in benchmark.decompositions:
        accepted = decomposition.accepted()
        qa_total += len(accepted)
        for _, group in decomposition.by_predicate():
            group_accepted = [qa for qa in group if qa.status == "accepted"]
            if not group_accepted:
                continue
            predicates += 1
            labels = {
                benchmark.gold[qa.id]
                for qa in group_accepted
                if qa.id in benchmark.gold
            }
            if labels:
                labeled_predicates += 1
                if len(labels) == 2:
                    mixed += 1
    return BenchmarkStats(
        responses=responses,
        sentences=sentences,
        qas=qa_total,
        qas_per_sentence=qa_total / sentences if sentences else 0.0,
        predicates=predicates,
        mixed_support_predicates=mixed,
        mixed_support_fraction=(
            mixed / labeled_predicates if labeled_predicates else None
        ),
    )
