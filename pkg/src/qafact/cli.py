"""Command-line entry point for the full pipeline and reports.

The pipeline is plain files: decompose -> judge -> score -> evaluate, each
stage reading and writing JSONL so intermediate results stay inspectable
and cacheable. Machine-readable progress goes to stderr as JSONL events.
Exit codes: 0 success, 1 fatal, 2 partial (with --best-effort).
"""

from __future__ import annotations

import json
import sys
from collections import Counter, defaultdict
from pathlib import Path
from typing import Optional

import click

from . import dataset as ds
from .backends import ModelBackend, build_adapter
from .decompose import (
    ALL_PREDICATE_KINDS,
    Decomposition,
    DecompositionRequest,
    decompose,
    filter_nonsensical,
    with_affirmatives,
)
from .entailment import judge_all
from .errors import QafactError
from .jsonl import iter_jsonl, make_header, read_jsonl, write_jsonl
from .manifest import RunManifest, start_manifest
from .metrics import (
    balanced_accuracy,
    confusion_counts,
    fleiss_kappa,
    optional_roc_auc,
    rating_table_from_labels,
    spearman,
)
from .model import Instance, Judgment
from .scoring import consistency_score, majority_judgment
from .templates import load_template

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


def emit(event: str, **payload) -> None:
    """One machine-readable progress event on stderr."""
    line = {"event": event}
    line.update(payload)
    print(json.dumps(line, ensure_ascii=False), file=sys.stderr)


def emit_manifest(manifest: RunManifest) -> None:
    emit("manifest", manifest_id=manifest.manifest_id,
         **manifest.model_dump(mode="json"))


def _load_backend(name: str, backends_path: Optional[str]) -> ModelBackend:
    """Resolve --backend; 'replay:PATH' builds a replay backend inline."""
    if name.startswith("replay:"):
        path = name.split(":", 1)[1]
        return ModelBackend(
            name=f"replay:{Path(path).name}", kind="replay", transcript=path
        )
    if not backends_path:
        raise click.UsageError(
            f"backend {name!r} needs --backends FILE (or use replay:PATH)"
        )
    config = json.loads(Path(backends_path).read_text(encoding="utf-8"))
    if name not in config:
        raise click.UsageError(f"backend {name!r} not in {backends_path}")
    entry = dict(config[name])
    entry.setdefault("name", name)
    return ModelBackend.model_validate(entry)


def _load_instances(path: str) -> dict[str, Instance]:
    _, rows = read_jsonl(path)
    instances = {}
    for row in rows:
        instance = Instance.model_validate(row)
        instances[instance.id] = instance
    return instances


@click.group()
def main() -> None:
    """Localize factual inconsistencies via predicate-argument QA pairs."""


@main.command("decompose")
@click.option("--in", "in_path", required=True, help="instances.jsonl")
@click.option("--backend", "backend_name", required=True)
@click.option("--backends", "backends_path", default=None,
              help="JSON file of backend configurations")
@click.option("--out", "out_path", required=True)
@click.option("--kinds", default=",".join(ALL_PREDICATE_KINDS),
              help="comma-separated predicate kinds to request")
@click.option("--profile", default="decompose-default",
              help="prompt template id for decomposition")
@click.option("--filter", "filter_mode",
              type=click.Choice(["none", "heuristic", "mark-for-review"]),
              default="none")
@click.option("--affirmatives", type=click.Choice(["none", "rule"]),
              default="none", help="attach affirmative renderings")
@click.option("--record", "record_path", default=None,
              help="record backend exchanges to this transcript")
@click.option("--parallel", type=int, default=1,
              help="instances decomposed concurrently")
@click.option("--best-effort", is_flag=True)
def decompose_cmd(in_path, backend_name, backends_path, out_path, kinds,
                  profile, filter_mode, affirmatives, record_path, parallel,
                  best_effort) -> None:
    """Decompose generated texts into predicate-argument QA pairs."""
    from concurrent.futures import ThreadPoolExecutor

    backend = _load_backend(backend_name, backends_path)
    adapter = build_adapter(backend, record_to=record_path)
    template = load_template(profile)
    kind_list = [k.strip() for k in kinds.split(",") if k.strip()]
    manifest = start_manifest(
        "decompose",
        {"in": Path(in_path).name, "kinds": kind_list, "profile": profile,
         "filter": filter_mode, "affirmatives": affirmatives},
        prompt_template_hashes={profile: template.sha256},
        backend_names=[backend.name],
    )
    emit_manifest(manifest)
    instances = [Instance.model_validate(row) for _, row in iter_jsonl(in_path)]

    def run_one(instance: Instance) -> Decomposition:
        request = DecompositionRequest(
            instance=instance, predicate_kinds=kind_list,
            few_shot_profile=profile,
        )
        decomposition = decompose(request, adapter)
        if filter_mode != "none":
            decomposition = filter_nonsensical(decomposition, filter_mode)
        if affirmatives == "rule":
            decomposition = with_affirmatives(decomposition)
        return decomposition

    outcomes: list[tuple[Instance, Decomposition | None, QafactError | None]]
    if parallel > 1 and len(instances) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            futures = [(i, pool.submit(run_one, i)) for i in instances]
            outcomes = []
            for instance, future in futures:
                try:
                    outcomes.append((instance, future.result(), None))
                except QafactError as exc:
                    outcomes.append((instance, None, exc))
    else:
        outcomes = []
        for instance in instances:
            try:
                outcomes.append((instance, run_one(instance), None))
            except QafactError as exc:
                outcomes.append((instance, None, exc))
                if not best_effort:
                    break

    decompositions: list[Decomposition] = []
    failures = 0
    for instance, decomposition, error in outcomes:
        if error is not None:
            failures += 1
            emit("instance-error", instance_id=instance.id,
                 error=type(error).__name__, message=str(error))
            if not best_effort:
                emit("fatal", instance_id=instance.id)
                sys.exit(EXIT_FATAL)
            continue
        decompositions.append(decomposition)
        emit("decomposed", instance_id=instance.id,
             qas=len(decomposition.qas),
             dropped_lines=decomposition.diagnostics.dropped_lines)

    write_jsonl(out_path, decompositions,
                header=make_header("qas", manifest_id=manifest.manifest_id))
    emit("done", command="decompose", instances=len(decompositions),
         failures=failures)
    sys.exit(EXIT_PARTIAL if failures else EXIT_OK)


@main.command("judge")
@click.option("--qas", "qas_path", required=True, help="qas.jsonl")
@click.option("--instances", "instances_path", required=True,
              help="instances.jsonl (for the reference texts)")
@click.option("--backend", "backend_name", required=True)
@click.option("--backends", "backends_path", default=None)
@click.option("--form", type=click.Choice(["qa", "affirmative"]), default="qa")
@click.option("--out", "out_path", required=True)
@click.option("--parallel", type=int, default=None)
@click.option("--record", "record_path", default=None)
@click.option("--best-effort", is_flag=True)
def judge_cmd(qas_path, instances_path, backend_name, backends_path, form,
              out_path, parallel, record_path, best_effort) -> None:
    """Judge whether each accepted QA is supported by its reference text."""
    backend = _load_backend(backend_name, backends_path)
    adapter = build_adapter(backend, record_to=record_path)
    instances = _load_instances(instances_path)
    manifest = start_manifest(
        "judge",
        {"qas": Path(qas_path).name, "form": form},
        backend_names=[backend.name],
    )
    emit_manifest(manifest)

    judgments: list[Judgment] = []
    error_count = 0
    skipped_count = 0
    for _, row in iter_jsonl(qas_path):
        decomposition = Decomposition.model_validate(row)
        instance = instances.get(decomposition.instance_id)
        if instance is None:
            error_count += 1
            emit("instance-error", instance_id=decomposition.instance_id,
                 error="UnknownInstance", message="not in --instances file")
            if not best_effort:
                sys.exit(EXIT_FATAL)
            continue
        result = judge_all(decomposition, instance, backend, form=form,
                           adapter=adapter, parallelism=parallel)
        judgments.extend(result.judgments)
        skipped_count += len(result.skipped)
        for failure in result.errors:
            error_count += 1
            emit("qa-error", qa_id=failure.qa_id, error=failure.error,
                 message=failure.message)
        if result.skipped:
            emit("skipped", instance_id=decomposition.instance_id,
                 qa_ids=[s.qa_id for s in result.skipped])
        emit("judged", instance_id=decomposition.instance_id,
             judgments=len(result.judgments), errors=len(result.errors))

    write_jsonl(out_path, judgments,
                header=make_header("judgments", form=form,
                                   manifest_id=manifest.manifest_id))
    emit("done", command="judge", judgments=len(judgments),
         errors=error_count, skipped=skipped_count)
    if error_count and not best_effort:
        sys.exit(EXIT_FATAL)
    sys.exit(EXIT_PARTIAL if error_count else EXIT_OK)


@main.command("score")
@click.option("--judgments", "judgments_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--qas", "qas_path", default=None,
              help="qas.jsonl for explicit QA-to-instance mapping")
def score_cmd(judgments_path, out_path, qas_path) -> None:
    """Aggregate per-QA judgments into instance consistency scores."""
    manifest = start_manifest(
        "score", {"judgments": Path(judgments_path).name})
    emit_manifest(manifest)
    qa_owner: dict[str, str] = {}
    if qas_path:
        for _, row in iter_jsonl(qas_path):
            decomposition = Decomposition.model_validate(row)
            for qa in decomposition.qas:
                qa_owner[qa.id] = decomposition.instance_id

    by_instance: dict[str, dict[str, list[Judgment]]] = defaultdict(
        lambda: defaultdict(list)
    )
    order: list[str] = []
    for _, row in iter_jsonl(judgments_path):
        judgment = Judgment.model_validate(row)
        instance_id = qa_owner.get(
            judgment.qa_id, judgment.qa_id.rsplit("/", 1)[0]
        )
        if instance_id not in by_instance:
            order.append(instance_id)
        by_instance[instance_id][judgment.qa_id].append(judgment)

    scores = []
    for instance_id in order:
        per_qa = by_instance[instance_id]
        collapsed: list[Judgment] = []
        aggregated = False
        for qa_id, group in per_qa.items():
            if len(group) == 1:
                collapsed.append(group[0])
                continue
            aggregated = True
            gold = majority_judgment(qa_id, group)
            if gold is None:
                emit("tie-excluded", qa_id=qa_id, votes=len(group))
                continue
            collapsed.append(gold)
        if not collapsed:
            emit("instance-error", instance_id=instance_id,
                 error="EmptyJudgments", message="no usable judgments")
            continue
        source = "human-majority" if aggregated else None
        scores.append(consistency_score(collapsed, instance_id, source=source))
        emit("scored", instance_id=instance_id,
             supported=scores[-1].supported, total=scores[-1].total)

    write_jsonl(out_path, scores,
                header=make_header("scores", manifest_id=manifest.manifest_id))
    emit("done", command="score", instances=len(scores))
    sys.exit(EXIT_OK)


@main.command("evaluate")
@click.option("--pred", "pred_path", required=True, help="judgments.jsonl")
@click.option("--gold", "gold_path", required=True, help="gold.jsonl")
@click.option("--split", "split_tag",
              type=click.Choice(["dev", "test", "all"]), default="all")
@click.option("--out", "out_path", required=True, help="report.json")
def evaluate_cmd(pred_path, gold_path, split_tag, out_path) -> None:
    """Balanced accuracy and ROC-AUC of predictions against gold labels."""
    manifest = start_manifest(
        "evaluate",
        {"pred": Path(pred_path).name, "gold": Path(gold_path).name,
         "split": split_tag},
    )
    emit_manifest(manifest)
    pred_header, pred_rows = read_jsonl(pred_path)
    form = (pred_header or {}).get("form", "qa")
    predictions = {
        row["qa_id"]: Judgment.model_validate(row) for row in pred_rows
    }
    _, gold_rows = read_jsonl(gold_path)

    grouped: dict[str, list[tuple[Judgment, str]]] = defaultdict(list)
    missing = 0
    for row in gold_rows:
        if row.get("label") is None:
            continue  # tie excluded at export
        if split_tag != "all" and row.get("split") not in (None, split_tag):
            continue
        judgment = predictions.get(row["qa_id"])
        if judgment is None:
            missing += 1
            continue
        task = row.get("task") or "all"
        grouped[task].append((judgment, row["label"]))

    def evaluate_group(pairs):
        counts = confusion_counts(
            (j.label, gold_label) for j, gold_label in pairs
        )
        scores = [(j.score, gold_label) for j, gold_label in pairs]
        degenerate = all(j.score in (0.0, 1.0) for j, _ in pairs)
        return {
            "bacc": balanced_accuracy(counts),
            "auc": optional_roc_auc(scores),
            "counts": counts.model_dump(),
            "n": len(pairs),
            "hard_scores_only": degenerate,
        }

    per_dataset = {}
    for task in sorted(grouped):
        per_dataset[task] = evaluate_group(grouped[task])
    if len(grouped) > 1:
        everything = [pair for pairs in grouped.values() for pair in pairs]
        per_dataset["all"] = evaluate_group(everything)

    report = {
        "per_dataset": per_dataset,
        "threshold": 0.5,
        "form": form,
        "split": split_tag,
        "unmatched_gold": missing,
        "manifest_id": manifest.manifest_id,
    }
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    emit("done", command="evaluate", datasets=len(per_dataset),
         unmatched_gold=missing)
    sys.exit(EXIT_OK)


@main.command("agreement")
@click.option("--annotations", "records_path", required=True,
              help="records.jsonl exported from the annotation service")
@click.option("--instances", "instances_path", default=None,
              help="instances.jsonl to group agreement per task")
@click.option("--out", "out_path", required=True, help="kappa.json")
def agreement_cmd(records_path, instances_path, out_path) -> None:
    """Fleiss' kappa over submitted annotation records."""
    manifest = start_manifest(
        "agreement", {"annotations": Path(records_path).name})
    emit_manifest(manifest)
    tasks = {}
    if instances_path:
        tasks = {
            i.id: i.task for i in _load_instances(instances_path).values()
        }

    votes: dict[str, list[str]] = defaultdict(list)
    qa_instance: dict[str, str] = {}
    for _, row in iter_jsonl(records_path):
        if row.get("state") != "submitted":
            continue
        for qa_id, entry in (row.get("qa_step") or {}).items():
            votes[qa_id].append(entry["label"])
            qa_instance[qa_id] = row["instance_id"]

    if not votes:
        raise click.ClickException("no submitted annotations found")
    rater_counts = Counter(len(v) for v in votes.values())
    n_raters = rater_counts.most_common(1)[0][0]
    dropped = [qa_id for qa_id, v in votes.items() if len(v) != n_raters]
    for qa_id in dropped:
        emit("dropped-item", qa_id=qa_id, votes=len(votes[qa_id]),
             expected=n_raters)

    def kappa_over(qa_ids):
        table = rating_table_from_labels([votes[q] for q in qa_ids])
        return {
            "kappa": fleiss_kappa(table),
            "items": len(qa_ids),
            "raters": n_raters,
        }

    kept = sorted(q for q in votes if len(votes[q]) == n_raters)
    report = {"overall": kappa_over(kept), "dropped_items": len(dropped),
              "manifest_id": manifest.manifest_id}
    if tasks:
        by_task = defaultdict(list)
        for qa_id in kept:
            by_task[tasks.get(qa_instance[qa_id], "other")].append(qa_id)
        report["per_task"] = {
            task: kappa_over(ids)
            for task, ids in sorted(by_task.items())
            if len(ids) >= 2
        }
    Path(out_path).write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    emit("done", command="agreement", items=len(kept))
    sys.exit(EXIT_OK)


@main.command("correlate")
@click.option("--scores-a", "scores_a_path", required=True)
@click.option("--scores-b", "scores_b_path", required=True)
@click.option("--sbs", "sbs_path", required=True,
              help="side-by-side records: pair_id, instance_a, instance_b, likert")
@click.option("--out", "out_path", required=True)
@click.option("--seed", type=int, default=0)
@click.option("--permutations", type=int, default=10_000)
def correlate_cmd(scores_a_path, scores_b_path, sbs_path, out_path, seed,
                  permutations) -> None:
    """Spearman correlation between score differences and human preference."""
    manifest = start_manifest(
        "correlate", {"sbs": Path(sbs_path).name, "permutations": permutations},
        seed=seed,
    )
    emit_manifest(manifest)

    def load_scores(path):
        _, rows = read_jsonl(path)
        return {row["instance_id"]: row for row in rows}

    scores_a = load_scores(scores_a_path)
    scores_b = load_scores(scores_b_path)

    likerts: dict[str, list[int]] = defaultdict(list)
    pairing: dict[str, tuple[str, str]] = {}
    for _, row in iter_jsonl(sbs_path):
        pair_id = row["pair_id"]
        pairing[pair_id] = (row["instance_a"], row["instance_b"])
        likerts[pair_id].append(int(row["likert"]))

    diffs, preferences, pairs_used = [], [], []
    for pair_id in sorted(pairing):
        instance_a, instance_b = pairing[pair_id]
        if instance_a not in scores_a or instance_b not in scores_b:
            emit("pair-skipped", pair_id=pair_id, reason="missing score")
            continue
        a, b = scores_a[instance_a], scores_b[instance_b]
        diffs.append(a["supported"] / a["total"] - b["supported"] / b["total"])
        preferences.append(sum(likerts[pair_id]) / len(likerts[pair_id]))
        pairs_used.append(pair_id)

    if len(diffs) < 3:
        raise click.ClickException(
            f"need at least 3 scored pairs, have {len(diffs)}"
        )
    result = spearman(diffs, preferences, n_permutations=permutations, seed=seed)
    report = {
        "rho": result.rho,
        "p_value": result.p_value,
        "n_pairs": len(diffs),
        "seed": seed,
        "n_permutations": permutations,
        "manifest_id": manifest.manifest_id,
    }
    Path(out_path).write_text(
        json.dumps(report, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    emit("done", command="correlate", pairs=len(pairs_used), rho=result.rho)
    sys.exit(EXIT_OK)


@main.command("split")
@click.option("--in", "in_path", required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", required=True)
def split_cmd(in_path, seed, out_path) -> None:
    """Assign deterministic 50/50 dev/test tags by seeded hash."""
    manifest = start_manifest("split", {"in": Path(in_path).name}, seed=seed)
    emit_manifest(manifest)
    header, rows = read_jsonl(in_path)
    instances = [Instance.model_validate(row) for row in rows]
    tags = ds.split_ids([i.id for i in instances], seed)
    write_jsonl(
        out_path, instances,
        header=make_header(
            "instances",
            name=(header or {}).get("name", "generic"),
            split_seed=seed,
            split_tags=tags,
            manifest_id=manifest.manifest_id,
        ),
    )
    counts = Counter(tags.values())
    emit("done", command="split", dev=counts.get("dev", 0),
         test=counts.get("test", 0))
    sys.exit(EXIT_OK)


@main.command("stats")
@click.option("--in", "dir_path", required=True,
              help="generic benchmark directory")
def stats_cmd(dir_path) -> None:
    """Summary statistics of a benchmark directory."""
    benchmark = ds.load_benchmark(dir_path)
    print(json.dumps(ds.stats(benchmark).model_dump(), indent=2))
    sys.exit(EXIT_OK)


@main.command("serve")
@click.option("--store", "store_dir", required=True)
@click.option("--port", type=int, default=8040)
@click.option("--host", default="127.0.0.1")
@click.option("--annotators", default=None,
              help="comma-separated annotator pool")
@click.option("--instances", "instances_path", default=None,
              help="seed the store from instances.jsonl")
@click.option("--qas", "qas_path", default=None,
              help="seed the store from qas.jsonl")
def serve_cmd(store_dir, port, host, annotators, instances_path,
              qas_path) -> None:
    """Start the annotation service over a store directory."""
    import uvicorn

    from .annotation.store import AnnotationStore
    from .service import create_app

    pool = [a.strip() for a in annotators.split(",")] if annotators else None
    store = AnnotationStore(store_dir, annotators=pool)
    if instances_path:
        decompositions = {}
        if qas_path:
            for _, row in iter_jsonl(qas_path):
                decomposition = Decomposition.model_validate(row)
                decompositions[decomposition.instance_id] = decomposition
        for instance in _load_instances(instances_path).values():
            store.add_instance(instance, decompositions.get(instance.id))
    app = create_app(store)
    emit("serving", host=host, port=port, store=str(store_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group("review")
def review_group() -> None:
    """Triage pending-review QAs through a running annotation service."""


def _client(url: str, token: Optional[str]):
    import httpx

    headers = {"Authorization": f"Bearer {token}"} if token else {}
    return httpx.Client(base_url=url, headers=headers, timeout=30)


@review_group.command("list")
@click.option("--url", required=True)
@click.option("--token", default=None, envvar="QAFACT_TOKEN")
def review_list(url, token) -> None:
    with _client(url, token) as client:
        response = client.get("/review/queue")
        response.raise_for_status()
        for item in response.json():
            qa = item["qa"]
            print(json.dumps({
                "qa_id": qa["id"],
                "instance_id": item["instance_id"],
                "question": qa["question"],
                "answers": [a["surface"] for a in qa["answers"]],
            }, ensure_ascii=False))
    sys.exit(EXIT_OK)


@review_group.command("decide")
@click.argument("qa_id")
@click.option("--decision", type=click.Choice(["accept", "reject"]),
              required=True)
@click.option("--url", required=True)
@click.option("--token", default=None, envvar="QAFACT_TOKEN")
def review_decide(qa_id, decision, url, token) -> None:
    with _client(url, token) as client:
        response = client.post(f"/review/{qa_id}", json={"decision": decision})
        response.raise_for_status()
        print(json.dumps(response.json(), ensure_ascii=False))
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
