"""Durable storage for the annotation workflow.

Layout under the store root:

    seed/instances.jsonl    one Instance per line (append-only)
    seed/qas.jsonl          one Decomposition per line (append-only)
    events/<instance>.jsonl append-only event log for that instance's records
    events/_sbs.jsonl       side-by-side comparison events
    snapshots/<instance>.json   compacted record state

Every write is appended, flushed, and fsynced before it is acknowledged;
on load the log is replayed on top of the latest snapshot, and a torn
final line (an interrupted write) is ignored, so the store always comes
back at the last acknowledged version.
"""

from __future__ import annotations

import json
import os
import threading
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional, Union

from ..decompose import Decomposition
from ..errors import (
    InsufficientAnnotatorsError,
    StoreCorruptError,
    StoreError,
    UnknownInstanceError,
    UnknownQAError,
    UnknownRecordError,
    VersionConflictError,
)
from ..model import Instance, JudgmentLabel, SpanCoverage, human_judgment
from ..scoring import majority_label
from . import records as rec
from .records import AnnotationRecord, SideBySideRecord


def _read_log(path: Path) -> list[dict]:
    """Read an event log, tolerating a torn (interrupted) final line only."""
    if not path.exists():
        return []
    entries: list[dict] = []
    raw_lines = path.read_text(encoding="utf-8").split("\n")
    # Drop the empty string after the final newline of a clean file.
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    for index, line in enumerate(raw_lines):
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError:
            if index == len(raw_lines) - 1:
                break  # torn tail from an interrupted write
            raise StoreCorruptError(f"{path}:{index + 1}: corrupt event line")
    return entries


def _append_ack(path: Path, entry: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
        handle.flush()
        os.fsync(handle.fileno())


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _url_safe(identifier: str) -> str:
    """Record ids appear as single URL path segments; squash separators."""
    return "".join(
        c if c.isalnum() or c in "-_.:" else "~" for c in identifier
    )


class AnnotationStore:
    """In-memory state over an append-only on-disk event log."""

    def __init__(self, root: Union[str, Path],
                 annotators: Optional[list[str]] = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._instances: dict[str, Instance] = {}
        self._decompositions: dict[str, Decomposition] = {}
        self._records: dict[str, AnnotationRecord] = {}
        self._sbs: dict[tuple[str, str], SideBySideRecord] = {}
        self._config_path = self.root / "config.json"
        self.annotators: list[str] = annotators or []
        self._load()
        if annotators:
            self.annotators = list(annotators)
            self._config_path.write_text(
                json.dumps({"annotators": self.annotators}), encoding="utf-8"
            )

    # -- loading ---------------------------------------------------------

    def _load(self) -> None:
        if self._config_path.exists():
            config = json.loads(self._config_path.read_text(encoding="utf-8"))
            self.annotators = config.get("annotators", [])
        seed_dir = self.root / "seed"
        instances_path = seed_dir / "instances.jsonl"
        if instances_path.exists():
            for line in instances_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "qafact" in obj:
                    continue
                instance = Instance.model_validate(obj)
                self._instances[instance.id] = instance
        qas_path = seed_dir / "qas.jsonl"
        if qas_path.exists():
            for line in qas_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "qafact" in obj:
                    continue
                decomposition = Decomposition.model_validate(obj)
                self._decompositions[decomposition.instance_id] = decomposition
        events_dir = self.root / "events"
        if events_dir.exists():
            for path in sorted(events_dir.glob("*.jsonl")):
                if path.name == "_sbs.jsonl":
                    continue
                instance_id = path.stem
                self._load_instance_state(instance_id)
            sbs_path = events_dir / "_sbs.jsonl"
            for entry in _read_log(sbs_path):
                record = SideBySideRecord.model_validate({
                    k: entry[k]
                    for k in ("pair_id", "annotator_id", "likert", "version")
                })
                self._sbs[(record.pair_id, record.annotator_id)] = record

    def _snapshot_path(self, instance_id: str) -> Path:
        return self.root / "snapshots" / f"{instance_id}.json"

    def _events_path(self, instance_id: str) -> Path:
        return self.root / "events" / f"{instance_id}.jsonl"

    def _load_instance_state(self, instance_id: str) -> None:
        snapshot_path = self._snapshot_path(instance_id)
        from_version = 0
        if snapshot_path.exists():
            snapshot = json.loads(snapshot_path.read_text(encoding="utf-8"))
            from_version = snapshot.get("through_seq", 0)
            for payload in snapshot.get("records", []):
                record = AnnotationRecord.model_validate(payload)
                self._records[record.record_id] = record
            if "decomposition" in snapshot and snapshot["decomposition"]:
                self._decompositions[instance_id] = Decomposition.model_validate(
                    snapshot["decomposition"]
                )
        events = _read_log(self._events_path(instance_id))
        for seq, entry in enumerate(events, start=1):
            if seq <= from_version:
                continue
            self._apply_event(instance_id, entry)

    def _apply_event(self, instance_id: str, entry: dict) -> None:
        kind = entry.get("event")
        if kind == "assign":
            record = rec.new_record(
                entry["record_id"], instance_id, entry["annotator_id"]
            )
            self._records[record.record_id] = record
        elif kind == "span":
            record = self._records[entry["record_id"]]
            span = SpanCoverage.model_validate(entry["span"])
            decomposition = self._decompositions[instance_id]
            self._records[record.record_id] = rec.record_span(
                record, decomposition, span
            )
        elif kind == "qa":
            record = self._records[entry["record_id"]]
            decomposition = self._decompositions[instance_id]
            self._records[record.record_id] = rec.record_qa(
                record, decomposition, entry["qa_id"], entry["label"],
                entry.get("note"),
            )
        elif kind == "submit":
            record = self._records[entry["record_id"]]
            decomposition = self._decompositions[instance_id]
            self._records[record.record_id] = rec.submit(record, decomposition)
        elif kind == "review":
            decomposition = self._decompositions[instance_id]
            status = "accepted" if entry["decision"] == "accept" else "rejected-nonsensical"
            qas = [
                qa.model_copy(update={"status": status}) if qa.id == entry["qa_id"]
                else qa
                for qa in decomposition.qas
            ]
            self._decompositions[instance_id] = decomposition.model_copy(
                update={"qas": qas}
            )
        else:
            raise StoreCorruptError(f"unknown event kind {kind!r}")

    # -- seeded data ------------------------------------------------------

    def add_instance(self, instance: Instance,
                     decomposition: Optional[Decomposition] = None) -> None:
        with self._lock:
            seed_dir = self.root / "seed"
            if instance.id not in self._instances:
                _append_ack(seed_dir / "instances.jsonl",
                            instance.model_dump(mode="json"))
                self._instances[instance.id] = instance
            if decomposition is not None:
                if decomposition.instance_id != instance.id:
                    raise StoreError("decomposition belongs to a different instance")
                _append_ack(seed_dir / "qas.jsonl",
                            decomposition.model_dump(mode="json"))
                self._decompositions[instance.id] = decomposition

    def get_instance(self, instance_id: str) -> tuple[Instance, Optional[Decomposition]]:
        with self._lock:
            if instance_id not in self._instances:
                raise UnknownInstanceError(f"unknown instance {instance_id!r}")
            return (
                self._instances[instance_id],
                self._decompositions.get(instance_id),
            )

    def instance_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._instances)

    # -- assignment -------------------------------------------------------

    def assign(self, instance_id: str,
               n_annotators: int = 3) -> list[AnnotationRecord]:
        """Create (or return existing) assignments for an instance.

        Picks the least-loaded annotators from the pool, deterministically.
        """
        with self._lock:
            if instance_id not in self._instances:
                raise UnknownInstanceError(f"unknown instance {instance_id!r}")
            if instance_id not in self._decompositions:
                raise StoreError(
                    f"instance {instance_id!r} has no decomposition to annotate"
                )
            existing = [
                r for r in self._records.values() if r.instance_id == instance_id
            ]
            if existing:
                return sorted(existing, key=lambda r: r.record_id)
            if len(self.annotators) < n_annotators:
                raise InsufficientAnnotatorsError(
                    f"pool has {len(self.annotators)} annotators, need {n_annotators}"
                )
            load = Counter(r.annotator_id for r in self._records.values())
            chosen = sorted(self.annotators, key=lambda a: (load[a], a))[:n_annotators]
            created = []
            for annotator_id in sorted(chosen):
                record_id = f"{_url_safe(instance_id)}:{_url_safe(annotator_id)}"
                entry = {
                    "event": "assign",
                    "record_id": record_id,
                    "annotator_id": annotator_id,
                    "ts": _now(),
                }
                _append_ack(self._events_path(instance_id), entry)
                self._apply_event(instance_id, entry)
                created.append(self._records[record_id])
            return created

    def get_record(self, record_id: str) -> AnnotationRecord:
        with self._lock:
            if record_id not in self._records:
                raise UnknownRecordError(f"unknown record {record_id!r}")
            return self._records[record_id]

    def records_for_annotator(self, annotator_id: str) -> list[AnnotationRecord]:
        with self._lock:
            return sorted(
                (r for r in self._records.values()
                 if r.annotator_id == annotator_id),
                key=lambda r: r.record_id,
            )

    def decomposition_for_record(self, record: AnnotationRecord) -> Decomposition:
        return self._decompositions[record.instance_id]

    def _checked(self, record_id: str,
                 expected_version: Optional[int]) -> AnnotationRecord:
        record = self.get_record(record_id)
        if expected_version is not None and record.version != expected_version:
            raise VersionConflictError(expected_version, record.version)
        return record

    def apply_span(self, record_id: str, span: SpanCoverage,
                   expected_version: Optional[int] = None) -> AnnotationRecord:
        with self._lock:
            record = self._checked(record_id, expected_version)
            decomposition = self._decompositions[record.instance_id]
            updated = rec.record_span(record, decomposition, span)
            entry = {
                "event": "span",
                "record_id": record_id,
                "span": span.model_dump(mode="json"),
                "version": updated.version,
                "ts": _now(),
            }
            _append_ack(self._events_path(record.instance_id), entry)
            self._records[record_id] = updated
            return updated

    def apply_qa(self, record_id: str, qa_id: str, label: JudgmentLabel,
                 note: Optional[str] = None,
                 expected_version: Optional[int] = None) -> AnnotationRecord:
        with self._lock:
            record = self._checked(record_id, expected_version)
            decomposition = self._decompositions[record.instance_id]
            updated = rec.record_qa(record, decomposition, qa_id, label, note)
            entry = {
                "event": "qa",
                "record_id": record_id,
                "qa_id": qa_id,
                "label": label,
                "note": note,
                "version": updated.version,
                "ts": _now(),
            }
            _append_ack(self._events_path(record.instance_id), entry)
            self._records[record_id] = updated
            return updated

    def submit_record(self, record_id: str,
                      expected_version: Optional[int] = None) -> AnnotationRecord:
        with self._lock:
            record = self._checked(record_id, expected_version)
            decomposition = self._decompositions[record.instance_id]
            updated = rec.submit(record, decomposition)
            entry = {
                "event": "submit",
                "record_id": record_id,
                "version": updated.version,
                "ts": _now(),
            }
            _append_ack(self._events_path(record.instance_id), entry)
            self._records[record_id] = updated
            return updated

    # -- side-by-side -----------------------------------------------------

    def record_side_by_side(self, pair_id: str, annotator_id: str,
                            likert: int) -> SideBySideRecord:
        """Store a 1-5 comparison; last write wins with a version bump."""
        if not 1 <= likert <= 5:
            raise StoreError(f"likert {likert} out of range [1, 5]")
        with self._lock:
            key = (pair_id, annotator_id)
            version = self._sbs[key].version + 1 if key in self._sbs else 1
            record = SideBySideRecord(
                pair_id=pair_id, annotator_id=annotator_id,
                likert=likert, version=version,
            )
            entry = {
                "event": "sbs",
                "pair_id": pair_id,
                "annotator_id": annotator_id,
                "likert": likert,
                "version": version,
                "ts": _now(),
            }
            _append_ack(self.root / "events" / "_sbs.jsonl", entry)
            self._sbs[key] = record
            return record

    def get_side_by_side(self, pair_id: str,
                         annotator_id: str) -> SideBySideRecord:
        with self._lock:
            key = (pair_id, annotator_id)
            if key not in self._sbs:
                raise UnknownRecordError(f"no side-by-side record for {key}")
            return self._sbs[key]

    # -- review queue -----------------------------------------------------

    def review_queue(self) -> list[dict]:
        with self._lock:
            queue = []
            for instance_id in sorted(self._decompositions):
                for qa in self._decompositions[instance_id].qas:
                    if qa.status == "pending-review":
                        queue.append({
                            "instance_id": instance_id,
                            "qa": qa.model_dump(mode="json"),
                        })
            return queue

    def review_decide(self, qa_id: str, decision: str) -> None:
        if decision not in ("accept", "reject"):
            raise StoreError(f"decision must be accept or reject, got {decision!r}")
        with self._lock:
            for instance_id, decomposition in self._decompositions.items():
                if any(qa.id == qa_id for qa in decomposition.qas):
                    entry = {
                        "event": "review",
                        "qa_id": qa_id,
                        "decision": decision,
                        "ts": _now(),
                    }
                    _append_ack(self._events_path(instance_id), entry)
                    self._apply_event(instance_id, entry)
                    return
            raise UnknownQAError(f"unknown QA {qa_id!r}")

    # -- export -----------------------------------------------------------

    def export_gold(self) -> Iterator[dict]:
        """Majority-vote gold labels over submitted records.

        QAs with no votes are skipped; ties are reported with label null so
        downstream consumers can log the exclusion.
        """
        with self._lock:
            for instance_id in sorted(self._instances):
                decomposition = self._decompositions.get(instance_id)
                if decomposition is None:
                    continue
                submitted = [
                    r for r in self._records.values()
                    if r.instance_id == instance_id and r.state == "submitted"
                ]
                if not submitted:
                    continue
                views = [
                    (r, rec.effective_qa_step(r, decomposition))
                    for r in submitted
                ]
                task = self._instances[instance_id].task
                for qa in decomposition.accepted():
                    judgments = [
                        human_judgment(qa.id, view[qa.id].label,
                                       annotator_id=record.annotator_id)
                        for record, view in views
                        if qa.id in view
                    ]
                    if not judgments:
                        continue
                    outcome = majority_label(judgments)
                    yield {
                        "qa_id": qa.id,
                        "label": None if outcome == "tie" else outcome,
                        "instance_id": instance_id,
                        "task": task,
                        "n_votes": len(judgments),
                    }

    def export_records(self) -> Iterator[dict]:
        """All records with their derived QA-step views, for agreement math."""
        with self._lock:
            for record_id in sorted(self._records):
                record = self._records[record_id]
                decomposition = self._decompositions.get(record.instance_id)
                view = (
                    rec.effective_qa_step(record, decomposition)
                    if decomposition else {}
                )
                payload = record.model_dump(mode="json")
                payload["qa_step"] = {
                    qa_id: entry.model_dump(mode="json")
                    for qa_id, entry in view.items()
                }
                yield payload

    # -- compaction -------------------------------------------------------

    def compact(self, instance_id: str) -> None:
        """Write a snapshot so future loads skip already-applied events."""
        with self._lock:
            events = _read_log(self._events_path(instance_id))
            snapshot = {
                "through_seq": len(events),
                "records": [
                    r.model_dump(mode="json")
                    for r in sorted(self._records.values(),
                                    key=lambda r: r.record_id)
                    if r.instance_id == instance_id
                ],
                "decomposition": (
                    self._decompositions[instance_id].model_dump(mode="json")
                    if instance_id in self._decompositions else None
                ),
            }
            path = self._snapshot_path(instance_id)
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(snapshot, ensure_ascii=False),
                           encoding="utf-8")
            os.replace(tmp, path)
