"""End-to-end pipeline through the CLI: files in, files out."""

import json
import random

import pytest
from click.testing import CliRunner

from conftest import (
    MEASLES_LINES,
    TWO_EVENT_LINES,
    make_decompose_transcript,
    make_judge_transcript,
)
from qafact.cli import main
from qafact.jsonl import read_jsonl, write_jsonl
from qafact.model import human_judgment, model_judgment


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workspace(tmp_path, measles_instance, two_event_instance,
              measles_decomposition, two_event_decomposition,
              measles_verdicts):
    """Instances file plus replay transcripts for decompose and judge."""
    instances_path = tmp_path / "instances.jsonl"
    write_jsonl(instances_path, [measles_instance, two_event_instance])

    decompose_transcript = tmp_path / "decompose-transcript.jsonl"
    make_decompose_transcript(decompose_transcript, measles_instance,
                              MEASLES_LINES)
    make_decompose_transcript(decompose_transcript, two_event_instance,
                              TWO_EVENT_LINES)

    judge_transcript = tmp_path / "judge-transcript.jsonl"
    make_judge_transcript(judge_transcript, measles_instance,
                          measles_decomposition, measles_verdicts)
    two_event_verdicts = {
        qa.id: "Yes" for qa in two_event_decomposition.qas
    }
    make_judge_transcript(judge_transcript, two_event_instance,
                          two_event_decomposition, two_event_verdicts)
    return tmp_path


def run_ok(runner, args, expected_code=0):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == expected_code, result.output + result.stderr
    return result


class TestDecomposeCommand:
    def test_writes_decompositions(self, runner, workspace):
        out = workspace / "qas.jsonl"
        result = run_ok(runner, [
            "decompose",
            "--in", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{workspace / 'decompose-transcript.jsonl'}",
            "--out", str(out),
        ])
        header, rows = read_jsonl(out)
        assert header["kind"] == "qas"
        assert header["manifest_id"]
        assert [len(r["qas"]) for r in rows] == [12, 7]
        events = [json.loads(l) for l in result.stderr.splitlines() if l]
        assert events[0]["event"] == "manifest"
        assert events[-1]["event"] == "done"

    def test_unknown_backend_without_config(self, runner, workspace):
        result = runner.invoke(main, [
            "decompose", "--in", str(workspace / "instances.jsonl"),
            "--backend", "gpt-infinity",
            "--out", str(workspace / "qas.jsonl"),
        ])
        assert result.exit_code != 0

    def test_parallel_output_order_matches_input_order(self, runner,
                                                       workspace):
        sequential = workspace / "qas-seq.jsonl"
        parallel = workspace / "qas-par.jsonl"
        base = [
            "decompose", "--in", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{workspace / 'decompose-transcript.jsonl'}",
        ]
        run_ok(runner, base + ["--out", str(sequential)])
        run_ok(runner, base + ["--out", str(parallel), "--parallel", "4"])
        assert sequential.read_bytes() == parallel.read_bytes()

    def test_backends_config_file(self, runner, workspace):
        config = {
            "parser": {
                "kind": "replay",
                "transcript": str(workspace / "decompose-transcript.jsonl"),
            }
        }
        config_path = workspace / "backends.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        out = workspace / "qas.jsonl"
        run_ok(runner, [
            "decompose", "--in", str(workspace / "instances.jsonl"),
            "--backend", "parser", "--backends", str(config_path),
            "--out", str(out),
        ])
        _, rows = read_jsonl(out)
        assert rows[0]["backend_name"] == "parser"


class TestJudgeCommand:
    def pipeline(self, runner, workspace, out_name="judgments.jsonl"):
        qas = workspace / "qas.jsonl"
        run_ok(runner, [
            "decompose", "--in", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{workspace / 'decompose-transcript.jsonl'}",
            "--out", str(qas),
        ])
        out = workspace / out_name
        run_ok(runner, [
            "judge", "--qas", str(qas),
            "--instances", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{workspace / 'judge-transcript.jsonl'}",
            "--out", str(out),
        ])
        return out

    def test_judgments_written(self, runner, workspace):
        out = self.pipeline(runner, workspace)
        header, rows = read_jsonl(out)
        assert header["form"] == "qa"
        assert len(rows) == 19  # 12 + 7
        supported = [r for r in rows if r["label"] == "supported"]
        assert len(supported) == 14  # 7 measles + 7 two-event

    def test_replay_byte_determinism(self, runner, workspace):
        first = self.pipeline(runner, workspace, "j1.jsonl")
        second = self.pipeline(runner, workspace, "j2.jsonl")
        assert first.read_bytes() == second.read_bytes()
        assert (workspace / "qas.jsonl").read_bytes()  # sanity

    def test_backend_failure_exit_codes(self, runner, workspace, tmp_path):
        qas = workspace / "qas.jsonl"
        run_ok(runner, [
            "decompose", "--in", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{workspace / 'decompose-transcript.jsonl'}",
            "--out", str(qas),
        ])
        # Empty transcript: every judge call misses.
        empty = tmp_path / "empty-transcript.jsonl"
        empty.write_text("", encoding="utf-8")
        args = [
            "judge", "--qas", str(qas),
            "--instances", str(workspace / "instances.jsonl"),
            "--backend", f"replay:{empty}",
            "--out", str(workspace / "j.jsonl"),
        ]
        hard = runner.invoke(main, args)
        assert hard.exit_code == 1
        soft = runner.invoke(main, args + ["--best-effort"])
        assert soft.exit_code == 2


class TestScoreCommand:
    def test_scores_per_instance(self, runner, workspace):
        judgments = TestJudgeCommand().pipeline(runner, workspace)
        out = workspace / "scores.jsonl"
        run_ok(runner, [
            "score", "--judgments", str(judgments), "--out", str(out),
        ])
        _, rows = read_jsonl(out)
        by_id = {r["instance_id"]: r for r in rows}
        assert by_id["cliff/measles"]["supported"] == 7
        assert by_id["cliff/measles"]["total"] == 12
        assert by_id["qasrl/two-events"]["value"] == 1.0

    def test_majority_aggregation(self, runner, tmp_path):
        judgments = []
        for annotator, labels in (
            ("a1", ["supported", "supported"]),
            ("a2", ["supported", "not-supported"]),
            ("a3", ["not-supported", "not-supported"]),
        ):
            judgments.append(human_judgment("i1/qa000", labels[0], annotator))
            judgments.append(human_judgment("i1/qa001", labels[1], annotator))
        path = tmp_path / "judgments.jsonl"
        write_jsonl(path, judgments)
        out = tmp_path / "scores.jsonl"
        run_ok(CliRunner(), [
            "score", "--judgments", str(path), "--out", str(out),
        ])
        _, rows = read_jsonl(out)
        assert rows[0]["supported"] == 1
        assert rows[0]["total"] == 2
        assert rows[0]["source"] == "human-majority"


class TestEvaluateCommand:
    def make_gold(self, tmp_path, judgment_rows, split_tag="test"):
        gold = [
            {"qa_id": row["qa_id"], "label": row["label"],
             "instance_id": row["qa_id"].rsplit("/", 1)[0],
             "split": split_tag, "task": "summarization"}
            for row in judgment_rows
        ]
        path = tmp_path / "gold.jsonl"
        write_jsonl(path, gold)
        return path

    def test_gold_equals_pred_is_perfect(self, runner, workspace):
        judgments = TestJudgeCommand().pipeline(runner, workspace)
        _, rows = read_jsonl(judgments)
        gold = self.make_gold(workspace, rows)
        out = workspace / "report.json"
        run_ok(runner, [
            "evaluate", "--pred", str(judgments), "--gold", str(gold),
            "--split", "test", "--out", str(out),
        ])
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["threshold"] == 0.5
        assert report["form"] == "qa"
        section = report["per_dataset"]["summarization"]
        assert section["bacc"] == 1.0
        assert section["auc"] == 1.0
        assert set(section["counts"]) == {"tp", "fp", "tn", "fn"}

    def test_random_scores_auc_near_half(self, runner, tmp_path):
        rng = random.Random(424)
        judgments, gold = [], []
        for k in range(4000):
            score = rng.random()
            judgments.append(model_judgment(f"i/qa{k:05d}", score, "m"))
            gold.append({
                "qa_id": f"i/qa{k:05d}",
                "label": rng.choice(["supported", "not-supported"]),
                "instance_id": "i", "split": "test", "task": "synthetic",
            })
        pred_path = tmp_path / "pred.jsonl"
        write_jsonl(pred_path, judgments)
        gold_path = tmp_path / "gold.jsonl"
        write_jsonl(gold_path, gold)
        out = tmp_path / "report.json"
        run_ok(runner, [
            "evaluate", "--pred", str(pred_path), "--gold", str(gold_path),
            "--out", str(out),
        ])
        report = json.loads(out.read_text(encoding="utf-8"))
        auc = report["per_dataset"]["synthetic"]["auc"]
        assert abs(auc - 0.5) < 0.05

    def test_split_filtering(self, runner, workspace):
        judgments = TestJudgeCommand().pipeline(runner, workspace)
        _, rows = read_jsonl(judgments)
        gold = self.make_gold(workspace, rows, split_tag="dev")
        out = workspace / "report.json"
        result = runner.invoke(main, [
            "evaluate", "--pred", str(judgments), "--gold", str(gold),
            "--split", "test", "--out", str(out),
        ])
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["per_dataset"] == {}


class TestAgreementCommand:
    def test_kappa_from_exported_records(self, runner, tmp_path):
        # Three annotators, four QAs: rows [[3,0],[0,3],[2,1],[1,2]]
        # give kappa = 1/3 (hand-derived in the metrics tests).
        votes = {
            "i1/qa000": ["supported"] * 3,
            "i1/qa001": ["not-supported"] * 3,
            "i1/qa002": ["supported", "supported", "not-supported"],
            "i1/qa003": ["supported", "not-supported", "not-supported"],
        }
        records = []
        for idx, annotator in enumerate(["a1", "a2", "a3"]):
            records.append({
                "record_id": f"i1:{annotator}",
                "instance_id": "i1",
                "annotator_id": annotator,
                "span_step": [],
                "state": "submitted",
                "version": 5,
                "qa_step": {
                    qa_id: {"label": labels[idx], "note": None,
                            "provenance": "manual", "error_kind": None}
                    for qa_id, labels in votes.items()
                },
            })
        path = tmp_path / "records.jsonl"
        write_jsonl(path, records)
        out = tmp_path / "kappa.json"
        run_ok(runner, [
            "agreement", "--annotations", str(path), "--out", str(out),
        ])
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["overall"]["kappa"] == pytest.approx(1 / 3, abs=1e-12)
        assert report["overall"]["raters"] == 3
        assert report["overall"]["items"] == 4


class TestCorrelateCommand:
    def test_monotone_relation_gives_rho_one(self, runner, tmp_path):
        scores_a, scores_b, sbs = [], [], []
        supported = [(9, 1), (7, 2), (5, 3), (3, 4), (1, 5)]
        for k, (sup, likert) in enumerate(supported):
            scores_a.append({"instance_id": f"a{k}", "supported": sup,
                             "total": 10, "value": sup / 10,
                             "source": "model"})
            scores_b.append({"instance_id": f"b{k}", "supported": 5,
                             "total": 10, "value": 0.5, "source": "model"})
            sbs.append({"pair_id": f"p{k}", "instance_a": f"a{k}",
                        "instance_b": f"b{k}", "annotator_id": "a1",
                        "likert": 6 - likert})
        for name, rows in (("a.jsonl", scores_a), ("b.jsonl", scores_b),
                           ("sbs.jsonl", sbs)):
            write_jsonl(tmp_path / name, rows)
        out = tmp_path / "corr.json"
        run_ok(runner, [
            "correlate", "--scores-a", str(tmp_path / "a.jsonl"),
            "--scores-b", str(tmp_path / "b.jsonl"),
            "--sbs", str(tmp_path / "sbs.jsonl"),
            "--out", str(out), "--permutations", "500",
        ])
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["rho"] == pytest.approx(1.0)
        assert report["n_pairs"] == 5
        assert report["p_value"] < 0.05


class TestSplitCommand:
    def test_37_37_and_stable(self, runner, tmp_path):
        from test_dataset import make_instances

        path = tmp_path / "instances.jsonl"
        write_jsonl(path, make_instances(74))
        out1 = tmp_path / "split1.jsonl"
        out2 = tmp_path / "split2.jsonl"
        for out in (out1, out2):
            result = run_ok(runner, [
                "split", "--in", str(path), "--seed", "7",
                "--out", str(out),
            ])
            done = [json.loads(l) for l in result.stderr.splitlines()
                    if '"done"' in l][0]
            assert done["dev"] == 37 and done["test"] == 37
        assert out1.read_bytes() == out2.read_bytes()


class TestStatsCommand:
    def test_stats_output(self, runner, tmp_path, measles_instance,
                          measles_decomposition):
        from qafact.dataset import Benchmark, save_benchmark

        benchmark = Benchmark(instances=[measles_instance],
                              decompositions=[measles_decomposition])
        save_benchmark(benchmark, tmp_path / "bench")
        result = run_ok(runner, ["stats", "--in", str(tmp_path / "bench")])
        payload = json.loads(result.output)
        assert payload["responses"] == 1
        assert payload["qas"] == 12
