"""Benchmark storage, deterministic split, import adapters, statistics."""

import json

import pytest

from qafact.dataset import (
    Benchmark,
    import_benchmark,
    load_benchmark,
    save_benchmark,
    split,
    split_ids,
    stats,
)
from qafact.errors import ImportFileError
from qafact.jsonl import write_jsonl
from qafact.model import Instance


def make_instances(n, prefix="inst"):
    return [
        Instance(id=f"{prefix}{k:03d}", reference=f"ref {k}",
                 generation=f"gen {k}", task="summarization")
        for k in range(n)
    ]


class TestSplit:
    def test_74_instances_is_37_37(self):
        tags = split_ids([f"id{k}" for k in range(74)], seed=7)
        counts = {"dev": 0, "test": 0}
        for tag in tags.values():
            counts[tag] += 1
        assert counts == {"dev": 37, "test": 37}

    def test_single_instance_goes_to_dev(self):
        assert split_ids(["only"], seed=7) == {"only": "dev"}

    def test_same_seed_identical_tags(self):
        ids = [f"id{k}" for k in range(33)]
        assert split_ids(ids, seed=11) == split_ids(ids, seed=11)

    def test_different_seed_differs(self):
        ids = [f"id{k}" for k in range(74)]
        assert split_ids(ids, seed=1) != split_ids(ids, seed=2)

    def test_order_independent(self):
        ids = [f"id{k}" for k in range(20)]
        assert split_ids(ids, seed=5) == split_ids(list(reversed(ids)), seed=5)

    def test_adding_instance_moves_at_most_one_other(self):
        ids = [f"id{k}" for k in range(40)]
        before = split_ids(ids, seed=3)
        after = split_ids(ids + ["newcomer"], seed=3)
        changed = [i for i in ids if before[i] != after[i]]
        assert len(changed) <= 1

    def test_split_records_seed(self):
        benchmark = Benchmark(instances=make_instances(6))
        tagged = split(benchmark, seed=42)
        assert tagged.split_seed == 42
        assert set(tagged.split_tags) == {i.id for i in tagged.instances}


class TestSaveLoad:
    def test_round_trip_identity(self, tmp_path, measles_instance,
                                 measles_decomposition):
        benchmark = Benchmark(
            name="generic",
            instances=[measles_instance] + make_instances(3),
            decompositions=[measles_decomposition],
            gold={measles_decomposition.qas[0].id: "supported",
                  measles_decomposition.qas[1].id: "not-supported"},
        )
        benchmark = split(benchmark, seed=9)
        save_benchmark(benchmark, tmp_path / "bench")
        again = load_benchmark(tmp_path / "bench")
        assert again == benchmark

    def test_import_generic_directory(self, tmp_path):
        benchmark = Benchmark(instances=make_instances(4))
        save_benchmark(benchmark, tmp_path / "bench")
        result = import_benchmark(tmp_path / "bench", "generic")
        assert result.benchmark == benchmark
        assert result.issues == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImportFileError):
            load_benchmark(tmp_path / "absent")


class TestImportAdapters:
    def test_generic_file_with_bad_rows(self, tmp_path):
        path = tmp_path / "instances.jsonl"
        rows = [
            {"id": "a", "reference": "r", "generation": "g",
             "task": "summarization", "model_name": None,
             "sentence_spans": []},
            {"id": "b", "reference": "", "generation": "g",
             "task": "summarization", "model_name": None,
             "sentence_spans": []},
            {"id": "c"},
        ]
        write_jsonl(path, rows)
        result = import_benchmark(path, "generic")
        assert [i.id for i in result.benchmark.instances] == ["a"]
        assert len(result.issues) == 2
        assert all(issue.line > 0 for issue in result.issues)

    def test_cliff_style(self, tmp_path):
        path = tmp_path / "cliff.jsonl"
        write_jsonl(path, [
            {"id": "c1", "source": "long article", "summary": "short one.",
             "model": "bart"},
            {"id": "c2", "source": "long article"},
        ])
        result = import_benchmark(path, "cliff-style")
        assert len(result.benchmark.instances) == 1
        instance = result.benchmark.instances[0]
        assert instance.task == "summarization"
        assert instance.sentence_spans == [(0, len("short one."))]
        assert result.issues[0].line == 2

    def test_factscore_style(self, tmp_path):
        path = tmp_path / "bios.jsonl"
        write_jsonl(path, [
            {"topic": "Ada Lovelace", "wikipedia_text": "wiki body",
             "output": "Ada was a mathematician.", "model": "chatgpt"},
        ])
        result = import_benchmark(path, "factscore-style")
        instance = result.benchmark.instances[0]
        assert instance.id == "Ada Lovelace--chatgpt"
        assert instance.task == "biography"

    def test_verifiability_style_concatenates_sources(self, tmp_path):
        path = tmp_path / "cited.jsonl"
        response = "First claim. Second claim."
        write_jsonl(path, [
            {"id": "v1", "response": response, "sentences": [
                {"text": "First claim.", "sources": ["source A"]},
                {"text": "Second claim.", "sources": ["source B", "source A"]},
            ]},
        ])
        result = import_benchmark(path, "verifiability-style")
        instance = result.benchmark.instances[0]
        assert instance.task == "cited-response"
        assert instance.reference == "source A\n\nsource B"
        assert instance.sentence_spans == [(0, 12), (13, 26)]

    def test_verifiability_sentence_mismatch_collected(self, tmp_path):
        path = tmp_path / "cited.jsonl"
        write_jsonl(path, [
            {"id": "v1", "response": "Real text.", "sentences": [
                {"text": "Missing text.", "sources": ["s"]},
            ]},
        ])
        result = import_benchmark(path, "verifiability-style")
        assert result.benchmark.instances == []
        assert "not found" in result.issues[0].message

    def test_unknown_format(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("{}\n", encoding="utf-8")
        with pytest.raises(ImportFileError):
            import_benchmark(path, "mystery-style")


class TestStats:
    def test_empty_benchmark(self):
        result = stats(Benchmark())
        assert result.responses == 0
        assert result.qas == 0
        assert result.mixed_support_fraction is None

    def test_counts_consistent(self, measles_instance, measles_decomposition):
        gold = {}
        for qa in measles_decomposition.qas:
            gold[qa.id] = "supported"
        # Make the "died" predicate mixed: one supported, one not.
        gold[measles_decomposition.qas[1].id] = "not-supported"
        benchmark = Benchmark(
            instances=[measles_instance],
            decompositions=[measles_decomposition],
            gold=gold,
        )
        result = stats(benchmark)
        assert result.responses == 1
        assert result.sentences == 1
        assert result.qas == 12
        assert result.qas_per_sentence == 12.0
        assert result.predicates == 6
        assert result.mixed_support_predicates == 1
        assert result.mixed_support_fraction == pytest.approx(1 / 6)

    def test_per_sentence_sum_equals_total(self, measles_instance,
                                            measles_decomposition):
        benchmark = Benchmark(
            instances=[measles_instance],
            decompositions=[measles_decomposition],
        )
        result = stats(benchmark)
        per_sentence = sum(
            len(d.accepted()) for d in benchmark.decompositions
        )
        assert result.qas == per_sentence
