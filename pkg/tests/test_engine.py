import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from fusegraph import Engine, EngineConfig
from fusegraph.cli import main as cli_main
from fusegraph.config import ENV_VAR, config_from_dict, load_config
from fusegraph.errors import ConfigError, ParseError, SnapshotCorruptError
from fusegraph.graph import Edge, Node, NodeKind, RelationType
from fusegraph.snapshot import pack, unpack
from fusegraph.synth import SyntheticSpec, write_corpus

from oracles import ball_union, undirected_adjacency

FIVE_NODES = [
    {"id": "p1", "kind": "paper", "content": "alpha beta gamma", "timestamp": 100},
    {"id": "p2", "kind": "paper", "content": "beta gamma delta", "timestamp": 86500},
    {"id": "s1", "kind": "section", "content": "methods alpha", "timestamp": 200},
    {"id": "s2", "kind": "section", "content": "results beta", "timestamp": 86600},
    {"id": "k1", "kind": "knowledge_unit", "content": "finding gamma", "timestamp": 300},
]
FOUR_EDGES = [
    {"src": "p1", "dst": "s1", "relation": "inclusion"},
    {"src": "p1", "dst": "s2", "relation": "inclusion"},
    {"src": "s1", "dst": "k1", "relation": "inclusion"},
    {"src": "p2", "dst": "p1", "relation": "citation"},
]


def write_fixture_files(tmp_path, nodes=FIVE_NODES, edges=FOUR_EDGES):
    nodes_path = tmp_path / "nodes.jsonl"
    edges_path = tmp_path / "edges.jsonl"
    nodes_path.write_text("".join(json.dumps(n) + "\n" for n in nodes))
    edges_path.write_text("".join(json.dumps(e) + "\n" for e in edges))
    return str(nodes_path), str(edges_path)


class TestConfig:
    def test_defaults_valid(self):
        config = EngineConfig()
        assert config.projection_dim <= config.embedding_dim

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as exc:
            config_from_dict({"embeding_dim": 64})
        assert "embeding_dim" in str(exc.value)

    def test_inconsistent_dims_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"embedding_dim": 16, "projection_dim": 32})

    def test_reduced_dim_bounds(self):
        with pytest.raises(ConfigError):
            config_from_dict({"projection_dim": 16, "reduced_dim": 17})

    def test_type_checks(self):
        with pytest.raises(ConfigError):
            config_from_dict({"embedding_dim": "sixty-four"})
        with pytest.raises(ConfigError):
            config_from_dict({"metric_alpha": "fast"})
        with pytest.raises(ConfigError):
            config_from_dict({"provider": 7})

    def test_load_from_file_and_env_override(self, tmp_path, monkeypatch):
        path_a = tmp_path / "a.json"
        path_a.write_text(json.dumps({"embedding_dim": 32, "projection_dim": 16}))
        config = load_config(str(path_a))
        assert config.embedding_dim == 32
        path_b = tmp_path / "b.json"
        path_b.write_text(json.dumps({"embedding_dim": 128}))
        monkeypatch.setenv(ENV_VAR, str(path_b))
        assert load_config(str(path_a)).embedding_dim == 128

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/config.json")

    def test_hash_stability(self):
        assert EngineConfig().config_hash() == EngineConfig().config_hash()
        assert EngineConfig().config_hash() != EngineConfig(walk_order=3).config_hash()


class TestSnapshotCodec:
    def test_pack_unpack_round_trip(self):
        header = {"format": 1, "payload": {"a": [1, 2, 3]}}
        arrays = {
            "x": np.arange(6, dtype=np.float64).reshape(2, 3),
            "v": np.array([5, 6], dtype=np.int64),
        }
        blob = pack(header, arrays)
        got_header, got_arrays = unpack(blob)
        assert got_header["payload"] == {"a": [1, 2, 3]}
        assert np.array_equal(got_arrays["x"], arrays["x"])
        assert np.array_equal(got_arrays["v"], arrays["v"])

    def test_bad_magic(self):
        with pytest.raises(SnapshotCorruptError):
            unpack(b"NOTASNAPxxxx")

    def test_truncated_payload(self):
        blob = pack({"format": 1}, {"x": np.zeros(4)})
        with pytest.raises(SnapshotCorruptError):
            unpack(blob[:-8])

    def test_trailing_bytes(self):
        blob = pack({"format": 1}, {})
        with pytest.raises(SnapshotCorruptError):
            unpack(blob + b"junk")


class TestIngest:
    def test_summary_counts(self, tmp_path):
        nodes_path, edges_path = write_fixture_files(tmp_path)
        engine = Engine(EngineConfig())
        summary = engine.ingest_files(nodes_path, edges_path)
        assert summary == {"nodes": 5, "edges": 4, "indexed": 5}

    def test_malformed_line_reports_number_and_writes_nothing(self, tmp_path):
        nodes = list(FIVE_NODES)
        nodes[2] = {"id": "s1", "kind": "chapter", "content": "x", "timestamp": 1}
        nodes_path, edges_path = write_fixture_files(tmp_path, nodes=nodes)
        engine = Engine(EngineConfig())
        with pytest.raises(ParseError) as exc:
            engine.ingest_files(nodes_path, edges_path)
        assert exc.value.line == 3
        assert len(engine.graph) == 0  # parse-before-apply

    def test_reingest_byte_identical_snapshot(self, tmp_path):
        nodes_path, edges_path = write_fixture_files(tmp_path)
        blobs = []
        for _ in range(2):
            engine = Engine(EngineConfig())
            engine.ingest_files(nodes_path, edges_path)
            blobs.append(engine.to_snapshot_bytes())
        assert blobs[0] == blobs[1]

    def test_save_load_save_byte_identical(self, tmp_path):
        nodes_path, edges_path = write_fixture_files(tmp_path)
        engine = Engine(EngineConfig())
        engine.ingest_files(nodes_path, edges_path)
        snap_a = tmp_path / "a.snap"
        snap_b = tmp_path / "b.snap"
        engine.save(str(snap_a))
        Engine.load(str(snap_a)).save(str(snap_b))
        assert snap_a.read_bytes() == snap_b.read_bytes()

    def test_loaded_engine_serves_identical_results(self, tmp_path, fixture_corpus):
        nodes, edges = fixture_corpus
        engine = Engine(EngineConfig(probe_count=100000))
        engine.ingest(nodes, edges)
        path = tmp_path / "e.snap"
        engine.save(str(path))
        loaded = Engine.load(str(path))
        from fusegraph.retrieval import Intent, to_programmable_format

        intent = Intent(keywords="w00000 w00100", k=8)
        doc_a = to_programmable_format(engine.search_intent(intent), include_timing=False)
        doc_b = to_programmable_format(loaded.search_intent(intent), include_timing=False)
        assert doc_a == doc_b


class TestUpdate:
    def _engine(self, tmp_path):
        # Tiny fixture graphs are dense; lift the density trigger so the
        # update tests exercise the "below thresholds" behavior.
        nodes_path, edges_path = write_fixture_files(tmp_path)
        engine = Engine(EngineConfig(density_threshold=1.0))
        engine.ingest_files(nodes_path, edges_path)
        return engine

    def test_isolated_node_update(self, tmp_path):
        engine = self._engine(tmp_path)
        summary = engine.apply_update(
            [Node(id="loner", kind=NodeKind.PAPER, content="isolated text", timestamp=500)],
            [],
        )
        assert summary["recomputed"] == 1
        assert summary["inserted"] == 1
        assert summary["reduction"] is False
        assert engine.index.contains("loner")

    def test_new_edge_recomputes_k_ball_union(self, tmp_path):
        engine = self._engine(tmp_path)
        summary = engine.apply_update(
            [], [Edge(src="p2", dst="s2", relation=RelationType.CITATION)]
        )
        adj = undirected_adjacency(list(engine.graph.edges()))
        want = ball_union(adj, {"p2", "s2"}, 2)
        assert summary["recomputed"] == len(want)

    def test_content_replacement_by_id(self, tmp_path):
        engine = self._engine(tmp_path)
        before = engine.sem["p1"].copy()
        engine.apply_update(
            [Node(id="p1", kind=NodeKind.PAPER, content="totally new words", timestamp=100)],
            [],
        )
        assert not np.array_equal(engine.sem["p1"], before)
        assert engine.graph.node("p1").content == "totally new words"

    def test_reduction_reported_once_after_threshold(self, tmp_path):
        nodes_path, edges_path = write_fixture_files(tmp_path)
        engine = Engine(EngineConfig(update_threshold=3, reduced_dim=16, density_threshold=1.0))
        engine.ingest_files(nodes_path, edges_path)
        fired = []
        for i in range(6):
            summary = engine.apply_update(
                [Node(id=f"x{i}", kind=NodeKind.PAPER, content=f"fresh content {i}", timestamp=1000 + i)],
                [],
            )
            fired.append(summary["reduction"])
        assert fired.count(True) == 1
        assert engine.index.active_dim == 16

    def test_update_then_search_consistent(self, tmp_path):
        engine = self._engine(tmp_path)
        engine.apply_update(
            [Node(id="q1", kind=NodeKind.PAPER, content="alpha beta gamma", timestamp=400)],
            [],
        )
        from fusegraph.retrieval import Intent

        result = engine.search_intent(Intent(keywords="alpha beta gamma", k=6))
        assert "q1" in [e.node_id for e in result.entries]


class TestCli:
    def test_ingest_search_bench_flow(self, tmp_path):
        nodes_path = tmp_path / "nodes.jsonl"
        edges_path = tmp_path / "edges.jsonl"
        write_corpus(
            SyntheticSpec(papers=8, vocab_size=200, topics=2, seed=5),
            str(nodes_path),
            str(edges_path),
        )
        config_path = tmp_path / "config.json"
        snap_path = tmp_path / "engine.snap"
        config_path.write_text(json.dumps({"snapshot_path": str(snap_path)}))
        runner = CliRunner()

        res = runner.invoke(
            cli_main,
            ["ingest", "--nodes", str(nodes_path), "--edges", str(edges_path), "--config", str(config_path)],
        )
        assert res.exit_code == 0, res.output
        assert snap_path.exists()
        summary = json.loads(res.output)
        assert summary["indexed"] == summary["nodes"]

        res = runner.invoke(
            cli_main,
            ["search", "--query", "papers about w00000", "--k", "3",
             "--ref-date", "2026-08-10", "--config", str(config_path)],
        )
        assert res.exit_code == 0, res.output
        doc = json.loads(res.output)
        assert doc["query"]["granularity"] == "paper"
        assert len(doc["entries"]) <= 3

        res = runner.invoke(
            cli_main,
            ["update", "--nodes", str(nodes_path), "--config", str(config_path)],
        )
        assert res.exit_code == 0, res.output
        assert json.loads(res.output)["recomputed"] > 0

        res = runner.invoke(cli_main, ["build-index", "--config", str(config_path)])
        assert res.exit_code == 0, res.output

        res = runner.invoke(
            cli_main, ["bench", "--suite", "metric_props", "--config", '{"triples": 2000}']
        )
        assert res.exit_code == 0, res.output
        report = json.loads(res.output)
        assert report["suite"] == "metric_props"
        assert all(c["pass"] for c in report["criteria"])

    def test_ingest_malformed_aborts_without_snapshot(self, tmp_path):
        nodes_path = tmp_path / "nodes.jsonl"
        edges_path = tmp_path / "edges.jsonl"
        nodes_path.write_text(
            '{"id":"a","kind":"paper","content":"x","timestamp":1}\n'
            '{"id":"b","kind":"paper","content":"y","timestamp":2}\n'
            "BROKEN LINE\n"
        )
        edges_path.write_text("")
        snap_path = tmp_path / "engine.snap"
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"snapshot_path": str(snap_path)}))
        res = CliRunner().invoke(
            cli_main,
            ["ingest", "--nodes", str(nodes_path), "--edges", str(edges_path), "--config", str(config_path)],
        )
        assert res.exit_code != 0
        assert not snap_path.exists()

    def test_bench_unknown_suite_fails(self):
        res = CliRunner().invoke(cli_main, ["bench", "--suite", "nonsense"])
        assert res.exit_code != 0
