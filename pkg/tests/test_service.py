import json
import threading

import pytest
from fastapi.testclient import TestClient

from fusegraph import Engine, EngineConfig
from fusegraph.errors import BusyError
from fusegraph.retrieval import Intent, RuleParser, to_programmable_format
from fusegraph.service import _WriteGate, create_app


@pytest.fixture(scope="module")
def service_engine(fixture_corpus):
    nodes, edges = fixture_corpus
    engine = Engine(EngineConfig(probe_count=100000, density_threshold=1.0))
    engine.ingest(nodes, edges)
    return engine


@pytest.fixture()
def client(service_engine):
    return TestClient(create_app(service_engine))


def strip_timing(doc_bytes: bytes) -> dict:
    doc = json.loads(doc_bytes)
    doc.pop("timing", None)
    return doc


class TestHealth:
    def test_health(self, client, service_engine):
        resp = client.get("/v1/health")
        assert resp.status_code == 200
        assert resp.json() == {
            "status": "ok",
            "nodes": len(service_engine.graph),
            "active_dim": service_engine.index.active_dim,
        }


class TestSearch:
    def test_wire_equals_in_process(self, client, service_engine, ref_date):
        parser = RuleParser()
        intent = parser.parse("papers about w00000", ref_date, k=5)
        resp = client.post(
            "/v1/search",
            json={
                "keywords": intent.keywords,
                "granularity": "paper",
                "time_range": None,
                "relation_type": None,
                "k": 5,
            },
        )
        assert resp.status_code == 200
        lib_doc = to_programmable_format(service_engine.search_intent(intent))
        assert strip_timing(resp.content) == strip_timing(lib_doc.encode())
        # Full documents differ only in the timing block.
        wire_full = json.loads(resp.content)
        lib_full = json.loads(lib_doc)
        assert set(wire_full) == set(lib_full) == {"query", "entries", "timing"}

    def test_text_body_parses_and_searches(self, client):
        resp = client.post(
            "/v1/search",
            json={"text": "papers about w00100", "reference_date": "2026-08-10", "k": 4},
        )
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["query"]["granularity"] == "paper"
        assert all(e["kind"] == "paper" for e in doc["entries"])

    def test_empty_keywords_400(self, client):
        resp = client.post("/v1/search", json={"text": "   "})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "EmptyQuery"

    def test_unresolvable_intent_400(self, client):
        resp = client.post(
            "/v1/search", json={"text": "since 2020", "reference_date": "2026-08-10"}
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "UnresolvableIntent"

    def test_malformed_body_400(self, client):
        resp = client.post(
            "/v1/search", content=b"not json", headers={"content-type": "application/json"}
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "ParseError"

    def test_invalid_intent_document_400(self, client):
        resp = client.post("/v1/search", json={"keywords": "x", "k": "many"})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "ParseError"


class TestIntentEndpoint:
    def test_parse_only(self, client):
        resp = client.post(
            "/v1/intent",
            json={"text": "sections since 2019 about w00300", "reference_date": "2026-08-10"},
        )
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["granularity"] == "section"
        assert doc["keywords"] == "w00300"
        assert doc["time_range"][0] == 1546300800  # 2019-01-01T00:00:00Z

    def test_missing_text_400(self, client):
        resp = client.post("/v1/intent", json={"reference_date": "2026-08-10"})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "EmptyQuery"


class TestMutations:
    def test_post_node_and_search_it(self, client):
        before = client.get("/v1/health").json()["nodes"]
        body = {
            "id": "posted-node",
            "kind": "paper",
            "content": "w00000 w00001 posted paper",
            "timestamp": 1700000000,
        }
        resp = client.post("/v1/nodes", json=body)
        assert resp.status_code == 200
        assert resp.json()["recomputed"] >= 1
        resp = client.get("/v1/health")
        assert resp.json()["nodes"] == before + 1

    def test_post_edge(self, client):
        resp = client.post(
            "/v1/edges",
            json={"src": "posted-node", "dst": "p000000", "relation": "citation"},
        )
        assert resp.status_code == 200
        assert resp.json()["recomputed"] >= 2

    def test_duplicate_edge_409(self, client):
        edge = {"src": "posted-node", "dst": "p000001", "relation": "citation"}
        assert client.post("/v1/edges", json=edge).status_code == 200
        resp = client.post("/v1/edges", json=edge)
        assert resp.status_code == 409
        assert resp.json()["error"]["code"] == "DuplicateEdge"

    def test_unknown_endpoint_400(self, client):
        resp = client.post(
            "/v1/edges", json={"src": "nope", "dst": "p000000", "relation": "citation"}
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "UnknownEndpoint"

    def test_self_loop_400(self, client):
        resp = client.post(
            "/v1/edges", json={"src": "p000000", "dst": "p000000", "relation": "citation"}
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "SelfLoop"

    def test_invalid_node_document_400(self, client):
        resp = client.post("/v1/nodes", json={"id": "x", "kind": "paper"})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "ParseError"


class TestConcurrency:
    def test_reads_during_writes(self, service_engine):
        client = TestClient(create_app(service_engine))
        errors = []

        def reader():
            for _ in range(10):
                resp = client.post("/v1/search", json={"keywords": "w00000", "k": 3})
                if resp.status_code != 200:
                    errors.append(resp.status_code)

        def writer():
            for i in range(5):
                resp = client.post(
                    "/v1/nodes",
                    json={
                        "id": f"conc-{threading.get_ident()}-{i}",
                        "kind": "paper",
                        "content": f"concurrent write {i}",
                        "timestamp": 1700000000 + i,
                    },
                )
                if resp.status_code not in (200, 429):
                    errors.append(resp.status_code)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        threads += [threading.Thread(target=writer) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []

    def test_write_gate_overflow_is_busy(self):
        gate = _WriteGate(2)
        with gate:
            with gate:
                with pytest.raises(BusyError):
                    gate.__enter__()
