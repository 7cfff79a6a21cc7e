"""Engine orchestration: wires graph, embeddings, signatures, encodings,
index, and retrieval behind one facade with snapshot persistence.

Mutations are funneled through a single writer lock; searches are read-only
and may run concurrently. The full pipeline is deterministic for fixed
seeds, so ingesting the same files twice produces byte-identical snapshots.
"""

from __future__ import annotations

import threading
from datetime import date

import numpy as np

from .config import EngineConfig, config_from_dict
from .encoding import ManifoldEmbedding, ManifoldEncoder, ProjectionModel
from .embedding import EmbedderConfig, make_embedder
from .errors import IndexNotBuiltError, TooFewNodesError
from .graph import (
    Edge,
    LiteratureGraph,
    Node,
    NodeKind,
    RelationType,
    read_edges_jsonl,
    read_nodes_jsonl,
)
from .index import IndexConfig, ManifoldIndex, TemporalMetricParams
from .retrieval import (
    ExternalParser,
    Intent,
    Retriever,
    RetrievalResult,
    RuleParser,
)
from .signature import SignatureEngine, SignatureParams
from . import snapshot as snap

SNAPSHOT_FORMAT = 1


class Engine:
    """One retrieval engine instance: state plus the processing pipeline."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.write_lock = threading.RLock()
        self.graph = LiteratureGraph()
        self.embedder = make_embedder(
            EmbedderConfig(
                dim=self.config.embedding_dim,
                provider=self.config.provider,
                remote_endpoint=self.config.remote_endpoint,
                batch_limit=self.config.remote_batch_limit,
            )
        )
        self.sem: dict[str, np.ndarray] = {}
        self.sigs = SignatureEngine(self.graph, self.sem, self._signature_params())
        self.model = ProjectionModel(
            dim_in=self.config.embedding_dim,
            dim_out=self.config.projection_dim,
            sigma_gate=self.config.sigma_gate,
            seed=self.config.projection_seed,
        )
        self.encoder = ManifoldEncoder(self.graph, self.model)
        self.enc: dict[str, ManifoldEmbedding] = {}
        self.index: ManifoldIndex | None = None
        if self.config.parser_endpoint:
            self.parser = ExternalParser(self.config.parser_endpoint)
        else:
            self.parser = RuleParser()

    def _signature_params(self) -> SignatureParams:
        c = self.config
        return SignatureParams(
            walk_order=c.walk_order,
            lambda_edge=c.lambda_edge,
            nu_edge=c.nu_edge,
            lambda_topo=c.lambda_topo,
            mu_sem=c.mu_sem,
            nu_time=c.nu_time,
            beta_hodge=c.beta_hodge,
            time_unit_seconds=c.time_unit_seconds,
        )

    def _metric_params(self) -> TemporalMetricParams:
        try:
            t_min, t_max = self.graph.time_extent
            span = float(max(1, t_max - t_min))
        except TooFewNodesError:
            span = 1.0
        return TemporalMetricParams(alpha=self.config.metric_alpha, max_time_diff=span)

    # -- batch ingestion ------------------------------------------------------

    def ingest(self, nodes: list[Node], edges: list[Edge]) -> dict:
        """Fresh build: load, embed, sign, encode, index."""
        with self.write_lock:
            for node in nodes:
                self.graph.add_node(node)
            for edge in edges:
                self.graph.add_edge(edge)
            ids = self.graph.node_ids()
            vectors = self.embedder.batch_embed([self.graph.node(i).content for i in ids])
            for node_id, vec in zip(ids, vectors):
                self.sem[node_id] = vec
            self.sigs.compute_all()
            for node_id in ids:
                self.enc[node_id] = self.encoder.encode(
                    node_id, self.sigs.table[node_id], self.sem[node_id]
                )
            self.build_index()
        return {"nodes": len(nodes), "edges": len(edges), "indexed": self.index.size}

    def ingest_files(self, nodes_path: str, edges_path: str) -> dict:
        nodes = read_nodes_jsonl(nodes_path)
        edges = read_edges_jsonl(edges_path)
        return self.ingest(nodes, edges)

    def build_index(self) -> None:
        """(Re)cluster all encodings; resets the graph's update counter."""
        with self.write_lock:
            metric = self._metric_params()
            index_config = IndexConfig(
                cluster_count=self.config.cluster_count,
                probe_count=self.config.probe_count,
                update_threshold=self.config.update_threshold,
                density_threshold=self.config.density_threshold,
                reduced_dim=self.config.reduced_dim,
                seed=self.config.index_seed,
            )
            index = ManifoldIndex(index_config, metric, self.config.projection_dim)
            entries = [
                (node_id, self.enc[node_id].values, float(self.graph.node(node_id).timestamp))
                for node_id in self.graph.node_ids()
            ]
            index.build(entries)
            self.index = index
            self.graph.reset_update_count()

    # -- incremental updates ----------------------------------------------------

    def apply_update(self, nodes: list[Node], edges: list[Edge]) -> dict:
        """Additive update: upsert nodes, add edges, refresh the locality set."""
        with self.write_lock:
            changed: list[str] = []
            new_ids: list[str] = []
            for node in nodes:
                if node.id in self.graph:
                    self.graph.replace_node(node)
                else:
                    self.graph.add_node(node)
                    new_ids.append(node.id)
                changed.append(node.id)
            for edge in edges:
                self.graph.add_edge(edge)
                changed.extend((edge.src, edge.dst))
            changed_set = set(changed)
            if changed_set:
                texts = [self.graph.node(i).content for i in sorted(changed_set)]
                for node_id, vec in zip(sorted(changed_set), self.embedder.batch_embed(texts)):
                    self.sem[node_id] = vec
            recomputed = self.sigs.incremental_update(changed_set) if changed_set else set()
            for node_id in sorted(recomputed):
                self.enc[node_id] = self.encoder.encode(
                    node_id, self.sigs.table[node_id], self.sem[node_id]
                )
            reduction = False
            if self.index is not None:
                # Track the corpus extent so the temporal term stays normalized.
                self.index.metric = self._metric_params()
                for node_id in sorted(recomputed):
                    vec = self.index.project_query(self.enc[node_id].values)
                    ts = float(self.graph.node(node_id).timestamp)
                    if self.index.contains(node_id):
                        self.index.update_entry(node_id, vec, ts)
                    else:
                        self.index.insert(node_id, vec, ts)
                density = 0.0
                if len(self.graph) >= 2:
                    density = self.graph.graph_density()
                reduction = self.index.maybe_reduce_order(density)
            return {
                "recomputed": len(recomputed),
                "reencoded": len(recomputed),
                "inserted": len(new_ids),
                "reduction": reduction,
            }

    def update_files(self, nodes_path: str | None, edges_path: str | None) -> dict:
        nodes = read_nodes_jsonl(nodes_path) if nodes_path else []
        edges = read_edges_jsonl(edges_path) if edges_path else []
        return self.apply_update(nodes, edges)

    # -- retrieval ----------------------------------------------------------------

    def retriever(self) -> Retriever:
        if self.index is None:
            raise IndexNotBuiltError("ingest or load a snapshot first")
        return Retriever(self.graph, self.embedder, self.index, self.model)

    def parse_intent(self, text: str, reference_date: date, k: int = 10) -> Intent:
        return self.parser.parse(text, reference_date, k=k)

    def search_intent(self, intent: Intent, parse_ms: float = 0.0) -> RetrievalResult:
        return self.retriever().search(intent, parse_ms=parse_ms)

    def search_text(self, text: str, reference_date: date, k: int = 10) -> RetrievalResult:
        import time as _time

        t0 = _time.perf_counter()
        intent = self.parse_intent(text, reference_date, k=k)
        parse_ms = (_time.perf_counter() - t0) * 1000.0
        return self.search_intent(intent, parse_ms=parse_ms)

    # -- persistence -----------------------------------------------------------------

    def save(self, path: str) -> None:
        with self.write_lock:
            snap.write_file(path, self.to_snapshot_bytes())

    def to_snapshot_bytes(self) -> bytes:
        ids = self.graph.node_ids()
        m = self.config.embedding_dim
        d = self.config.projection_dim
        header = {
            "format": SNAPSHOT_FORMAT,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "graph": {
                "nodes": [
                    [n.id, n.kind.value, n.content, n.timestamp]
                    for n in self.graph.nodes()
                ],
                "edges": [
                    [e.src, e.dst, e.relation.value] for e in self.graph.edges()
                ],
                "update_counter": self.graph._update_counter,
                "counter_baseline": self.graph._counter_baseline,
            },
            "index": self.index.to_state() if self.index is not None else None,
        }
        arrays: dict[str, np.ndarray] = {
            "sem": np.stack([self.sem[i] for i in ids]) if ids else np.zeros((0, m)),
            "sig_values": np.stack([self.sigs.table[i].values for i in ids])
            if ids
            else np.zeros((0, m)),
            "sig_versions": np.array(
                [self.sigs.table[i].version for i in ids], dtype=np.int64
            ),
            "enc_values": np.stack([self.enc[i].values for i in ids])
            if ids
            else np.zeros((0, d)),
            "enc_versions": np.array(
                [self.enc[i].version for i in ids], dtype=np.int64
            ),
            "w_base": self.model.w_base,
        }
        for rel in RelationType:
            arrays[f"w_rel_{rel.value}"] = self.model.w_rel[rel]
        if self.index is not None:
            arrays.update(self.index.arrays())
        return snap.pack(header, arrays)

    @classmethod
    def load(cls, path: str) -> "Engine":
        header, arrays = snap.read_file(path)
        config = config_from_dict(header["config"])
        engine = cls(config)
        g = engine.graph
        for rec in header["graph"]["nodes"]:
            g.add_node(
                Node(id=rec[0], kind=NodeKind(rec[1]), content=rec[2], timestamp=rec[3])
            )
        for rec in header["graph"]["edges"]:
            g.add_edge(Edge(src=rec[0], dst=rec[1], relation=RelationType(rec[2])))
        g._update_counter = header["graph"]["update_counter"]
        g._counter_baseline = header["graph"]["counter_baseline"]
        ids = g.node_ids()
        from .signature import HybridSignature

        for row, node_id in enumerate(ids):
            engine.sem[node_id] = arrays["sem"][row]
            engine.sigs.table[node_id] = HybridSignature(
                values=arrays["sig_values"][row],
                version=int(arrays["sig_versions"][row]),
            )
            engine.enc[node_id] = ManifoldEmbedding(
                values=arrays["enc_values"][row],
                version=int(arrays["enc_versions"][row]),
            )
        engine.model.w_base = arrays["w_base"]
        for rel in RelationType:
            engine.model.w_rel[rel] = arrays[f"w_rel_{rel.value}"]
        if header["index"] is not None:
            engine.index = ManifoldIndex.from_state(header["index"], arrays)
        return engine
