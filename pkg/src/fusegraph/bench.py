"""Benchmark and verification suites over synthetic corpora.

Each suite emits a machine-readable report: per-criterion target, measured
value, and pass flag. Suites measure the engine against exact oracles and
scaling laws rather than external baselines, so reports are deterministic
in pass/fail (timings vary run to run; thresholds carry headroom).
"""

from __future__ import annotations

import math
import platform
import statistics
import sys
import time
import tracemalloc

import numpy as np
from scipy import stats as scipy_stats
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score

from .config import EngineConfig
from .engine import Engine
from .errors import UnknownSuiteError
from .index import IndexConfig, ManifoldIndex, temporal_metric, TemporalMetricParams
from .synth import SyntheticSpec, generate

SUITES = ("update_perf", "recall", "storage", "metric_props", "theorem_checks")

# Spec tuned so 13 nodes/paper and ~32.5 edges/paper give average degree ~5.
DEGREE5 = dict(
    sections_per_paper=(2, 4),
    units_per_section=(2, 4),
    citations_per_paper=5,
    associations_per_unit=1.7,
)


def papers_for_nodes(n: int) -> int:
    """Paper count whose expected hierarchy size is about n nodes."""
    return max(1, round(n / 13))


def build_engine(n_nodes: int, seed: int, config: EngineConfig | None = None) -> Engine:
    spec = SyntheticSpec(papers=papers_for_nodes(n_nodes), seed=seed, **DEGREE5)
    nodes, edges = generate(spec)
    engine = Engine(config or EngineConfig())
    engine.ingest(nodes, edges)
    return engine


def brute_force_knn(
    mat: np.ndarray,
    ids: list[str],
    ts: np.ndarray,
    query: np.ndarray,
    query_ts: float | None,
    k: int,
    metric: TemporalMetricParams,
) -> list[str]:
    """Exhaustive scan oracle used by the recall suites."""
    dists = np.arccos(np.clip(mat @ query, -1.0, 1.0))
    if query_ts is not None:
        dists = dists + metric.alpha * np.minimum(1.0, np.abs(ts - query_ts) / metric.max_time_diff)
    order = np.lexsort((np.array(ids), dists))[:k]
    return [ids[i] for i in order]


def _environment() -> dict:
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
    }


def _criterion(name: str, target: str, measured, passed: bool) -> dict:
    return {"name": name, "target": target, "measured": measured, "pass": bool(passed)}


def _report(suite: str, config: dict, criteria: list[dict]) -> dict:
    return {
        "suite": suite,
        "config": config,
        "criteria": criteria,
        "environment": _environment(),
    }


# -- suites -------------------------------------------------------------------


def _suite_update_perf(config: dict) -> dict:
    sizes = config.get("sizes", [1000, 5000])
    updates = config.get("updates", 50)
    seed = config.get("seed", 42)
    medians: list[float] = []
    peaks: list[int] = []
    for n in sizes:
        spec = SyntheticSpec(papers=papers_for_nodes(n), seed=seed, **DEGREE5)
        nodes, edges = generate(spec)
        engine = Engine(EngineConfig())
        engine.ingest(nodes, edges)
        ids = engine.graph.node_ids()
        rng = np.random.default_rng(seed + 1)
        picks = [ids[int(i)] for i in rng.integers(0, len(ids), size=updates)]
        per_node: list[float] = []
        tracemalloc.start()
        tracemalloc.reset_peak()
        for node_id in picks:
            t0 = time.perf_counter()
            recomputed = engine.sigs.incremental_update({node_id})
            elapsed = time.perf_counter() - t0
            per_node.append(elapsed * 1000.0 / max(1, len(recomputed)))
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        medians.append(statistics.median(per_node))
        peaks.append(peak)
    criteria = [
        _criterion(
            f"median_per_node_ms_n{sizes[-1]}", "< 1.0 ms", medians[-1], medians[-1] < 1.0
        )
    ]
    if len(sizes) > 1:
        growth = medians[-1] / max(medians[0], 1e-12)
        criteria.append(_criterion("median_growth", "< 1.5x across sizes", growth, growth < 1.5))
        mem_ratio = peaks[-1] / max(peaks[0], 1)
        criteria.append(
            _criterion("update_peak_memory_ratio", "< 2.0x across sizes", mem_ratio, mem_ratio < 2.0)
        )
    return _report("update_perf", config, criteria)


def held_out_split(
    n: int, n_queries: int, seed: int, config: EngineConfig | None = None
) -> tuple[Engine, ManifoldIndex, list[str], list[str]]:
    """Engine over n + n_queries nodes with an index over an n-node subset.

    Queries are the held-out encoded nodes: real corpus points drawn from
    the same distribution but absent from the index.
    """
    engine = build_engine(n + n_queries, seed, config)
    ids_all = engine.graph.node_ids()
    # The hierarchy generator lands near, not exactly at, the target size.
    n_queries = min(n_queries, max(1, len(ids_all) - n))
    n = len(ids_all) - n_queries
    rng = np.random.default_rng(seed + 1)
    perm = rng.permutation(len(ids_all))
    index_ids = [ids_all[i] for i in perm[:n]]
    query_ids = [ids_all[i] for i in perm[n : n + n_queries]]
    idx = ManifoldIndex(
        IndexConfig(seed=engine.config.index_seed),
        engine.index.metric,
        engine.config.projection_dim,
    )
    idx.build(
        [
            (nid, engine.enc[nid].values, float(engine.graph.node(nid).timestamp))
            for nid in index_ids
        ]
    )
    return engine, idx, index_ids, query_ids


def _suite_recall(config: dict) -> dict:
    n = config.get("n", 2000)
    n_queries = config.get("queries", 200)
    k = config.get("k", 10)
    seed = config.get("seed", 42)
    engine, idx, index_ids, query_ids = held_out_split(n, n_queries, seed)
    n_queries = len(query_ids)
    mat = np.stack([engine.enc[i].values for i in index_ids])
    ts = np.array([float(engine.graph.node(i).timestamp) for i in index_ids])

    probe_frac = config.get("probe_frac", 0.1)
    probes = max(1, math.ceil(probe_frac * idx.cluster_count))
    hits = 0
    exact = 0
    for qid in query_ids:
        q = engine.enc[qid].values
        qt = float(engine.graph.node(qid).timestamp)
        oracle = brute_force_knn(mat, index_ids, ts, q, qt, k, idx.metric)
        approx = [i for i, _ in idx.knn(q, qt, k, probe_count=probes)]
        full = [i for i, _ in idx.knn(q, qt, k, probe_count=idx.cluster_count)]
        hits += len(set(oracle) & set(approx))
        exact += int(full == oracle)
    recall = hits / (n_queries * k)
    exact_frac = exact / n_queries
    return _report(
        "recall",
        config,
        [
            _criterion("exact_recall_full_probe", "= 1.0", exact_frac, exact_frac == 1.0),
            _criterion(f"recall_at_{k}_probe_{probe_frac}", ">= 0.9", recall, recall >= 0.9),
        ],
    )


def _suite_storage(config: dict) -> dict:
    sizes = config.get("sizes", [1000, 5000])
    seed = config.get("seed", 42)
    per_node: list[float] = []
    for n in sizes:
        engine = build_engine(n, seed)
        blob = engine.to_snapshot_bytes()
        per_node.append(len(blob) / len(engine.graph))
    diff = abs(per_node[-1] - per_node[0]) / per_node[0]
    return _report(
        "storage",
        config,
        [
            _criterion(
                "bytes_per_node_drift", "< 10% across sizes", diff, diff < 0.10
            )
        ],
    )


def _suite_metric_props(config: dict) -> dict:
    triples = int(config.get("triples", 100_000))
    seed = config.get("seed", 42)
    dim = config.get("dim", 16)
    rng = np.random.default_rng(seed)
    metric = TemporalMetricParams(alpha=0.25, max_time_diff=1000.0)
    vecs = rng.normal(size=(triples, 3, dim))
    vecs = vecs / np.linalg.norm(vecs, axis=2, keepdims=True)
    ts = rng.uniform(0, 5000, size=(triples, 3))

    def pairwise(i: int, j: int) -> np.ndarray:
        dots = np.einsum("nd,nd->n", vecs[:, i, :], vecs[:, j, :])
        base = np.arccos(np.clip(dots, -1.0, 1.0))
        gap = np.minimum(1.0, np.abs(ts[:, i] - ts[:, j]) / metric.max_time_diff)
        return base + metric.alpha * gap

    d_ab, d_ba = pairwise(0, 1), pairwise(1, 0)
    d_bc, d_ac = pairwise(1, 2), pairwise(0, 2)
    symmetric = bool(np.array_equal(d_ab, d_ba))
    violation = float(np.max(d_ac - (d_ab + d_bc)))
    zero_alpha = TemporalMetricParams(alpha=0.0, max_time_diff=1000.0)
    probe = rng.normal(size=(2, dim))
    probe = probe / np.linalg.norm(probe, axis=1, keepdims=True)
    reduction_err = abs(
        temporal_metric(probe[0], 0.0, probe[1], 999.0, zero_alpha)
        - float(np.arccos(np.clip(np.dot(probe[0], probe[1]), -1, 1)))
    )
    return _report(
        "metric_props",
        config,
        [
            _criterion("symmetry", "exact", symmetric, symmetric),
            _criterion("triangle_violation", "<= 1e-9", violation, violation <= 1e-9),
            _criterion("alpha_zero_reduction", "<= 1e-12", reduction_err, reduction_err <= 1e-12),
        ],
    )


def _adjacency_auc(engine: Engine, seed: int) -> tuple[float, float]:
    """ROC-AUC separating adjacent pairs from random non-adjacent pairs.

    Returns (auc, separating_threshold): the threshold maximizes
    TPR - FPR over the pooled distance distribution.
    """
    graph = engine.graph
    idx = engine.index
    rng = np.random.default_rng(seed)
    ids = graph.node_ids()
    pos: list[float] = []
    edges = list(graph.edges())
    sample = rng.choice(len(edges), size=min(len(edges), 2000), replace=False)
    for e_i in sample:
        e = edges[int(e_i)]
        d = temporal_metric(
            idx.project_query(engine.enc[e.src].values),
            graph.node(e.src).timestamp,
            idx.project_query(engine.enc[e.dst].values),
            graph.node(e.dst).timestamp,
            idx.metric,
        )
        pos.append(d)
    neg: list[float] = []
    edge_keys = {(e.src, e.dst) for e in edges} | {(e.dst, e.src) for e in edges}
    while len(neg) < len(pos):
        a, b = rng.integers(len(ids)), rng.integers(len(ids))
        u, v = ids[int(a)], ids[int(b)]
        if u == v or (u, v) in edge_keys:
            continue
        neg.append(
            temporal_metric(
                idx.project_query(engine.enc[u].values),
                graph.node(u).timestamp,
                idx.project_query(engine.enc[v].values),
                graph.node(v).timestamp,
                idx.metric,
            )
        )
    scores = np.concatenate([np.array(pos), np.array(neg)])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    auc = float(roc_auc_score(labels, -scores))
    order = np.argsort(scores)
    sorted_scores, sorted_labels = scores[order], labels[order]
    tpr = np.cumsum(sorted_labels) / len(pos)
    fpr = np.cumsum(1 - sorted_labels) / len(neg)
    best = int(np.argmax(tpr - fpr))
    return auc, float(sorted_scores[best])


def _signature_semantic_spearman(engine: Engine, pairs: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    ids = engine.graph.node_ids()
    sig_cos, sem_cos = [], []
    for _ in range(pairs):
        a, b = ids[int(rng.integers(len(ids)))], ids[int(rng.integers(len(ids)))]
        if a == b:
            continue
        s_a, s_b = engine.sigs.table[a].values, engine.sigs.table[b].values
        denom = np.linalg.norm(s_a) * np.linalg.norm(s_b)
        sig_cos.append(float(np.dot(s_a, s_b) / denom) if denom > 0 else 0.0)
        sem_cos.append(float(np.dot(engine.sem[a], engine.sem[b])))
    res = scipy_stats.spearmanr(sig_cos, sem_cos)
    return float(getattr(res, "statistic", getattr(res, "correlation", float("nan"))))


def _kind_separability(engine: Engine, seed: int) -> float:
    ids = engine.graph.node_ids()
    X = np.stack([engine.enc[i].values for i in ids])
    y = np.array([engine.graph.node(i).kind.value for i in ids])
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    split = int(0.7 * len(ids))
    train, test = order[:split], order[split:]
    clf = LogisticRegression(max_iter=500)
    clf.fit(X[train], y[train])
    return float(clf.score(X[test], y[test]))


def _suite_theorem_checks(config: dict) -> dict:
    n = config.get("n", 2000)
    seeds = config.get("seeds", [42, 43, 44])
    pairs = config.get("pairs", 2000)
    epsilon_report = config.get("epsilon_report", True)
    criteria = []
    aucs, accs, epsilons = [], [], []
    engines = {seed: build_engine(n, seed) for seed in seeds}
    for seed in seeds:
        auc, eps = _adjacency_auc(engines[seed], seed)
        aucs.append(auc)
        epsilons.append(eps)
        accs.append(_kind_separability(engines[seed], seed))
    rho = _signature_semantic_spearman(engines[seeds[0]], pairs, seeds[0])
    criteria.append(
        _criterion("diffusion_similarity_spearman", ">= 0.3", rho, rho >= 0.3)
    )
    criteria.append(
        _criterion("adjacency_auc_min", ">= 0.8 on all seeds", min(aucs), min(aucs) >= 0.8)
    )
    if epsilon_report:
        criteria.append(
            _criterion("epsilon_threshold", "reported statistic", epsilons, True)
        )
    criteria.append(
        _criterion(
            "kind_linear_separability_min", ">= 0.8 on all seeds", min(accs), min(accs) >= 0.8
        )
    )
    return _report("theorem_checks", config, criteria)


_SUITE_FNS = {
    "update_perf": _suite_update_perf,
    "recall": _suite_recall,
    "storage": _suite_storage,
    "metric_props": _suite_metric_props,
    "theorem_checks": _suite_theorem_checks,
}


def run_suite(name: str, config: dict | None = None) -> dict:
    if name not in _SUITE_FNS:
        raise UnknownSuiteError(f"unknown suite {name!r}; choose from {SUITES}")
    return _SUITE_FNS[name](dict(config or {}))
