"""Hybrid diffusion signatures with locality-bounded incremental update.

A node's signature combines three m-dimensional features:

* topological — weighted mean of neighbor-minus-self embedding differences,
  with edge weights mixing semantic similarity and temporal relevance;
* semantic — the node's own content embedding;
* temporal — a sinusoidal encoding of the node's position in the corpus
  time extent.

A smoothing step then removes a damped residual against the neighborhood's
walk-free proxy. No global matrix is ever formed: every computation touches
only a node's 1-hop neighborhood, and incremental updates recompute exactly
the K-hop locality of the changed nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import MissingEmbeddingError, UnknownNodeError
from .graph import LiteratureGraph


@dataclass(frozen=True)
class SignatureParams:
    """Weights and scales for signature construction.

    ``lambda_edge``/``nu_edge`` weight semantic vs temporal similarity inside
    edge weights; ``lambda_topo``/``mu_sem``/``nu_time`` combine the three
    per-node features; ``beta_hodge`` damps the smoothing correction
    (0 disables it exactly). ``time_unit_seconds`` sets the gap unit for
    temporal relevance (default: days).
    """

    walk_order: int = 2
    lambda_edge: float = 0.4
    nu_edge: float = 0.2
    lambda_topo: float = 0.4
    mu_sem: float = 0.4
    nu_time: float = 0.2
    beta_hodge: float = 0.1
    time_unit_seconds: float = 86400.0

    def __post_init__(self) -> None:
        if self.walk_order < 1:
            raise ValueError("walk_order must be >= 1")
        if not 0.0 <= self.beta_hodge <= 1.0:
            raise ValueError("beta_hodge must be in [0, 1]")
        if self.lambda_topo + self.mu_sem + self.nu_time <= 0.0:
            raise ValueError("feature weights must have positive sum")
        if min(self.lambda_topo, self.mu_sem, self.nu_time) < 0.0:
            raise ValueError("feature weights must be nonnegative")
        if self.time_unit_seconds <= 0.0:
            raise ValueError("time_unit_seconds must be positive")


@dataclass
class HybridSignature:
    values: np.ndarray
    version: int


def sinusoidal_time_feature(tau: float, dim: int) -> np.ndarray:
    """L2-normalized sinusoidal encoding of tau in [0, 1].

    Even component 2i is sin(tau / 10000^(2i/dim)), odd component 2i+1 the
    matching cos; for odd dim the last sin has no cos partner.
    """
    vec = np.empty(dim, dtype=np.float64)
    for i in range(0, dim, 2):
        angle = tau / (10000.0 ** (i / dim))
        vec[i] = np.sin(angle)
        if i + 1 < dim:
            vec[i + 1] = np.cos(angle)
    return vec / float(np.linalg.norm(vec))


class SignatureEngine:
    """Computes and incrementally maintains the per-node signature table."""

    def __init__(
        self,
        graph: LiteratureGraph,
        embeddings: Mapping[str, np.ndarray],
        params: SignatureParams | None = None,
    ):
        self.graph = graph
        self.embeddings = embeddings
        self.params = params or SignatureParams()
        self.table: dict[str, HybridSignature] = {}
        self._time_cache: dict[int, np.ndarray] = {}
        self._cached_extent: tuple[int, int] | None = None

    # -- scalar pieces ------------------------------------------------------

    def temporal_relevance(self, t_v: int, t_u: int) -> float:
        """1 / (1 + |gap| in time units); 1.0 at zero gap."""
        gap = abs(t_v - t_u) / self.params.time_unit_seconds
        return 1.0 / (1.0 + gap)

    def edge_weight(self, v: str, u: str) -> float:
        """Nonnegative diffusion weight mixing content and time similarity."""
        sem_v = self._embedding(v)
        sem_u = self._embedding(u)
        # Unit-norm providers make cosine a plain dot product.
        sim_sem = max(0.0, float(np.clip(np.dot(sem_v, sem_u), -1.0, 1.0)))
        sim_time = self.temporal_relevance(
            self.graph.node(v).timestamp, self.graph.node(u).timestamp
        )
        return self.params.lambda_edge * sim_sem + self.params.nu_edge * sim_time

    # -- feature vectors -----------------------------------------------------

    def topological_feature(self, v: str) -> np.ndarray:
        """Edge-weighted mean of (neighbor - self) embedding differences.

        Zero vector for isolated nodes and for degenerate all-zero weights.
        """
        sem_v = self._embedding(v)
        nbrs = self.graph.neighbors(v)
        if not nbrs:
            return np.zeros_like(sem_v)
        weights = np.array([self.edge_weight(v, u) for u in nbrs], dtype=np.float64)
        total = float(weights.sum())
        if total <= 0.0:
            return np.zeros_like(sem_v)
        diffs = np.stack([self._embedding(u) for u in nbrs]) - sem_v
        return (weights[:, None] * diffs).sum(axis=0) / total

    def time_feature(self, t_v: int) -> np.ndarray:
        """Sinusoidal encoding of t_v normalized into the corpus extent."""
        extent = self.graph.time_extent
        if extent != self._cached_extent:
            self._time_cache.clear()
            self._cached_extent = extent
        cached = self._time_cache.get(t_v)
        if cached is not None:
            return cached
        t_min, t_max = extent
        tau = 0.0 if t_max == t_min else (t_v - t_min) / (t_max - t_min)
        vec = sinusoidal_time_feature(tau, self._dim())
        self._time_cache[t_v] = vec
        return vec

    def walk_free_proxy(self, u: str) -> np.ndarray:
        """Raw signature of u with the walk term dropped (mu*sem + nu*time)."""
        p = self.params
        return p.mu_sem * self._embedding(u) + p.nu_time * self.time_feature(
            self.graph.node(u).timestamp
        )

    def hodge_compensation(self, s_raw: np.ndarray, v: str) -> np.ndarray:
        """Damped residual of s_raw against the neighborhood's proxy mean.

        Returns the error term to subtract; zero for isolated nodes or when
        beta_hodge is 0.
        """
        if self.params.beta_hodge == 0.0:
            return np.zeros_like(s_raw)
        nbrs = self.graph.neighbors(v)
        if not nbrs:
            return np.zeros_like(s_raw)
        weights = np.array([self.edge_weight(v, u) for u in nbrs], dtype=np.float64)
        total = float(weights.sum())
        if total <= 0.0:
            return np.zeros_like(s_raw)
        proxies = np.stack([self.walk_free_proxy(u) for u in nbrs])
        avg = (weights[:, None] * proxies).sum(axis=0) / total
        return self.params.beta_hodge * (s_raw - avg)

    # -- signature construction ----------------------------------------------

    def compute_signature(self, v: str) -> HybridSignature:
        p = self.params
        sem_v = self._embedding(v)
        node = self.graph.node(v)
        s_raw = (
            p.lambda_topo * self.topological_feature(v)
            + p.mu_sem * sem_v
            + p.nu_time * self.time_feature(node.timestamp)
        )
        values = s_raw - self.hodge_compensation(s_raw, v)
        return HybridSignature(values=values, version=self.graph.update_count())

    def compute_all(self) -> None:
        for node_id in self.graph.node_ids():
            self.table[node_id] = self.compute_signature(node_id)

    def incremental_update(self, changed: Iterable[str]) -> set[str]:
        """Recompute signatures for the changed nodes and their K-hop balls.

        Returns the recomputed id set; signatures outside it are untouched.
        """
        locality = self.graph.locality_set(changed, self.params.walk_order)
        for node_id in sorted(locality):
            self.table[node_id] = self.compute_signature(node_id)
        return locality

    # -- helpers --------------------------------------------------------------

    def signature(self, v: str) -> HybridSignature:
        sig = self.table.get(v)
        if sig is None:
            raise UnknownNodeError(f"no signature for {v!r}")
        return sig

    def _embedding(self, v: str) -> np.ndarray:
        self.graph.node(v)  # raises UnknownNode first
        emb = self.embeddings.get(v)
        if emb is None:
            raise MissingEmbeddingError(f"node {v!r} has no embedding")
        return emb

    def _dim(self) -> int:
        for emb in self.embeddings.values():
            return int(emb.shape[0])
        raise MissingEmbeddingError("no embeddings present")
