"""Time-augmented nearest-neighbor index over unit-sphere embeddings.

The metric is geodesic (angular) distance plus a capped, normalized
timestamp-gap term. The index is an inverted file: a seeded spherical
k-means coarse quantizer with per-cluster exact re-ranking, so probing every
cluster reproduces brute-force search exactly. When update or density
thresholds trip, the index reduces its active dimension by keeping the
highest-variance coordinates and renormalizing everything in place.

Readers may query concurrently; insert and reduction require the caller's
writer lock. A reduction swaps internal arrays only after the reduced copies
are fully built, so a reader never sees mixed dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyInputError,
    IndexNotBuiltError,
)

KMEANS_MAX_ITERS = 25
KMEANS_TOL = 1e-4
IMBALANCE_FACTOR = 8.0
FALLBACK_EPS = 1e-12


@dataclass(frozen=True)
class TemporalMetricParams:
    alpha: float = 0.25
    max_time_diff: float = 1.0  # corpus time extent span, seconds

    def __post_init__(self) -> None:
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.max_time_diff <= 0.0:
            raise ValueError("max_time_diff must be positive")


@dataclass(frozen=True)
class IndexConfig:
    """Knobs for the inverted-file index; None means derive at build time."""

    cluster_count: int | None = None  # default: ceil(sqrt(n))
    probe_count: int | None = None  # default: ceil(0.1 * C)
    update_threshold: int = 1000
    density_threshold: float = 0.01
    reduced_dim: int | None = None  # default: ceil(D / 2)
    seed: int = 13

    def __post_init__(self) -> None:
        if self.cluster_count is not None and self.cluster_count < 1:
            raise ValueError("cluster_count must be >= 1")
        if self.probe_count is not None and self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")
        if self.update_threshold < 1:
            raise ValueError("update_threshold must be >= 1")
        if not 0.0 < self.density_threshold <= 1.0:
            raise ValueError("density_threshold must be in (0, 1]")
        if self.reduced_dim is not None and self.reduced_dim < 4:
            raise ValueError("reduced_dim must be >= 4")


def base_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic distance on the unit sphere, in [0, pi].

    Bit-identical inputs return exactly 0.0: float dot products of a unit
    vector with itself can land 1 ulp below 1, and the index's self-match
    and tie-break contracts need true zeros on identical pairs.
    """
    if a.shape != b.shape:
        raise DimensionMismatchError(f"distance on shapes {a.shape} vs {b.shape}")
    dot = float(np.dot(a, b))
    if dot >= 1.0 - 1e-12 and np.array_equal(a, b):
        return 0.0
    return float(np.arccos(np.clip(dot, -1.0, 1.0)))


def temporal_metric(
    a: np.ndarray,
    t_a: float,
    b: np.ndarray,
    t_b: float,
    params: TemporalMetricParams,
) -> float:
    """Geodesic distance plus alpha times the capped normalized time gap."""
    gap = min(1.0, abs(t_a - t_b) / params.max_time_diff)
    return base_distance(a, b) + params.alpha * gap


def _renorm_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-normalize; degenerate rows fall back to the first axis."""
    out = matrix.copy()
    norms = np.linalg.norm(out, axis=1)
    degenerate = norms < FALLBACK_EPS
    if degenerate.any():
        out[degenerate] = 0.0
        out[degenerate, 0] = 1.0
        norms = np.where(degenerate, 1.0, norms)
    return out / norms[:, None]


def _spherical_kmeans(
    points: np.ndarray, n_clusters: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded spherical k-means; returns (centroids, assignment).

    Initialization is k-means++ on chordal distance (monotone in the
    geodesic); iteration stops after KMEANS_MAX_ITERS or when no centroid
    moves more than KMEANS_TOL radians.
    """
    n = points.shape[0]
    n_clusters = min(n_clusters, n)
    rng = np.random.default_rng(seed)

    first = int(rng.integers(n))
    centroids = [points[first]]
    closest = np.maximum(0.0, 2.0 - 2.0 * (points @ points[first]))
    for _ in range(1, n_clusters):
        total = float(closest.sum())
        if total <= 0.0:
            pick = int(np.argmin(closest))  # all points coincide
        else:
            pick = int(rng.choice(n, p=closest / total))
        centroids.append(points[pick])
        closest = np.minimum(closest, np.maximum(0.0, 2.0 - 2.0 * (points @ points[pick])))
    cents = np.stack(centroids)

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITERS):
        sims = points @ cents.T
        assign = np.argmax(sims, axis=1)
        member_sim = sims[np.arange(n), assign]
        counts = np.bincount(assign, minlength=n_clusters)
        for c in np.flatnonzero(counts == 0):
            # Steal the point farthest from its centroid (deterministic).
            idx = int(np.argmin(member_sim))
            assign[idx] = c
            member_sim[idx] = np.inf
        sums = np.zeros_like(cents)
        np.add.at(sums, assign, points)
        norms = np.linalg.norm(sums, axis=1)
        stuck = norms < FALLBACK_EPS
        new_cents = np.where(stuck[:, None], cents, sums / np.maximum(norms, FALLBACK_EPS)[:, None])
        movement = np.arccos(np.clip((new_cents * cents).sum(axis=1), -1.0, 1.0)).max()
        cents = new_cents
        if movement < KMEANS_TOL:
            break
    assign = np.argmax(points @ cents.T, axis=1)
    return cents, assign


class _Store:
    """The searchable state bundle.

    Readers grab one reference and work against it; a dimension reduction
    builds a complete replacement and swaps it in with a single attribute
    assignment, so a concurrent reader never observes mixed dimensions.
    In-place mutations (insert/update) keep dimensions constant and are
    append-or-replace, which concurrent readers tolerate under the GIL.
    """

    __slots__ = (
        "ids", "vecs", "ts", "postings", "centroid_of", "centroids",
        "cache", "active_dims",
    )

    def __init__(self, ids, vecs, ts, postings, centroid_of, centroids, active_dims):
        self.ids: list[str] = ids
        self.vecs: list[np.ndarray] = vecs
        self.ts: list[float] = ts
        self.postings: list[list[int]] = postings
        self.centroid_of: list[int] = centroid_of
        self.centroids: np.ndarray = centroids
        self.active_dims: list[int] = active_dims
        self.cache: list[tuple[np.ndarray, np.ndarray, np.ndarray] | None] = [
            None
        ] * centroids.shape[0]

    @property
    def active_dim(self) -> int:
        return len(self.active_dims)

    def posting_arrays(self, c: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cached = self.cache[c]
        if cached is None:
            rows = list(self.postings[c])
            if rows:
                ids = np.array([self.ids[r] for r in rows])
                mat = np.stack([self.vecs[r] for r in rows])
                ts = np.array([self.ts[r] for r in rows], dtype=np.float64)
            else:
                ids = np.empty(0, dtype=str)
                mat = np.zeros((0, self.active_dim))
                ts = np.zeros(0)
            cached = (ids, mat, ts)
            self.cache[c] = cached
        return cached


class ManifoldIndex:
    """Inverted-file index under the time-augmented geodesic metric."""

    def __init__(self, config: IndexConfig, metric: TemporalMetricParams, dim: int):
        self.config = config
        self.metric = metric
        self.dim = dim  # original embedding dimension D
        self.updates_since_build = 0
        self.rebuild_advised = False
        self.reduced = False
        self._built = False
        self._row_of: dict[str, int] = {}
        self._s = _Store([], [], [], [], [], np.zeros((0, dim)), list(range(dim)))
        # Welford accumulators over stored vectors, per active coordinate.
        self._w_count = 0
        self._w_mean = np.zeros(dim)
        self._w_m2 = np.zeros(dim)

    # -- construction -------------------------------------------------------

    def build(self, entries: Sequence[tuple[str, np.ndarray, float]]) -> None:
        """Cluster and index (id, embedding, timestamp) entries."""
        if not entries:
            raise EmptyInputError("cannot build an index over zero entries")
        ids = [e[0] for e in entries]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("duplicate ids in index input")
        mat = np.stack([np.asarray(e[1], dtype=np.float64) for e in entries])
        if mat.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected dim {self.dim}, got {mat.shape[1]}"
            )
        n = len(entries)
        n_clusters = self.config.cluster_count or math.ceil(math.sqrt(n))
        cents, assign = _spherical_kmeans(mat, n_clusters, self.config.seed)

        postings: list[list[int]] = [[] for _ in range(cents.shape[0])]
        centroid_of = [0] * n
        for row, c in enumerate(assign):
            postings[int(c)].append(row)
            centroid_of[row] = int(c)
        self._row_of = {node_id: row for row, node_id in enumerate(ids)}
        self._s = _Store(
            ids=list(ids),
            vecs=[mat[i] for i in range(n)],
            ts=[float(e[2]) for e in entries],
            postings=postings,
            centroid_of=centroid_of,
            centroids=cents,
            active_dims=list(range(self.dim)),
        )
        self._w_count = n
        self._w_mean = mat.mean(axis=0)
        self._w_m2 = ((mat - self._w_mean) ** 2).sum(axis=0)
        self.updates_since_build = 0
        self.rebuild_advised = False
        self.reduced = False
        self._built = True

    # -- queries --------------------------------------------------------------

    @property
    def built(self) -> bool:
        return self._built

    @property
    def size(self) -> int:
        return len(self._s.ids)

    def contains(self, node_id: str) -> bool:
        return node_id in self._row_of

    @property
    def active_dims(self) -> list[int]:
        return self._s.active_dims

    @property
    def active_dim(self) -> int:
        return self._s.active_dim

    @property
    def cluster_count(self) -> int:
        return self._s.centroids.shape[0]

    def default_probe_count(self) -> int:
        if self.config.probe_count is not None:
            return min(self.config.probe_count, self.cluster_count)
        return max(1, math.ceil(0.1 * self.cluster_count))

    def project_query(self, vec: np.ndarray) -> np.ndarray:
        """Select the active coordinates of a full-width vector, renormalized.

        Accepts any vector at least D wide (semantic vectors included, since
        D <= m by configuration).
        """
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] < self.dim:
            raise DimensionMismatchError(
                f"query of width {vec.shape} cannot cover dim {self.dim}"
            )
        active = self._s.active_dims
        sub = vec[active]
        norm = float(np.linalg.norm(sub))
        if norm < FALLBACK_EPS:
            out = np.zeros(len(active))
            out[0] = 1.0
            return out
        return sub / norm

    def knn(
        self,
        query: np.ndarray,
        query_ts: float | None,
        k: int,
        probe_count: int | None = None,
    ) -> list[tuple[str, float]]:
        """Top-k (id, distance) ascending, ties broken by id.

        With probe_count equal to the cluster count this is exact
        brute-force search.
        """
        self._require_built()
        s = self._s  # one consistent snapshot for the whole query
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (s.active_dim,):
            raise DimensionMismatchError(
                f"query shape {query.shape} != active dim {s.active_dim}"
            )
        if k < 1:
            raise ValueError("k must be >= 1")
        clusters = s.centroids.shape[0]
        if probe_count is not None:
            probes = min(probe_count, clusters)
        elif self.config.probe_count is not None:
            probes = min(self.config.probe_count, clusters)
        else:
            probes = max(1, math.ceil(0.1 * clusters))
        order = np.argsort(-(s.centroids @ query), kind="stable")[:probes]

        id_parts: list[np.ndarray] = []
        dist_parts: list[np.ndarray] = []
        for c in order:
            ids_c, mat_c, ts_c = s.posting_arrays(int(c))
            if ids_c.shape[0] == 0:
                continue
            dots = mat_c @ query
            # Force exact matches onto dot = 1 so identical vectors are true
            # ties at distance zero (BLAS row dots vary by row position).
            for r in np.flatnonzero(dots >= 1.0 - 1e-12):
                if np.array_equal(mat_c[r], query):
                    dots[r] = 1.0
            dists = np.arccos(np.clip(dots, -1.0, 1.0))
            if query_ts is not None:
                gap = np.minimum(1.0, np.abs(ts_c - query_ts) / self.metric.max_time_diff)
                dists = dists + self.metric.alpha * gap
            id_parts.append(ids_c)
            dist_parts.append(dists)
        if not id_parts:
            return []
        all_ids = np.concatenate(id_parts)
        all_dists = np.concatenate(dist_parts)
        top = np.lexsort((all_ids, all_dists))[:k]
        return [(str(all_ids[i]), float(all_dists[i])) for i in top]

    # -- mutation ---------------------------------------------------------------

    def insert(self, node_id: str, embedding: np.ndarray, timestamp: float) -> None:
        """Append to the nearest centroid's posting list; no rebuild."""
        self._require_built()
        if node_id in self._row_of:
            raise DuplicateIdError(f"id {node_id!r} already indexed")
        s = self._s
        vec = self._check_vec(embedding, s)
        row = len(s.ids)
        s.ids.append(node_id)
        self._row_of[node_id] = row
        s.vecs.append(vec)
        s.ts.append(float(timestamp))
        c = int(np.argmax(s.centroids @ vec))
        s.postings[c].append(row)
        s.centroid_of.append(c)
        s.cache[c] = None
        self._welford_add(vec)
        self.updates_since_build += 1
        self._check_imbalance()

    def update_entry(self, node_id: str, embedding: np.ndarray, timestamp: float) -> None:
        """Replace an indexed entry's vector/timestamp, reassigning its cluster."""
        self._require_built()
        row = self._row_of.get(node_id)
        if row is None:
            raise DuplicateIdError(f"id {node_id!r} not indexed")
        s = self._s
        vec = self._check_vec(embedding, s)
        old_c = s.centroid_of[row]
        s.postings[old_c].remove(row)
        s.cache[old_c] = None
        s.vecs[row] = vec
        s.ts[row] = float(timestamp)
        c = int(np.argmax(s.centroids @ vec))
        s.postings[c].append(row)
        s.centroid_of[row] = c
        s.cache[c] = None
        self._welford_add(vec)
        self.updates_since_build += 1
        self._check_imbalance()

    def maybe_reduce_order(self, graph_density: float = 0.0) -> bool:
        """Drop to the reduced dimension when a threshold has tripped.

        Keeps the highest-variance active coordinates and renormalizes all
        stored vectors and centroids in a fresh store, swapped in atomically;
        returns whether reduction ran.
        """
        self._require_built()
        target = self.config.reduced_dim or math.ceil(self.dim / 2)
        target = min(target, self.dim)
        triggered = (
            graph_density > self.config.density_threshold
            or self.updates_since_build > self.config.update_threshold
        )
        s = self._s
        if not triggered or s.active_dim <= target:
            return False
        variances = self._w_m2 / max(self._w_count, 1)
        keep = np.sort(np.argsort(-variances, kind="stable")[:target])
        new_vecs = (
            _renorm_rows(np.stack(s.vecs)[:, keep]) if s.vecs else np.zeros((0, target))
        )
        reduced = _Store(
            ids=list(s.ids),
            vecs=[new_vecs[i] for i in range(new_vecs.shape[0])],
            ts=list(s.ts),
            postings=[list(p) for p in s.postings],
            centroid_of=list(s.centroid_of),
            centroids=_renorm_rows(s.centroids[:, keep]),
            active_dims=[s.active_dims[i] for i in keep],
        )
        self._w_mean = self._w_mean[keep]
        self._w_m2 = self._w_m2[keep]
        self._s = reduced  # atomic swap: readers see old or new, never mixed
        self.reduced = True
        return True

    # -- internals -----------------------------------------------------------------

    def _check_vec(self, embedding: np.ndarray, s: _Store) -> np.ndarray:
        vec = np.asarray(embedding, dtype=np.float64)
        if vec.shape != (s.active_dim,):
            raise DimensionMismatchError(
                f"embedding shape {vec.shape} != active dim {s.active_dim}"
            )
        return vec

    def _welford_add(self, vec: np.ndarray) -> None:
        self._w_count += 1
        delta = vec - self._w_mean
        self._w_mean = self._w_mean + delta / self._w_count
        self._w_m2 = self._w_m2 + delta * (vec - self._w_mean)

    def _check_imbalance(self) -> None:
        sizes = [len(p) for p in self._s.postings]
        mean = sum(sizes) / max(len(sizes), 1)
        if mean > 0 and max(sizes) > IMBALANCE_FACTOR * mean:
            self.rebuild_advised = True

    def _require_built(self) -> None:
        if not self._built:
            raise IndexNotBuiltError("index has not been built")

    # -- snapshot support --------------------------------------------------------

    def entries(self) -> Iterable[tuple[str, np.ndarray, float]]:
        s = self._s
        for row, node_id in enumerate(s.ids):
            yield node_id, s.vecs[row], s.ts[row]

    def to_state(self) -> dict:
        s = self._s
        return {
            "config": {
                "cluster_count": self.config.cluster_count,
                "probe_count": self.config.probe_count,
                "update_threshold": self.config.update_threshold,
                "density_threshold": self.config.density_threshold,
                "reduced_dim": self.config.reduced_dim,
                "seed": self.config.seed,
            },
            "metric": {"alpha": self.metric.alpha, "max_time_diff": self.metric.max_time_diff},
            "dim": self.dim,
            "active_dims": list(s.active_dims),
            "ids": list(s.ids),
            "postings": [list(p) for p in s.postings],
            "updates_since_build": self.updates_since_build,
            "rebuild_advised": self.rebuild_advised,
            "reduced": self.reduced,
            "built": self._built,
            "w_count": self._w_count,
        }

    def arrays(self) -> dict[str, np.ndarray]:
        s = self._s
        return {
            "index_vecs": np.stack(s.vecs) if s.vecs else np.zeros((0, s.active_dim)),
            "index_ts": np.array(s.ts, dtype=np.float64),
            "index_centroids": s.centroids,
            "index_w_mean": self._w_mean,
            "index_w_m2": self._w_m2,
        }

    @classmethod
    def from_state(cls, state: dict, arrays: dict[str, np.ndarray]) -> "ManifoldIndex":
        config = IndexConfig(**state["config"])
        metric = TemporalMetricParams(**state["metric"])
        idx = cls(config, metric, state["dim"])
        ids = list(state["ids"])
        postings = [list(p) for p in state["postings"]]
        centroid_of = [0] * len(ids)
        for c, posting in enumerate(postings):
            for row in posting:
                centroid_of[row] = c
        vecs = arrays["index_vecs"]
        idx._row_of = {node_id: row for row, node_id in enumerate(ids)}
        idx._s = _Store(
            ids=ids,
            vecs=[vecs[i] for i in range(vecs.shape[0])],
            ts=[float(t) for t in arrays["index_ts"]],
            postings=postings,
            centroid_of=centroid_of,
            centroids=arrays["index_centroids"],
            active_dims=list(state["active_dims"]),
        )
        idx._w_count = state["w_count"]
        idx._w_mean = arrays["index_w_mean"]
        idx._w_m2 = arrays["index_w_m2"]
        idx.updates_since_build = state["updates_since_build"]
        idx.rebuild_advised = state["rebuild_advised"]
        idx.reduced = state["reduced"]
        idx._built = state["built"]
        return idx
