"""Semantic embedding providers behind one contract.

Two providers emit unit-normalized m-dimensional vectors:

* ``BuiltinEmbedder`` — a deterministic hashing bag-of-tokens embedder.
  Tokens are ASCII-lowercased alphanumeric runs; each token lands in a
  bucket chosen by one 32-bit FNV-1a hash and contributes a sign chosen by
  a second. The constants below are frozen: any conforming remote provider
  running in test mode must reproduce these vectors bit for bit.
* ``RemoteEmbedder`` — an HTTP client for a sidecar speaking the wire
  contract ``POST /embed {"texts": [...]} -> {"dim": m, "vectors": [[..]]}``.

Both are read-only after construction and safe for concurrent use.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import httpx
import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyContentError,
    RemoteUnavailableError,
)

# Frozen hashing constants. Changing any of these invalidates every stored
# embedding and the cross-provider interop fixtures.
FNV_PRIME = 0x01000193
BUCKET_SEED = 0x811C9DC5
SIGN_SEED = 0x7A3E5C91

_TOKEN_RE = re.compile(r"[a-z0-9]+")

UNIT_NORM_TOL = 1e-6


def tokenize(text: str) -> list[str]:
    """ASCII-lowercase alphanumeric runs; everything else is a separator."""
    return _TOKEN_RE.findall(text.lower())


def _fnv1a(data: bytes, seed: int) -> int:
    h = seed
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFF
    return h


@lru_cache(maxsize=1 << 18)
def _token_slot(token: str, dim: int) -> tuple[int, float]:
    """(bucket, sign) for a token; pure, so safe to memoize."""
    raw = token.encode("utf-8")
    bucket = _fnv1a(raw, BUCKET_SEED) % dim
    sign = 1.0 if _fnv1a(raw, SIGN_SEED) & 1 else -1.0
    return bucket, sign


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic bag-of-tokens embedding; raises on token-free input."""
    if not text.strip():
        raise EmptyContentError("cannot embed empty text")
    tokens = tokenize(text)
    if not tokens:
        raise EmptyContentError("text has no alphanumeric tokens")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        bucket, sign = _token_slot(token, dim)
        vec[bucket] += sign
    # Accumulated entries are integers, so the squared norm is exact and the
    # normalized vector is reproducible bit for bit across platforms.
    norm = float(np.sqrt(np.dot(vec, vec)))
    return vec / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cosine on shapes {a.shape} vs {b.shape}")
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


@dataclass(frozen=True)
class EmbedderConfig:
    dim: int = 64
    provider: str = "builtin"  # "builtin" | "remote"
    remote_endpoint: str | None = None
    batch_limit: int = 32
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.dim < 8:
            raise ValueError("embedding dim must be >= 8")
        if self.batch_limit < 1:
            raise ValueError("batch limit must be >= 1")
        if self.provider not in ("builtin", "remote"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.provider == "remote" and not self.remote_endpoint:
            raise ValueError("remote provider requires an endpoint")


class BuiltinEmbedder:
    """Pure-function hashing embedder; the hermetic default provider."""

    def __init__(self, dim: int = 64):
        if dim < 8:
            raise ValueError("embedding dim must be >= 8")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim)

    def batch_embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """Client for the remote embedding wire contract.

    Batches above ``batch_limit`` are chunked client-side; in-flight
    requests are bounded by a semaphore.
    """

    def __init__(
        self,
        dim: int,
        endpoint: str,
        batch_limit: int = 32,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
    ):
        self.dim = dim
        self.endpoint = endpoint.rstrip("/")
        self.batch_limit = batch_limit
        self._sem = threading.Semaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=30.0)

    def embed(self, text: str) -> np.ndarray:
        return self.batch_embed([text])[0]

    def batch_embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        for t in texts:
            if not t.strip():
                raise EmptyContentError("cannot embed empty text")
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_limit):
            out.extend(self._request(list(texts[start : start + self.batch_limit])))
        return out

    def _request(self, texts: list[str]) -> list[np.ndarray]:
        with self._sem:
            try:
                resp = self._client.post(self.endpoint + "/embed", json={"texts": texts})
            except httpx.HTTPError as exc:
                raise RemoteUnavailableError(f"embed request failed: {exc}") from exc
        if resp.status_code != 200:
            raise RemoteUnavailableError(f"embed endpoint returned {resp.status_code}")
        try:
            body = resp.json()
            dim = body["dim"]
            vectors = body["vectors"]
        except (ValueError, KeyError, TypeError) as exc:
            raise RemoteUnavailableError(f"malformed embed response: {exc}") from exc
        if dim != self.dim:
            raise DimensionMismatchError(f"remote dim {dim} != expected {self.dim}")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise RemoteUnavailableError("vector count does not match text count")
        out = []
        for row in vectors:
            if not isinstance(row, list) or len(row) != self.dim:
                raise RemoteUnavailableError("vector of wrong length in response")
            vec = np.asarray(row, dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise RemoteUnavailableError("non-finite entries in response")
            if abs(float(np.linalg.norm(vec)) - 1.0) > UNIT_NORM_TOL:
                raise RemoteUnavailableError("response vector is not unit-norm")
            out.append(vec)
        return out


def make_embedder(config: EmbedderConfig, client: httpx.Client | None = None):
    if config.provider == "builtin":
        return BuiltinEmbedder(config.dim)
    return RemoteEmbedder(
        dim=config.dim,
        endpoint=config.remote_endpoint or "",
        batch_limit=config.batch_limit,
        max_in_flight=config.max_in_flight,
        client=client,
    )
