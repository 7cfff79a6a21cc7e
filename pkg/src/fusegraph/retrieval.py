"""Structured retrieval: intent parsing, filtering, search, and formatting.

The default parser is rule-based and fully deterministic: granularity,
time-range, and relation markers are stripped from the query text and the
remaining non-filler tokens become the keyword string. A pluggable external
parser speaking ``POST /parse`` may replace it; malformed responses fall
back to the rules with a recorded warning.

Search over-fetches candidates from the index, intersects them with the
granularity/time filter, applies the relation filter, and maps distances to
scores in [0, 1]. One 4x over-fetch retry covers filter starvation.
"""

from __future__ import annotations

import calendar
import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from datetime import date, datetime, timezone

import httpx
import numpy as np

from .errors import (
    EmptyQueryError,
    FusegraphError,
    IndexNotBuiltError,
    UnresolvableIntentError,
)
from .graph import LiteratureGraph, NodeKind, RelationType
from .index import ManifoldIndex

logger = logging.getLogger(__name__)

EXCERPT_CHARS = 280
BASE_OVERFETCH = 50
RETRY_FACTOR = 4

# Rule table, version 1. Tests and canned fixtures are derived from exactly
# these markers; extending the table is a compatibility-relevant change.
RULE_TABLE_VERSION = 1

_GRANULARITY_MARKERS: list[tuple[str, NodeKind]] = [
    ("knowledge units", NodeKind.KNOWLEDGE_UNIT),
    ("knowledge unit", NodeKind.KNOWLEDGE_UNIT),
    ("papers", NodeKind.PAPER),
    ("paper", NodeKind.PAPER),
    ("sections", NodeKind.SECTION),
    ("section", NodeKind.SECTION),
]

_RELATION_MARKERS: list[tuple[str, RelationType]] = [
    ("part of", RelationType.INCLUSION),
    ("related to", RelationType.ASSOCIATION),
    ("containing", RelationType.INCLUSION),
    ("citing", RelationType.CITATION),
    ("cited", RelationType.CITATION),
]

_FILLER_WORDS = {
    "a", "about", "all", "an", "and", "any", "by", "find", "for", "give",
    "in", "list", "me", "of", "on", "or", "regarding", "show", "the", "to",
    "with",
}

_BETWEEN_RE = re.compile(r"\bbetween\s+(\d{4})\s+and\s+(\d{4})\b")
_SINCE_RE = re.compile(r"\bsince\s+(\d{4})\b")
_LAST_RE = re.compile(r"\blast\s+(\d+)\s+years?\b")
_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class Intent:
    """Structured retrieval request; granularity None means all kinds."""

    keywords: str
    granularity: NodeKind | None = None
    time_range: tuple[int, int] | None = None
    relation_type: RelationType | None = None
    k: int = 10

    def __post_init__(self) -> None:
        if not self.keywords.strip():
            raise EmptyQueryError("intent keywords must be nonempty")
        if not 1 <= self.k <= 1000:
            raise ValueError("k must be in [1, 1000]")
        if self.time_range is not None and self.time_range[0] > self.time_range[1]:
            raise ValueError("time_range start must be <= end")


def intent_to_dict(intent: Intent) -> dict:
    return {
        "keywords": intent.keywords,
        "granularity": intent.granularity.value if intent.granularity else "all",
        "time_range": list(intent.time_range) if intent.time_range else None,
        "relation_type": intent.relation_type.value if intent.relation_type else None,
        "k": intent.k,
    }


def intent_from_dict(obj: dict) -> Intent:
    if not isinstance(obj, dict):
        raise ValueError("intent document must be an object")
    keywords = obj.get("keywords")
    if not isinstance(keywords, str) or not keywords.strip():
        raise EmptyQueryError("intent document lacks keywords")
    gran_raw = obj.get("granularity", "all")
    granularity = None if gran_raw in (None, "all") else NodeKind(gran_raw)
    tr_raw = obj.get("time_range")
    time_range = None
    if tr_raw is not None:
        if not (isinstance(tr_raw, (list, tuple)) and len(tr_raw) == 2):
            raise ValueError("time_range must be a [start, end] pair")
        time_range = (int(tr_raw[0]), int(tr_raw[1]))
    rel_raw = obj.get("relation_type")
    relation = None if rel_raw is None else RelationType(rel_raw)
    k = obj.get("k", 10)
    if not isinstance(k, int) or isinstance(k, bool):
        raise ValueError("k must be an integer")
    return Intent(
        keywords=keywords,
        granularity=granularity,
        time_range=time_range,
        relation_type=relation,
        k=k,
    )


def _epoch(year: int, month: int, day: int, h: int = 0, mi: int = 0, s: int = 0) -> int:
    return int(datetime(year, month, day, h, mi, s, tzinfo=timezone.utc).timestamp())


def _end_of_day(d: date) -> int:
    return _epoch(d.year, d.month, d.day, 23, 59, 59)


def _years_before(d: date, n: int) -> date:
    year = d.year - n
    day = min(d.day, calendar.monthrange(year, d.month)[1])
    return date(year, d.month, day)


class RuleParser:
    """Deterministic rule-based intent parser (rule table version 1)."""

    def parse(self, text: str, reference_date: date, k: int = 10) -> Intent:
        if not text.strip():
            raise EmptyQueryError("query text is empty")
        s = text.lower()
        s, time_range = self._extract_time(s, reference_date)
        s, relation = self._extract_relation(s)
        s, granularity = self._extract_granularity(s)
        tokens = [t for t in _TOKEN_RE.findall(s) if t not in _FILLER_WORDS]
        if not tokens:
            raise UnresolvableIntentError(
                f"no keywords remain after extraction from {text!r}"
            )
        return Intent(
            keywords=" ".join(tokens),
            granularity=granularity,
            time_range=time_range,
            relation_type=relation,
            k=k,
        )

    @staticmethod
    def _extract_time(s: str, ref: date) -> tuple[str, tuple[int, int] | None]:
        m = _BETWEEN_RE.search(s)
        if m:
            y1, y2 = sorted((int(m.group(1)), int(m.group(2))))
            return _BETWEEN_RE.sub(" ", s, count=1), (
                _epoch(y1, 1, 1),
                _epoch(y2, 12, 31, 23, 59, 59),
            )
        m = _SINCE_RE.search(s)
        if m:
            return _SINCE_RE.sub(" ", s, count=1), (
                _epoch(int(m.group(1)), 1, 1),
                _end_of_day(ref),
            )
        m = _LAST_RE.search(s)
        if m:
            start = _years_before(ref, int(m.group(1)))
            return _LAST_RE.sub(" ", s, count=1), (
                _epoch(start.year, start.month, start.day),
                _end_of_day(ref),
            )
        return s, None

    @staticmethod
    def _extract_relation(s: str) -> tuple[str, RelationType | None]:
        for marker, relation in _RELATION_MARKERS:
            pattern = re.compile(r"\b" + re.escape(marker) + r"\b")
            if pattern.search(s):
                return pattern.sub(" ", s, count=1), relation
        return s, None

    @staticmethod
    def _extract_granularity(s: str) -> tuple[str, NodeKind | None]:
        for marker, kind in _GRANULARITY_MARKERS:
            pattern = re.compile(r"\b" + re.escape(marker) + r"\b")
            if pattern.search(s):
                return pattern.sub(" ", s, count=1), kind
        return s, None


class ExternalParser:
    """Wire-contract client for an external intent parser, with fallback."""

    def __init__(self, endpoint: str, client: httpx.Client | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.fallback = RuleParser()
        self.fallback_count = 0
        self._client = client or httpx.Client(timeout=10.0)

    def parse(self, text: str, reference_date: date, k: int = 10) -> Intent:
        if not text.strip():
            raise EmptyQueryError("query text is empty")
        try:
            resp = self._client.post(
                self.endpoint + "/parse",
                json={"text": text, "reference_date": reference_date.isoformat()},
            )
            if resp.status_code != 200:
                raise ValueError(f"status {resp.status_code}")
            return intent_from_dict(resp.json())
        except (httpx.HTTPError, ValueError, KeyError, TypeError, FusegraphError) as exc:
            self.fallback_count += 1
            logger.warning("external parser failed (%s); using rule-based fallback", exc)
            return self.fallback.parse(text, reference_date, k=k)


def filter_nodes(
    graph: LiteratureGraph,
    granularity: NodeKind | None,
    time_range: tuple[int, int] | None,
) -> set[str]:
    """Ids matching the kind filter and falling inside the time range."""
    out = set()
    for node in graph.nodes():
        if granularity is not None and node.kind is not granularity:
            continue
        if time_range is not None and not time_range[0] <= node.timestamp <= time_range[1]:
            continue
        out.add(node.id)
    return out


@dataclass
class ResultEntry:
    node_id: str
    kind: NodeKind
    excerpt: str
    timestamp: int
    score: float
    relations: list[tuple[str, str, str]]  # (relation, neighbor, direction)


@dataclass
class RetrievalResult:
    entries: list[ResultEntry]
    query_echo: Intent
    timing: dict[str, float] = field(default_factory=dict)


class Retriever:
    """Runs the filter / over-fetch / re-rank pipeline against the index."""

    def __init__(self, graph: LiteratureGraph, embedder, index: ManifoldIndex, model):
        self.graph = graph
        self.embedder = embedder
        self.index = index
        self.model = model  # ProjectionModel; queries use the base matrix

    def query_vector(self, keywords: str) -> np.ndarray:
        """Full-width query point: the relation-free projection of the
        keyword embedding (gate fusion of a vector with itself is that
        vector, and an empty relation multiset selects the base matrix).
        """
        sem = self.embedder.embed(keywords)
        raw = self.model.w_base @ sem
        norm = float(np.linalg.norm(raw))
        if norm < 1e-12:
            out = np.zeros(self.model.dim_out)
            out[0] = 1.0
            return out
        return raw / norm

    def search(self, intent: Intent, parse_ms: float = 0.0) -> RetrievalResult:
        if not self.index.built:
            raise IndexNotBuiltError("search requires a built index")
        t0 = time.perf_counter()
        query = self.index.project_query(self.query_vector(intent.keywords))
        query_ts = None
        if intent.time_range is not None:
            query_ts = (intent.time_range[0] + intent.time_range[1]) / 2.0

        allowed = filter_nodes(self.graph, intent.granularity, intent.time_range)
        fetch_k = max(BASE_OVERFETCH, intent.k)
        survivors = self._fetch_and_filter(query, query_ts, fetch_k, allowed, intent)
        if len(survivors) < intent.k and fetch_k < self.index.size:
            survivors = self._fetch_and_filter(
                query, query_ts, min(RETRY_FACTOR * fetch_k, self.index.size), allowed, intent
            )
        search_ms = (time.perf_counter() - t0) * 1000.0

        t1 = time.perf_counter()
        denom = np.pi + self.index.metric.alpha
        entries = []
        for node_id, dist in survivors[: intent.k]:
            node = self.graph.node(node_id)
            score = float(np.clip(1.0 - dist / denom, 0.0, 1.0))
            entries.append(
                ResultEntry(
                    node_id=node_id,
                    kind=node.kind,
                    excerpt=node.content[:EXCERPT_CHARS],
                    timestamp=node.timestamp,
                    score=score,
                    relations=self._relations_of(node_id),
                )
            )
        format_ms = (time.perf_counter() - t1) * 1000.0
        return RetrievalResult(
            entries=entries,
            query_echo=intent,
            timing={"parse_ms": parse_ms, "search_ms": search_ms, "format_ms": format_ms},
        )

    def _probe_count(self, fetch_k: int) -> int | None:
        """Scale probing with the over-fetch unless a probe count is pinned."""
        if self.index.config.probe_count is not None:
            return None  # defer to the configured value
        clusters = self.index.cluster_count
        avg_posting = max(1.0, self.index.size / clusters)
        return min(clusters, max(self.index.default_probe_count(), math.ceil(fetch_k / avg_posting)))

    def _fetch_and_filter(
        self,
        query: np.ndarray,
        query_ts: float | None,
        fetch_k: int,
        allowed: set[str],
        intent: Intent,
    ) -> list[tuple[str, float]]:
        hits = self.index.knn(query, query_ts, fetch_k, probe_count=self._probe_count(fetch_k))
        out = []
        for node_id, dist in hits:
            if node_id not in allowed:
                continue
            if intent.relation_type is not None and not self._has_relation(
                node_id, intent.relation_type
            ):
                continue
            out.append((node_id, dist))
        return out

    def _has_relation(self, node_id: str, relation: RelationType) -> bool:
        return any(r is relation for r in self.graph.incident_relations(node_id))

    def _relations_of(self, node_id: str) -> list[tuple[str, str, str]]:
        rels = [
            (e.relation.value, e.dst, "out") for e in self.graph.out_edges(node_id)
        ] + [
            (e.relation.value, e.src, "in") for e in self.graph.in_edges(node_id)
        ]
        rels.sort()
        return rels


def result_to_document(result: RetrievalResult, include_timing: bool = True) -> dict:
    """Machine-readable result document with a stable field order."""
    doc: dict = {
        "query": intent_to_dict(result.query_echo),
        "entries": [
            {
                "id": e.node_id,
                "kind": e.kind.value,
                "excerpt": e.excerpt,
                "timestamp": e.timestamp,
                "score": e.score,
                "relations": [
                    {"relation": r, "neighbor": n, "direction": d}
                    for r, n, d in e.relations
                ],
            }
            for e in result.entries
        ],
    }
    if include_timing:
        doc["timing"] = {
            "parse_ms": result.timing.get("parse_ms", 0.0),
            "search_ms": result.timing.get("search_ms", 0.0),
            "format_ms": result.timing.get("format_ms", 0.0),
        }
    return doc


def to_programmable_format(result: RetrievalResult, include_timing: bool = True) -> str:
    """Canonical serialization: serialize -> parse -> serialize is identity."""
    return canonical_json(result_to_document(result, include_timing=include_timing))


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=True, separators=(",", ":"))
