"""Synthetic hierarchical literature corpora for benchmarks and acceptance.

Papers carry topic-skewed content drawn from per-topic vocabulary chunks
with Zipf-like word frequencies (so same-topic nodes share common words);
sections and knowledge units inherit their paper's topic with noise, reuse
part of their parent's exact terminology, and carry a kind-specific
stylistic register. Inclusion edges follow the hierarchy, citation edges
attach preferentially by in-degree (with a same-topic bias), and
association edges link same-topic knowledge units. Everything is
deterministic under the spec seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Edge, Node, NodeKind, RelationType, write_edges_jsonl, write_nodes_jsonl

# Kind-specific register words, shared across topics.
_PAPER_STYLE = ["survey", "framework", "analysis", "evaluation", "approach", "study"]
_SECTION_STYLE = ["method", "results", "background", "discussion", "experiments", "overview"]
_UNIT_STYLE = ["definition", "theorem", "finding", "observation", "claim", "evidence"]

_TOPIC_NOISE = 0.1  # probability a content word comes from a foreign topic
_PARENT_INHERIT = 0.35  # probability a child reuses one of its parent's terms
_SAME_TOPIC_CITE_BOOST = 8.0

_PAPER_WORDS = 16
_SECTION_WORDS = 14
_UNIT_WORDS = 12


@dataclass(frozen=True)
class SyntheticSpec:
    papers: int
    sections_per_paper: tuple[int, int] = (2, 4)
    units_per_section: tuple[int, int] = (2, 4)
    citations_per_paper: int = 5
    citation_exponent: float = 1.0
    associations_per_unit: float = 1.0
    timestamp_span: tuple[int, int] = (946684800, 1735689600)  # 2000-01-01..2025-01-01
    vocab_size: int = 2000
    topics: int = 8
    seed: int = 42
    epsilon_report: bool = True

    def __post_init__(self) -> None:
        if self.papers < 1:
            raise ValueError("papers must be >= 1")
        if self.sections_per_paper[0] < 1 or self.units_per_section[0] < 1:
            raise ValueError("per-level counts must be >= 1")
        if self.vocab_size < self.topics:
            raise ValueError("vocab must cover every topic")
        if self.topics < 1:
            raise ValueError("topics must be >= 1")
        if self.timestamp_span[0] > self.timestamp_span[1]:
            raise ValueError("timestamp span must be ordered")


class _TopicVocab:
    """Per-topic vocabulary chunks with a Zipf-like rank distribution."""

    def __init__(self, spec: SyntheticSpec):
        self.words = [f"w{i:05d}" for i in range(spec.vocab_size)]
        chunk = spec.vocab_size // spec.topics
        self.chunks = [
            self.words[t * chunk : (t + 1) * chunk] for t in range(spec.topics)
        ]
        size = len(self.chunks[0])
        weights = 1.0 / (np.arange(size) + 1.0)
        self.cum = np.cumsum(weights / weights.sum())

    def draw(self, topic: int, rng: np.random.Generator) -> str:
        rank = int(np.searchsorted(self.cum, rng.random(), side="right"))
        rank = min(rank, len(self.chunks[topic]) - 1)
        return self.chunks[topic][rank]


def _content_words(
    vocab: _TopicVocab,
    topic: int,
    style: list[str],
    n_words: int,
    n_topics: int,
    parent_terms: list[str] | None,
    rng: np.random.Generator,
) -> list[str]:
    """Two register words plus topic terms, partially inherited from the parent."""
    words = [
        style[int(rng.integers(len(style)))],
        style[int(rng.integers(len(style)))],
    ]
    for _ in range(n_words):
        if parent_terms and rng.random() < _PARENT_INHERIT:
            words.append(parent_terms[int(rng.integers(len(parent_terms)))])
            continue
        t = topic
        if n_topics > 1 and rng.random() < _TOPIC_NOISE:
            t = int(rng.integers(n_topics))
        words.append(vocab.draw(t, rng))
    return words


def _topic_terms(words: list[str]) -> list[str]:
    return [w for w in words if w.startswith("w")]


def generate(spec: SyntheticSpec) -> tuple[list[Node], list[Edge]]:
    """Deterministic corpus: (nodes, edges) in stable document order."""
    rng = np.random.default_rng(spec.seed)
    vocab = _TopicVocab(spec)
    nodes: list[Node] = []
    edges: list[Edge] = []

    t_start, t_end = spec.timestamp_span
    span = t_end - t_start
    paper_ids: list[str] = []
    paper_topics = np.zeros(spec.papers, dtype=np.int64)
    indegree = np.zeros(spec.papers, dtype=np.float64)
    units_by_topic: dict[int, list[str]] = {t: [] for t in range(spec.topics)}
    citation_edges: list[Edge] = []

    for i in range(spec.papers):
        topic = int(rng.integers(spec.topics))
        paper_topics[i] = topic
        ts = t_start if spec.papers == 1 else t_start + (i * span) // (spec.papers - 1)
        pid = f"p{i:06d}"
        paper_ids.append(pid)
        paper_words = _content_words(
            vocab, topic, _PAPER_STYLE, _PAPER_WORDS, spec.topics, None, rng
        )
        nodes.append(
            Node(id=pid, kind=NodeKind.PAPER, content=" ".join(paper_words), timestamp=int(ts))
        )
        paper_terms = _topic_terms(paper_words)
        n_sections = int(rng.integers(spec.sections_per_paper[0], spec.sections_per_paper[1] + 1))
        for s in range(n_sections):
            sid = f"{pid}-s{s:02d}"
            section_words = _content_words(
                vocab, topic, _SECTION_STYLE, _SECTION_WORDS, spec.topics, paper_terms, rng
            )
            nodes.append(
                Node(
                    id=sid,
                    kind=NodeKind.SECTION,
                    content=" ".join(section_words),
                    timestamp=int(ts) + int(rng.integers(0, 3600)),
                )
            )
            edges.append(Edge(src=pid, dst=sid, relation=RelationType.INCLUSION))
            section_terms = _topic_terms(section_words)
            n_units = int(rng.integers(spec.units_per_section[0], spec.units_per_section[1] + 1))
            for u in range(n_units):
                uid = f"{sid}-u{u:02d}"
                unit_words = _content_words(
                    vocab, topic, _UNIT_STYLE, _UNIT_WORDS, spec.topics, section_terms, rng
                )
                nodes.append(
                    Node(
                        id=uid,
                        kind=NodeKind.KNOWLEDGE_UNIT,
                        content=" ".join(unit_words),
                        timestamp=int(ts) + int(rng.integers(0, 7200)),
                    )
                )
                edges.append(Edge(src=sid, dst=uid, relation=RelationType.INCLUSION))
                units_by_topic[topic].append(uid)

        # Citations to earlier papers: preferential attachment by in-degree
        # with a same-topic boost.
        n_cites = min(spec.citations_per_paper, i)
        if n_cites > 0:
            weights = (indegree[:i] + 1.0) ** spec.citation_exponent
            weights = weights * np.where(paper_topics[:i] == topic, _SAME_TOPIC_CITE_BOOST, 1.0)
            probs = weights / weights.sum()
            cited = rng.choice(i, size=n_cites, replace=False, p=probs)
            for j in sorted(int(c) for c in cited):
                citation_edges.append(
                    Edge(src=pid, dst=paper_ids[j], relation=RelationType.CITATION)
                )
                indegree[j] += 1.0

    edges.extend(citation_edges)

    for topic in range(spec.topics):
        units = units_by_topic[topic]
        if len(units) < 2:
            continue
        target = int(round(spec.associations_per_unit * len(units)))
        seen: set[tuple[str, str]] = set()
        attempts = 0
        while len(seen) < target and attempts < target * 4:
            attempts += 1
            a, b = rng.integers(len(units)), rng.integers(len(units))
            if a == b:
                continue
            pair = (units[min(a, b)], units[max(a, b)])
            if pair in seen:
                continue
            seen.add(pair)
            edges.append(Edge(src=pair[0], dst=pair[1], relation=RelationType.ASSOCIATION))

    return nodes, edges


def write_corpus(spec: SyntheticSpec, nodes_path: str, edges_path: str) -> tuple[int, int]:
    nodes, edges = generate(spec)
    write_nodes_jsonl(nodes_path, nodes)
    write_edges_jsonl(edges_path, edges)
    return len(nodes), len(edges)
