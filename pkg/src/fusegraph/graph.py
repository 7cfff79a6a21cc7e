"""Hierarchical literature graph: storage, mutation, and neighborhood primitives.

Nodes are papers, sections, or knowledge units; edges carry one of three
relation types. Reachability treats edges as undirected (influence flows both
ways along a citation), while the stored adjacency keeps direction for result
reporting. Mutations are additive: nodes and edges can be added, and a node's
content/timestamp can be replaced by id, but nothing is ever deleted.

Concurrency: single writer, many readers. The graph holds only plain Python
containers, so a fully built value can be handed to other threads; concurrent
mutation must be serialized by the caller (the engine owns a writer lock).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    DuplicateEdgeError,
    DuplicateIdError,
    EmptyContentError,
    InvalidMutationError,
    InvalidTimestampError,
    ParseError,
    SelfLoopError,
    TooFewNodesError,
    UnknownEndpointError,
    UnknownNodeError,
)


class NodeKind(str, Enum):
    PAPER = "paper"
    SECTION = "section"
    KNOWLEDGE_UNIT = "knowledge_unit"


class RelationType(str, Enum):
    CITATION = "citation"
    INCLUSION = "inclusion"
    ASSOCIATION = "association"


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    content: str
    timestamp: int  # seconds since epoch, >= 0


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: RelationType

    def key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.relation.value)


_NODE_FIELDS = {"id", "kind", "content", "timestamp"}
_EDGE_FIELDS = {"src", "dst", "relation"}


def _validate_node(node: Node) -> None:
    if not node.id:
        raise DuplicateIdError("node id must be nonempty")
    if not node.content:
        raise EmptyContentError(f"node {node.id!r} has empty content")
    if not isinstance(node.timestamp, int) or node.timestamp < 0:
        raise InvalidTimestampError(
            f"node {node.id!r} timestamp must be a nonnegative integer"
        )


class LiteratureGraph:
    """In-memory hierarchical literature graph with an update counter."""

    def __init__(self) -> None:
        self._nodes: dict[str, Node] = {}
        self._out: dict[str, list[Edge]] = {}
        self._in: dict[str, list[Edge]] = {}
        self._edge_keys: set[tuple[str, str, str]] = set()
        self._edge_count = 0
        self._update_counter = 0  # monotone, never decreases
        self._counter_baseline = 0  # moved forward by reset_update_count()
        self._t_min: int | None = None
        self._t_max: int | None = None

    # -- mutation ---------------------------------------------------------

    def add_node(self, node: Node) -> None:
        _validate_node(node)
        if node.id in self._nodes:
            raise DuplicateIdError(f"node {node.id!r} already present")
        self._nodes[node.id] = node
        self._out.setdefault(node.id, [])
        self._in.setdefault(node.id, [])
        self._update_counter += 1
        if self._t_min is None or node.timestamp < self._t_min:
            self._t_min = node.timestamp
        if self._t_max is None or node.timestamp > self._t_max:
            self._t_max = node.timestamp

    def replace_node(self, node: Node) -> None:
        """Re-ingest content/timestamp for an existing id (kind must match)."""
        _validate_node(node)
        old = self._nodes.get(node.id)
        if old is None:
            raise UnknownNodeError(f"node {node.id!r} not present")
        if old.kind is not node.kind:
            raise InvalidMutationError(
                f"node {node.id!r} cannot change kind on replacement"
            )
        self._nodes[node.id] = node
        self._update_counter += 1
        if old.timestamp != node.timestamp:
            self._refresh_extent()

    def add_edge(self, edge: Edge) -> None:
        if edge.src == edge.dst:
            raise SelfLoopError(f"self-loop on {edge.src!r} rejected")
        if edge.src not in self._nodes:
            raise UnknownEndpointError(f"unknown src {edge.src!r}")
        if edge.dst not in self._nodes:
            raise UnknownEndpointError(f"unknown dst {edge.dst!r}")
        key = edge.key()
        if key in self._edge_keys:
            raise DuplicateEdgeError(f"edge {key} already present")
        self._edge_keys.add(key)
        self._out[edge.src].append(edge)
        self._in[edge.dst].append(edge)
        self._edge_count += 1
        self._update_counter += 1

    # -- queries ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def node_ids(self) -> list[str]:
        """Ids in insertion order."""
        return list(self._nodes)

    def nodes(self) -> Iterator[Node]:
        return iter(self._nodes.values())

    def edges(self) -> Iterator[Edge]:
        for edges in self._out.values():
            yield from edges

    @property
    def edge_count(self) -> int:
        return self._edge_count

    def out_edges(self, node_id: str) -> list[Edge]:
        self.node(node_id)
        return list(self._out[node_id])

    def in_edges(self, node_id: str) -> list[Edge]:
        self.node(node_id)
        return list(self._in[node_id])

    def neighbors(self, node_id: str) -> list[str]:
        """Distinct 1-hop neighbors, undirected, sorted by id.

        Sorted output keeps downstream floating-point reductions
        order-stable regardless of insertion history.
        """
        self.node(node_id)
        seen = {e.dst for e in self._out[node_id]}
        seen.update(e.src for e in self._in[node_id])
        return sorted(seen)

    def incident_relations(self, node_id: str) -> list[RelationType]:
        """Relation types of all incident edges (multiset, both directions)."""
        self.node(node_id)
        rels = [e.relation for e in self._out[node_id]]
        rels.extend(e.relation for e in self._in[node_id])
        return rels

    def k_order_neighbors(self, node_id: str, k: int) -> list[tuple[str, int]]:
        """Nodes within k undirected hops, as (id, hop) sorted by (hop, id).

        The start node itself is excluded; each node carries its minimum hop
        distance.
        """
        self.node(node_id)
        if k < 1:
            raise ValueError("k must be >= 1")
        dist = {node_id: 0}
        queue = deque([node_id])
        while queue:
            cur = queue.popleft()
            d = dist[cur]
            if d == k:
                continue
            for nxt in self.neighbors(cur):
                if nxt not in dist:
                    dist[nxt] = d + 1
                    queue.append(nxt)
        del dist[node_id]
        return sorted(dist.items(), key=lambda item: (item[1], item[0]))

    def locality_set(self, changed: Iterable[str], k: int) -> set[str]:
        """Union of the changed ids and their k-hop balls."""
        out: set[str] = set()
        for node_id in changed:
            out.add(self.node(node_id).id)
            out.update(n for n, _ in self.k_order_neighbors(node_id, k))
        return out

    def graph_density(self) -> float:
        n = len(self._nodes)
        if n < 2:
            raise TooFewNodesError("density requires at least 2 nodes")
        return self._edge_count / (n * (n - 1))

    def update_count(self) -> int:
        return self._update_counter - self._counter_baseline

    def reset_update_count(self) -> None:
        """Used by the index module after a full rebuild."""
        self._counter_baseline = self._update_counter

    @property
    def time_extent(self) -> tuple[int, int]:
        if self._t_min is None or self._t_max is None:
            raise TooFewNodesError("empty graph has no time extent")
        return (self._t_min, self._t_max)

    def _refresh_extent(self) -> None:
        if not self._nodes:
            self._t_min = self._t_max = None
            return
        stamps = [n.timestamp for n in self._nodes.values()]
        self._t_min = min(stamps)
        self._t_max = max(stamps)


# -- JSONL ingestion -------------------------------------------------------


def parse_node_line(line: str, lineno: int) -> Node:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError(lineno, "node record must be a JSON object")
    if set(obj) != _NODE_FIELDS:
        raise ParseError(
            lineno,
            f"node record fields must be exactly {sorted(_NODE_FIELDS)}, got {sorted(obj)}",
        )
    if not isinstance(obj["id"], str) or not obj["id"]:
        raise ParseError(lineno, "id must be a nonempty string")
    try:
        kind = NodeKind(obj["kind"])
    except ValueError:
        raise ParseError(lineno, f"unknown kind {obj['kind']!r}") from None
    if not isinstance(obj["content"], str) or not obj["content"]:
        raise ParseError(lineno, "content must be a nonempty string")
    ts = obj["timestamp"]
    if not isinstance(ts, int) or isinstance(ts, bool) or ts < 0:
        raise ParseError(lineno, "timestamp must be a nonnegative integer")
    return Node(id=obj["id"], kind=kind, content=obj["content"], timestamp=ts)


def parse_edge_line(line: str, lineno: int) -> Edge:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError(lineno, "edge record must be a JSON object")
    if set(obj) != _EDGE_FIELDS:
        raise ParseError(
            lineno,
            f"edge record fields must be exactly {sorted(_EDGE_FIELDS)}, got {sorted(obj)}",
        )
    for field in ("src", "dst"):
        if not isinstance(obj[field], str) or not obj[field]:
            raise ParseError(lineno, f"{field} must be a nonempty string")
    try:
        relation = RelationType(obj["relation"])
    except ValueError:
        raise ParseError(lineno, f"unknown relation {obj['relation']!r}") from None
    return Edge(src=obj["src"], dst=obj["dst"], relation=relation)


def read_nodes_jsonl(path: str) -> list[Node]:
    """Parse a nodes.jsonl file; any malformed line aborts with its number."""
    nodes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            nodes.append(parse_node_line(line, lineno))
    return nodes


def read_edges_jsonl(path: str) -> list[Edge]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            edges.append(parse_edge_line(line, lineno))
    return edges


def node_to_json(node: Node) -> str:
    return json.dumps(
        {
            "id": node.id,
            "kind": node.kind.value,
            "content": node.content,
            "timestamp": node.timestamp,
        },
        ensure_ascii=True,
        separators=(",", ":"),
    )


def edge_to_json(edge: Edge) -> str:
    return json.dumps(
        {"src": edge.src, "dst": edge.dst, "relation": edge.relation.value},
        ensure_ascii=True,
        separators=(",", ":"),
    )


def write_nodes_jsonl(path: str, nodes: Iterable[Node]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in nodes:
            fh.write(node_to_json(node) + "\n")


def write_edges_jsonl(path: str, edges: Iterable[Edge]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for edge in edges:
            fh.write(edge_to_json(edge) + "\n")
