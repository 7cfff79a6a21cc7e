"""fusegraph: graph-vector fusion retrieval for hierarchical literature graphs."""

from .config import EngineConfig, load_config
from .embedding import (
    BuiltinEmbedder,
    EmbedderConfig,
    RemoteEmbedder,
    cosine_similarity,
    make_embedder,
)
from .encoding import ManifoldEmbedding, ManifoldEncoder, ProjectionModel, gate_fuse
from .engine import Engine
from .graph import Edge, LiteratureGraph, Node, NodeKind, RelationType
from .index import (
    IndexConfig,
    ManifoldIndex,
    TemporalMetricParams,
    base_distance,
    temporal_metric,
)
from .retrieval import (
    ExternalParser,
    Intent,
    RetrievalResult,
    Retriever,
    RuleParser,
    filter_nodes,
    to_programmable_format,
)
from .signature import HybridSignature, SignatureEngine, SignatureParams
from .synth import SyntheticSpec, generate, write_corpus

__version__ = "0.1.0"

__all__ = [
    "BuiltinEmbedder",
    "Edge",
    "EmbedderConfig",
    "Engine",
    "EngineConfig",
    "ExternalParser",
    "HybridSignature",
    "IndexConfig",
    "Intent",
    "LiteratureGraph",
    "ManifoldEmbedding",
    "ManifoldEncoder",
    "ManifoldIndex",
    "Node",
    "NodeKind",
    "ProjectionModel",
    "RelationType",
    "RemoteEmbedder",
    "RetrievalResult",
    "Retriever",
    "RuleParser",
    "SignatureEngine",
    "SignatureParams",
    "SyntheticSpec",
    "TemporalMetricParams",
    "base_distance",
    "cosine_similarity",
    "filter_nodes",
    "gate_fuse",
    "generate",
    "load_config",
    "make_embedder",
    "temporal_metric",
    "to_programmable_format",
    "write_corpus",
]
