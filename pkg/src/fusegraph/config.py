"""Engine configuration: a flat key-value document with strict validation.

Unknown keys abort loading so that misspelled settings can never silently
fall back to defaults. The environment variable ``FUSEGRAPH_CONFIG``
overrides the config file path.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

ENV_VAR = "FUSEGRAPH_CONFIG"


@dataclass(frozen=True)
class EngineConfig:
    # embedding provider
    embedding_dim: int = 64
    provider: str = "builtin"
    remote_endpoint: str | None = None
    remote_batch_limit: int = 32
    # signature weights
    walk_order: int = 2
    lambda_edge: float = 0.4
    nu_edge: float = 0.2
    lambda_topo: float = 0.4
    mu_sem: float = 0.4
    nu_time: float = 0.2
    beta_hodge: float = 0.1
    time_unit_seconds: float = 86400.0
    # manifold projection
    projection_dim: int = 32
    sigma_gate: float = 1.0
    projection_seed: int = 7
    # temporal metric and index
    metric_alpha: float = 0.25
    cluster_count: int | None = None
    probe_count: int | None = None
    update_threshold: int = 1000
    density_threshold: float = 0.01
    reduced_dim: int | None = None
    index_seed: int = 13
    # retrieval
    parser_endpoint: str | None = None
    # persistence
    snapshot_path: str = "fusegraph.snap"

    def __post_init__(self) -> None:
        if self.embedding_dim < 8:
            raise ConfigError("embedding_dim must be >= 8")
        if self.provider not in ("builtin", "remote"):
            raise ConfigError(f"provider must be builtin or remote, got {self.provider!r}")
        if self.provider == "remote" and not self.remote_endpoint:
            raise ConfigError("remote provider requires remote_endpoint")
        if self.remote_batch_limit < 1:
            raise ConfigError("remote_batch_limit must be >= 1")
        if self.walk_order < 1:
            raise ConfigError("walk_order must be >= 1")
        if not 0.0 <= self.beta_hodge <= 1.0:
            raise ConfigError("beta_hodge must be in [0, 1]")
        if self.lambda_topo + self.mu_sem + self.nu_time <= 0:
            raise ConfigError("feature weights must have positive sum")
        if not 4 <= self.projection_dim <= self.embedding_dim:
            raise ConfigError("projection_dim must satisfy 4 <= D <= embedding_dim")
        if self.metric_alpha < 0:
            raise ConfigError("metric_alpha must be nonnegative")
        if self.cluster_count is not None and self.cluster_count < 1:
            raise ConfigError("cluster_count must be >= 1")
        if self.probe_count is not None and self.probe_count < 1:
            raise ConfigError("probe_count must be >= 1")
        if self.update_threshold < 1:
            raise ConfigError("update_threshold must be >= 1")
        if not 0.0 < self.density_threshold <= 1.0:
            raise ConfigError("density_threshold must be in (0, 1]")
        if self.reduced_dim is not None and not 4 <= self.reduced_dim <= self.projection_dim:
            raise ConfigError("reduced_dim must satisfy 4 <= D' <= projection_dim")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


_INT_FIELDS = {
    "embedding_dim", "remote_batch_limit", "walk_order", "projection_dim",
    "projection_seed", "cluster_count", "probe_count", "update_threshold",
    "reduced_dim", "index_seed",
}
_FLOAT_FIELDS = {
    "lambda_edge", "nu_edge", "lambda_topo", "mu_sem", "nu_time",
    "beta_hodge", "time_unit_seconds", "sigma_gate", "metric_alpha",
    "density_threshold",
}
_STR_FIELDS = {"provider", "remote_endpoint", "parser_endpoint", "snapshot_path"}
_OPTIONAL = {"remote_endpoint", "parser_endpoint", "cluster_count", "probe_count", "reduced_dim"}


def config_from_dict(raw: dict) -> EngineConfig:
    known = {f.name for f in fields(EngineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cleaned: dict = {}
    for key, value in raw.items():
        if value is None:
            if key not in _OPTIONAL:
                raise ConfigError(f"config key {key!r} must not be null")
            cleaned[key] = None
        elif key in _INT_FIELDS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"config key {key!r} must be an integer")
            cleaned[key] = value
        elif key in _FLOAT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key!r} must be a number")
            cleaned[key] = float(value)
        elif key in _STR_FIELDS:
            if not isinstance(value, str):
                raise ConfigError(f"config key {key!r} must be a string")
            cleaned[key] = value
        else:  # pragma: no cover - key sets above span all fields
            raise ConfigError(f"unhandled config key {key!r}")
    return EngineConfig(**cleaned)


def load_config(path: str | None = None) -> EngineConfig:
    """Load config from a JSON file; ``FUSEGRAPH_CONFIG`` overrides the path."""
    path = os.environ.get(ENV_VAR, path)
    if path is None:
        return EngineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(raw)
