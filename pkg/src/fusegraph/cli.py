"""Command-line entry point: ingest, update, build-index, search, bench, serve."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from datetime import date, datetime

import click

from .bench import run_suite
from .config import load_config
from .engine import Engine
from .errors import BindFailureError, FusegraphError
from .graph import NodeKind
from .retrieval import to_programmable_format


def _load_engine(config_path: str | None) -> Engine:
    config = load_config(config_path)
    return Engine.load(config.snapshot_path)


@click.group()
def main() -> None:
    """Graph-vector fusion retrieval engine."""


@main.command()
@click.option("--nodes", "nodes_path", required=True, type=click.Path(exists=True))
@click.option("--edges", "edges_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path())
def ingest(nodes_path: str, edges_path: str, config_path: str | None) -> None:
    """Batch-build the engine from JSONL files and write a snapshot."""
    config = load_config(config_path)
    engine = Engine(config)
    summary = engine.ingest_files(nodes_path, edges_path)
    engine.save(config.snapshot_path)
    click.echo(json.dumps(summary))


@main.command()
@click.option("--nodes", "nodes_path", default=None, type=click.Path(exists=True))
@click.option("--edges", "edges_path", default=None, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path())
def update(nodes_path: str | None, edges_path: str | None, config_path: str | None) -> None:
    """Apply incremental updates to a snapshotted engine."""
    config = load_config(config_path)
    engine = Engine.load(config.snapshot_path)
    summary = engine.update_files(nodes_path, edges_path)
    engine.save(config.snapshot_path)
    click.echo(json.dumps(summary))


@main.command("build-index")
@click.option("--config", "config_path", default=None, type=click.Path())
def build_index(config_path: str | None) -> None:
    """Rebuild the index over current encodings and re-snapshot."""
    config = load_config(config_path)
    engine = Engine.load(config.snapshot_path)
    engine.build_index()
    engine.save(config.snapshot_path)
    click.echo(json.dumps({"indexed": engine.index.size, "clusters": engine.index.cluster_count}))


@main.command()
@click.option("--query", required=True)
@click.option("--granularity", default=None, type=click.Choice([k.value for k in NodeKind]))
@click.option("--k", default=10, type=int)
@click.option("--ref-date", default=None, help="Reference date YYYY-MM-DD (default: today)")
@click.option("--config", "config_path", default=None, type=click.Path())
def search(query: str, granularity: str | None, k: int, ref_date: str | None, config_path: str | None) -> None:
    """Parse a query, run retrieval, and print the result document."""
    engine = _load_engine(config_path)
    ref = date.today() if ref_date is None else datetime.strptime(ref_date, "%Y-%m-%d").date()
    intent = engine.parse_intent(query, ref, k=k)
    if granularity is not None:
        intent = replace(intent, granularity=NodeKind(granularity))
    result = engine.search_intent(intent)
    click.echo(to_programmable_format(result))


@main.command()
@click.option("--suite", required=True)
@click.option("--n", default=None, type=int)
@click.option("--seed", default=42, type=int)
@click.option("--config", "config_json", default=None, help="Extra suite config as JSON")
def bench(suite: str, n: int | None, seed: int, config_json: str | None) -> None:
    """Run a verification suite; nonzero exit when any criterion fails."""
    suite_config = json.loads(config_json) if config_json else {}
    if n is not None:
        suite_config.setdefault("n", n)
    suite_config.setdefault("seed", seed)
    report = run_suite(suite, suite_config)
    click.echo(json.dumps(report, indent=2))
    if not all(c["pass"] for c in report["criteria"]):
        sys.exit(1)


@main.command()
@click.option("--addr", default="127.0.0.1:8000")
@click.option("--config", "config_path", default=None, type=click.Path())
def serve(addr: str, config_path: str | None) -> None:
    """Serve the retrieval and mutation API over HTTP."""
    import uvicorn

    from .service import create_app

    engine = _load_engine(config_path)
    app = create_app(engine)
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise BindFailureError(f"invalid address {addr!r}; expected host:port")
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    except OSError as exc:
        raise BindFailureError(f"cannot bind {addr}: {exc}") from exc


def entrypoint() -> None:  # pragma: no cover - thin wrapper
    try:
        main(standalone_mode=True)
    except FusegraphError as exc:
        click.echo(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), err=True)
        sys.exit(2)


if __name__ == "__main__":
    entrypoint()
