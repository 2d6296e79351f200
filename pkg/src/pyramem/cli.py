"""Command-line surface mirroring the HTTP API over a local data directory.

Exit codes: 0 success, 2 usage error (click), 3 I/O error, 4 not found,
5 invalid input, 6 conflict (store exists / ingest busy), 7 adapter failure.
``--json`` prints exactly the canonical JSON the HTTP API serves, so the
two surfaces are byte-comparable.
"""

from __future__ import annotations

import json
import sys

import click

from .adapters.base import AdapterFailure
from .bench import (
    BenchConfig,
    format_table,
    generate_workload,
    load_workload,
    resolve_variants,
    run_ablation,
    save_workload,
    write_csv,
)
from .config import EngineConfig
from .ingest import StreamOrderError, read_event_file
from .reasoner import ReasonerError, result_json
from .service import StoreRegistry, node_view, persons_view
from .store import NodeNotFound, StoreError

EXIT_IO = 3
EXIT_NOT_FOUND = 4
EXIT_INVALID = 5
EXIT_CONFLICT = 6
EXIT_ADAPTER = 7


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _registry(data_dir: str) -> StoreRegistry:
    return StoreRegistry(data_dir)


def _get_handle(registry: StoreRegistry, store_id: str):
    try:
        return registry.get(store_id)
    except KeyError:
        _fail(EXIT_NOT_FOUND, f"store {store_id!r} not found")


data_dir_option = click.option(
    "--data-dir", default="./pyramem-data", show_default=True,
    help="Directory holding store subdirectories.")


def _resolve_store(positional: str | None, flag: str | None) -> str:
    if positional and flag and positional != flag:
        _fail(EXIT_INVALID, "store given twice (positional and --store differ)")
    store = positional or flag
    if not store:
        _fail(EXIT_INVALID, "store id required (positional or --store)")
    return store


@click.group()
def main():
    """Three-level streaming memory engine."""


@main.command()
@click.argument("store_id")
@data_dir_option
@click.option("--dim", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--clip-len", default=30.0, show_default=True)
@click.option("--k-seed", default=20, show_default=True)
@click.option("--max-turns", default=3, show_default=True)
@click.option("--k-link", default=10, show_default=True)
def create(store_id, data_dir, dim, seed, clip_len, k_seed, max_turns, k_link):
    """Create a named store."""
    config = EngineConfig(dim=dim, seed=seed, clip_len=clip_len, k_seed=k_seed,
                          max_turns=max_turns, k_link=k_link)
    try:
        _registry(data_dir).create(store_id, config)
    except FileExistsError as exc:
        _fail(EXIT_CONFLICT, str(exc))
    except StoreError as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(f"created store {store_id}")


@main.command()
@click.argument("store_id", required=False)
@click.option("--store", "store_flag", default=None,
              help="Store id (alternative to the positional argument).")
@click.option("--stream", "stream_path", required=True,
              type=click.Path(), help="Line-delimited JSON event file.")
@click.option("--clip-len", default=None, type=float,
              help="Override the store's clip length (seconds).")
@data_dir_option
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON.")
def ingest(store_id, store_flag, stream_path, clip_len, data_dir, as_json):
    """Ingest an event stream into a store."""
    store_id = _resolve_store(store_id, store_flag)
    handle = _get_handle(_registry(data_dir), store_id)
    try:
        events = read_event_file(stream_path)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read stream: {exc}")
    except ValueError as exc:
        _fail(EXIT_INVALID, str(exc))
    if not handle.ingest_busy.acquire(blocking=False):
        _fail(EXIT_CONFLICT, f"ingest already running on {store_id!r}")
    try:
        try:
            report = handle.pipeline(clip_len).ingest_events(events)
        except (StreamOrderError, StoreError, ValueError) as exc:
            _fail(EXIT_INVALID, str(exc))
        handle.save()
    finally:
        handle.ingest_busy.release()
    if as_json:
        click.echo(result_json(report.to_dict()))
    else:
        click.echo(f"ingested {report.clips} clips, {report.facts} facts, "
                   f"{report.links} links; global version {report.global_version}")
        for warning in report.warnings:
            click.echo(f"warning: {warning}", err=True)


@main.command()
@click.argument("store_id", required=False)
@click.option("--store", "store_flag", default=None,
              help="Store id (alternative to the positional argument).")
@click.option("--question", required=True)
@click.option("--k", default=None, type=int, help="Seed retrieval size.")
@click.option("--max-turns", default=None, type=int)
@click.option("--option", "options", multiple=True,
              help="Multiple-choice option (repeatable).")
@click.option("--trace", is_flag=True, help="Print the per-turn trace.")
@data_dir_option
@click.option("--json", "as_json", is_flag=True,
              help="Print one canonical AnswerResult JSON document.")
def query(store_id, store_flag, question, k, max_turns, options, trace, data_dir,
          as_json):
    """Answer a question over a store."""
    store_id = _resolve_store(store_id, store_flag)
    handle = _get_handle(_registry(data_dir), store_id)
    reasoner = handle.reasoner()
    try:
        with handle.store.reading():
            result = reasoner.answer(question, k_seed=k, max_turns=max_turns,
                                     options=tuple(options) or None)
    except (ReasonerError, AdapterFailure) as exc:
        _fail(EXIT_ADAPTER, str(exc))
    doc = result.to_dict()
    handle.log_query(question, doc)
    if as_json:
        click.echo(result_json(doc))
        return
    click.echo(f"answer: {result.answer if result.answer is not None else '(none)'}")
    click.echo(f"terminated_by: {result.terminated_by} "
               f"after {result.turns_used} turn(s), "
               f"{len(result.context_final.nodes)} context nodes")
    if trace:
        for record in result.context_final.trace:
            verdict = record.verdict
            shown = verdict.text if verdict.is_answer else "[Expand]"
            click.echo(f"  turn {record.turn}: +{len(record.expanded)} candidates, "
                       f"kept {len(record.pruned_in)} -> {shown}")


@main.group()
def inspect():
    """Inspect stored structures."""


@inspect.command("node")
@click.argument("store_id")
@click.argument("node_id")
@data_dir_option
@click.option("--json", "as_json", is_flag=True)
def inspect_node(store_id, node_id, data_dir, as_json):
    """Show one node and its outgoing links."""
    handle = _get_handle(_registry(data_dir), store_id)
    try:
        with handle.store.reading():
            doc = node_view(handle.store, node_id)
    except (NodeNotFound, KeyError):
        _fail(EXIT_NOT_FOUND, f"node {node_id!r} not found")
    if as_json:
        click.echo(result_json(doc))
        return
    click.echo(f"{doc['level']} {node_id}")
    click.echo(json.dumps(doc["node"], ensure_ascii=False, indent=2))
    for kind, links in doc["links"].items():
        click.echo(f"{kind}: " + ", ".join(l["target"] for l in links))


@main.command()
@click.argument("store_id")
@data_dir_option
@click.option("--json", "as_json", is_flag=True)
def stats(store_id, data_dir, as_json):
    """Per-level node counts and link histogram."""
    handle = _get_handle(_registry(data_dir), store_id)
    with handle.store.reading():
        doc = handle.store.stats()
    if as_json:
        click.echo(result_json(doc))
        return
    click.echo(f"facts={doc['facts']} clips={doc['clips']} persons={doc['persons']} "
               f"global_version={doc['global_version']}")
    click.echo("links: " + ", ".join(f"{k}={v}" for k, v in doc["links"].items()))


@main.command()
@click.argument("store_id")
@data_dir_option
@click.option("--json", "as_json", is_flag=True)
def persons(store_id, data_dir, as_json):
    """List tracked person entities."""
    handle = _get_handle(_registry(data_dir), store_id)
    with handle.store.reading():
        doc = persons_view(handle.store)
    if as_json:
        click.echo(result_json(doc))
        return
    for person in doc["persons"]:
        click.echo(f"{person['person_id']}: {person['observation_count']} observations; "
                   f"{person['profile'][:80]}")


@main.command()
@click.option("--workload", "workload_path", type=click.Path(),
              help="Load a serialized workload instead of generating one.")
@click.option("--tasks", default=50, show_default=True)
@click.option("--hops", default="2", show_default=True,
              help="Comma-separated hop counts, e.g. '0,2'.")
@click.option("--seed", default=0, show_default=True)
@click.option("--variants", default="all", show_default=True,
              help="Comma-separated variant names or 'all'.")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Write results CSV here.")
@click.option("--save-workload", "save_path", default=None, type=click.Path())
@click.option("--delay-ms", default=0.0, show_default=True,
              help="Injected answer-model delay per context node (ms).")
def bench(workload_path, tasks, hops, seed, variants, out_path, save_path, delay_ms):
    """Run the ablation/latency harness on a synthetic workload."""
    cfg = BenchConfig(seed=seed)
    if workload_path:
        try:
            workload, cfg = load_workload(workload_path)
        except OSError as exc:
            _fail(EXIT_IO, f"cannot read workload: {exc}")
        except (ValueError, KeyError) as exc:
            _fail(EXIT_INVALID, f"bad workload file: {exc}")
    else:
        try:
            hop_values = [int(h) for h in hops.split(",") if h.strip()]
        except ValueError:
            _fail(EXIT_INVALID, f"bad --hops value {hops!r}")
        distribution = {h: hop_values.count(h) / len(hop_values)
                        for h in set(hop_values)}
        workload = generate_workload(tasks, distribution, seed, cfg)
    if save_path:
        save_workload(workload, save_path, cfg)
    try:
        chosen = resolve_variants([v.strip() for v in variants.split(",")])
    except ValueError as exc:
        _fail(EXIT_INVALID, str(exc))
    reports = run_ablation(workload, chosen, cfg, delay_per_node=delay_ms / 1000.0)
    click.echo(format_table(reports))
    if out_path:
        write_csv(reports, out_path)
        click.echo(f"wrote {out_path}")


@main.command()
@data_dir_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--token", default=None, help="Require this bearer token.")
def serve(data_dir, host, port, token):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir, token=token), host=host, port=port)


if __name__ == "__main__":
    main()
