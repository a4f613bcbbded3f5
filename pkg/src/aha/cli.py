"""Command-line interface.

Commands are thin wrappers over the engine: ingest builds and persists one
epoch, store inspects the on-disk layout, query/cube/whatif read through
the same code paths the HTTP service uses (and print the same JSON bodies),
bench drives the experiment suites, and serve starts the service.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .aggregates import HistogramSpec, StatisticRequest
from .bench.experiments import SUITES, BenchConfig, run_experiments
from .cube import cube_csv, cube as run_cube, query_pattern
from .detectors import DetectorConfig, whatif_replay
from .errors import EngineError, SchemaError
from .ingest import IngestConfig, ingest_epoch, read_sessions_csv, read_sessions_jsonl
from .schema import CohortPattern, DatasetSchema, EpochId
from .service.models import build_cohort_response, build_whatif_response
from .store import ReplayStore


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _open_store(path: str) -> ReplayStore:
    return ReplayStore.open(path)


def _parse_hist(spec: str) -> tuple[str, HistogramSpec]:
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise SchemaError(f"bad histogram spec {spec!r}, expected metric:lo:hi[:buckets]")
    name = parts[0]
    lo, hi = float(parts[1]), float(parts[2])
    buckets = int(parts[3]) if len(parts) == 4 else 64
    return name, HistogramSpec(lo, hi, buckets).validate()


@click.group()
def main():
    """Compact per-epoch summaries with exact cohort roll-ups and what-if replay."""


@main.command()
@click.option("--schema", "schema_path", type=click.Path(exists=True), help="Schema manifest JSON (required for a new store).")
@click.option("--epoch", type=int, required=True, help="Epoch ordinal to ingest.")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--out", "store_path", type=click.Path(), required=True, help="Store directory.")
@click.option("--format", "input_format", type=click.Choice(["csv", "jsonl"]), default=None, help="Defaults from the file extension.")
@click.option("--hist", "hists", multiple=True, help="Histogram sketch per metric: metric:lo:hi[:buckets]. New stores only.")
@click.option("--closed", is_flag=True, help="Reject attribute values missing from the dictionaries.")
@click.option("--overwrite", is_flag=True, help="Replace the epoch if already stored.")
@click.option("--wall-clock", type=float, default=None, help="Epoch start, seconds since the Unix epoch.")
@click.option("--shards", type=int, default=1, show_default=True)
def ingest(schema_path, epoch, input_path, store_path, input_format, hists, closed, overwrite, wall_clock, shards):
    """Collapse one epoch of raw sessions into stored leaf summaries."""
    try:
        store_dir = Path(store_path)
        if (store_dir / "manifest.json").exists():
            store = ReplayStore.open(store_dir)
            schema = store.schema
            if hists:
                requested = dict(_parse_hist(h) for h in hists)
                if requested != dict(store.config.histograms):
                    raise SchemaError(
                        "histogram config differs from the one the store was created "
                        "with; it is fixed per store"
                    )
        else:
            if schema_path is None:
                raise SchemaError("--schema is required when creating a new store")
            schema = DatasetSchema.from_json(Path(schema_path).read_text())
            histograms = dict(_parse_hist(h) for h in hists)
            store = ReplayStore.create(
                store_dir,
                schema,
                IngestConfig(histograms=histograms, closed_dictionaries=closed),
            )

        fmt = input_format
        if fmt is None:
            fmt = "jsonl" if str(input_path).endswith((".jsonl", ".ndjson")) else "csv"
        reader = read_sessions_csv if fmt == "csv" else read_sessions_jsonl
        with open(input_path) as f:
            batch = reader(f, schema, EpochId(epoch, wall_clock), closed_dictionaries=closed)
        config = IngestConfig(
            histograms=store.config.histograms,
            closed_dictionaries=closed,
            shards=shards,
        )
        table = ingest_epoch(schema, batch, config)
        entry = store.persist(table, overwrite=overwrite)
    except (EngineError, OSError) as exc:
        _fail(str(exc))
    click.echo(
        f"epoch {epoch}: {table.ingested_sessions} sessions -> {entry.leaf_count} leaf rows "
        f"({entry.compressed_bytes} bytes compressed"
        + (f", {table.rejected_sessions} rejected" if table.rejected_sessions else "")
        + ")"
    )


@main.group()
def store():
    """Inspect the on-disk replay store."""


@store.command("ls")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
def store_ls(store_path):
    """List stored epochs with sizes and leaf counts."""
    try:
        opened = _open_store(store_path)
    except EngineError as exc:
        _fail(str(exc))
    click.echo(f"{'epoch':>8} {'leaves':>10} {'sessions':>10} {'raw':>12} {'compressed':>12}")
    for index in opened.epoch_indexes:
        e = opened.entries[index]
        click.echo(
            f"{e.epoch:>8} {e.leaf_count:>10} {e.ingested_sessions:>10} "
            f"{e.raw_bytes:>12} {e.compressed_bytes:>12}"
        )
    click.echo(f"total compressed bytes: {opened.total_compressed_bytes()}")


@store.command("verify")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
def store_verify(store_path):
    """Check checksums, row counts, and manifest consistency."""
    try:
        problems = _open_store(store_path).verify()
    except EngineError as exc:
        _fail(str(exc))
    if problems:
        for p in problems:
            click.echo(p, err=True)
        sys.exit(1)
    click.echo("store OK")


@main.command()
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--pattern", required=True, help="attr=value pairs, comma separated; omitted attrs are wildcards.")
@click.option("--stat", default=None, help="e.g. mean:bitrate (defaults to mean of the first metric).")
@click.option("--from", "from_epoch", type=int, required=True)
@click.option("--to", "to_epoch", type=int, required=True)
def query(store_path, pattern, stat, from_epoch, to_epoch):
    """Per-epoch finalized statistics for one cohort, as JSON."""
    try:
        opened = _open_store(store_path)
        parsed = CohortPattern.parse(pattern, opened.schema.attributes)
        request = (
            StatisticRequest.parse(stat)
            if stat
            else StatisticRequest("mean", opened.schema.metrics.names[0])
        )
        result = opened.load_range(from_epoch, to_epoch)
        values = query_pattern(result.tables, parsed, [request])
        response = build_cohort_response(
            parsed, opened.schema, request, values, result.missing,
            from_epoch, to_epoch, limit=10_000, offset=0,
        )
    except EngineError as exc:
        _fail(str(exc))
    click.echo(response.model_dump_json(indent=2, by_alias=True))


@main.command("cube")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--epoch", type=int, required=True)
@click.option("--stats", default="count", show_default=True, help="Comma-separated statistic requests.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
def cube_command(store_path, epoch, stats, out_path):
    """Roll every non-empty cohort of one epoch up from its leaf table."""
    try:
        opened = _open_store(store_path)
        table = opened.load(epoch)
        requests = [StatisticRequest.parse(s) for s in stats.split(",") if s.strip()]
        result = run_cube(table, requests)
        text = cube_csv(result)
    except EngineError as exc:
        _fail(str(exc))
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"{len(result)} cohorts -> {out_path}")
    else:
        click.echo(text, nl=False)


def _apply_override(config: DetectorConfig, text: str) -> DetectorConfig:
    from dataclasses import replace

    overrides = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if not value:
            raise SchemaError(f"bad override {part!r}, expected key=value")
        if key == "sigma":
            overrides["sigma_multiplier"] = float(value)
        elif key == "tau":
            overrides["knn_tau"] = float(value)
        elif key == "k":
            overrides["knn_k"] = int(value)
        elif key == "window":
            overrides["window"] = int(value)
        elif key == "min-history":
            overrides["min_history"] = int(value)
        elif key == "feature":
            overrides["feature"] = StatisticRequest.parse(value)
        else:
            raise SchemaError(f"unknown override key {key!r}")
    return replace(config, **overrides)


@main.command()
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--pattern", "patterns", multiple=True, required=True)
@click.option("--detector", type=click.Choice(["3sigma", "knn"]), default="3sigma", show_default=True)
@click.option("--feature", default=None, help="Statistic request; defaults to mean of the first metric.")
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--window", type=int, default=30, show_default=True)
@click.option("--k", "knn_k", type=int, default=3, show_default=True)
@click.option("--tau", type=float, default=1.0, show_default=True)
@click.option("--min-history", type=int, default=None)
@click.option("--from", "from_epoch", type=int, required=True)
@click.option("--to", "to_epoch", type=int, required=True)
@click.option("--compare", default=None, help="Overrides for a second config, e.g. sigma=5 or tau=2,window=10.")
def whatif(store_path, patterns, detector, feature, sigma, window, knn_k, tau, min_history, from_epoch, to_epoch, compare):
    """Replay detector decisions over stored history, as JSON."""
    try:
        opened = _open_store(store_path)
        feature_request = (
            StatisticRequest.parse(feature)
            if feature
            else StatisticRequest("mean", opened.schema.metrics.names[0])
        )
        base = DetectorConfig(
            kind="three_sigma" if detector == "3sigma" else "knn",
            feature=feature_request,
            window=window,
            sigma_multiplier=sigma,
            knn_k=knn_k,
            knn_tau=tau,
            min_history=min_history,
        )
        configs = [base]
        if compare:
            configs.append(_apply_override(base, compare))
        parsed = [CohortPattern.parse(p, opened.schema.attributes) for p in patterns]
        result = opened.load_range(from_epoch, to_epoch)
        replayed = whatif_replay(result.tables, parsed, configs, from_epoch, to_epoch)
        response = build_whatif_response(
            replayed, opened.schema, result.missing, from_epoch, to_epoch
        )
    except EngineError as exc:
        _fail(str(exc))
    click.echo(response.model_dump_json(indent=2, by_alias=True))


@main.command()
@click.option("--suite", type=click.Choice(SUITES), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="TOML config; defaults are desk scale.")
@click.option("--out", "out_dir", type=click.Path(), default="results", show_default=True)
def bench(suite, config_path, out_dir):
    """Run one benchmark suite and write its CSV report."""
    try:
        config = BenchConfig.from_toml(config_path) if config_path else BenchConfig()
        summary = run_experiments(suite, config, out_dir)
    except EngineError as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary, indent=2, default=str))
    if summary.get("partial"):
        click.echo("warning: time budget exceeded, results are partial", err=True)
        sys.exit(2)


@main.command()
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--listen", default="127.0.0.1:8080", show_default=True)
@click.option("--cors", "cors_origins", multiple=True, help="Allowed browser origin (repeatable).")
def serve(store_path, listen, cors_origins):
    """Serve the read-only HTTP API over an immutable store."""
    import uvicorn

    from .service.app import create_app

    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        _fail(f"bad --listen {listen!r}, expected host:port")
    app = create_app(store_path, cors_origins=cors_origins)
    uvicorn.run(app, host=host, port=int(port))


if __name__ == "__main__":
    main()
