"""On-disk replay store: one zstd-compressed CSV per epoch plus a manifest.

Layout:
    store/manifest.json      schema, histogram config, epoch index
    store/epoch_<N>.csv.zst  leaf table for epoch N

Leaf CSV columns: the M attribute-code columns, then for every metric the
canonical aggregate columns (count, sum, sum_sq, min, max), then histogram
payload columns for metrics that carry a sketch. Floats are written as
shortest round-trip decimals, so a load reproduces the table bit for bit.
Manifest updates go through write-temp-then-rename; a failed persist never
leaves a manifest entry behind.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

from . import zstd
from .aggregates import HistogramSketch, HistogramSpec, MetricAggregate, PartialAggregate
from .errors import EpochRangeError, SchemaError, StoreError
from .ingest import IngestConfig, LeafTable
from .schema import DatasetSchema, EpochId

MANIFEST_NAME = "manifest.json"
STORE_VERSION = 1

_MAX_RANGE_SPAN = 10_000_000


def _epoch_file(index: int) -> str:
    return f"epoch_{index}.csv.zst"


def _checksum(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class EpochEntry:
    """Manifest record for one stored epoch."""

    epoch: int
    wall_clock_start: float | None
    file: str
    raw_bytes: int
    compressed_bytes: int
    leaf_count: int
    ingested_sessions: int
    rejected_sessions: int
    checksum: str

    def to_doc(self) -> dict:
        return {
            "epoch": self.epoch,
            "wall_clock_start": self.wall_clock_start,
            "file": self.file,
            "raw_bytes": self.raw_bytes,
            "compressed_bytes": self.compressed_bytes,
            "leaf_count": self.leaf_count,
            "ingested_sessions": self.ingested_sessions,
            "rejected_sessions": self.rejected_sessions,
            "checksum": self.checksum,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EpochEntry":
        return cls(**doc)


@dataclass(frozen=True)
class LoadResult:
    """Tables found in a requested range plus the epochs that were absent."""

    tables: list[LeafTable]
    missing: list[int]


class ReplayStore:
    """A directory of per-epoch leaf tables with a JSON manifest."""

    def __init__(
        self,
        path: str | Path,
        schema: DatasetSchema,
        config: IngestConfig,
        entries: dict[int, EpochEntry] | None = None,
    ):
        self.path = Path(path)
        self.schema = schema
        self.config = config
        self.entries: dict[int, EpochEntry] = entries or {}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(
        cls, path: str | Path, schema: DatasetSchema, config: IngestConfig | None = None
    ) -> "ReplayStore":
        path = Path(path)
        if (path / MANIFEST_NAME).exists():
            raise StoreError(f"store already exists at {path}")
        path.mkdir(parents=True, exist_ok=True)
        store = cls(path, schema, config or IngestConfig())
        store._write_manifest()
        return store

    @classmethod
    def open(cls, path: str | Path) -> "ReplayStore":
        path = Path(path)
        manifest_path = path / MANIFEST_NAME
        try:
            doc = json.loads(manifest_path.read_text())
        except FileNotFoundError:
            raise StoreError(f"no manifest at {manifest_path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreError(f"corrupt manifest at {manifest_path}: {exc}") from exc
        try:
            schema = DatasetSchema.from_manifest(doc["schema"])
            histograms = {
                name: HistogramSpec(h["lo"], h["hi"], h["buckets"])
                for name, h in doc.get("histograms", {}).items()
            }
            config = IngestConfig(
                histograms=histograms,
                closed_dictionaries=doc.get("closed_dictionaries", False),
            )
            entries = {e["epoch"]: EpochEntry.from_doc(e) for e in doc["epochs"]}
        except (KeyError, TypeError, SchemaError) as exc:
            raise StoreError(f"corrupt manifest at {manifest_path}: {exc}") from exc
        return cls(path, schema, config, entries)

    @classmethod
    def open_or_create(
        cls, path: str | Path, schema: DatasetSchema, config: IngestConfig | None = None
    ) -> "ReplayStore":
        if (Path(path) / MANIFEST_NAME).exists():
            store = cls.open(path)
            if store.schema != schema:
                raise StoreError(f"store at {path} was built with a different schema")
            return store
        return cls.create(path, schema, config)

    # -- manifest ----------------------------------------------------------

    def _write_manifest(self) -> None:
        doc = {
            "version": STORE_VERSION,
            "schema": self.schema.to_manifest(),
            "histograms": {
                name: {"lo": s.lo, "hi": s.hi, "buckets": s.buckets}
                for name, s in self.config.histograms.items()
            },
            "closed_dictionaries": self.config.closed_dictionaries,
            "epochs": [self.entries[i].to_doc() for i in sorted(self.entries)],
        }
        self._validate_epoch_order()
        tmp = self.path / (MANIFEST_NAME + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2))
        os.replace(tmp, self.path / MANIFEST_NAME)

    def _validate_epoch_order(self) -> None:
        clocked = [
            (i, e.wall_clock_start)
            for i, e in sorted(self.entries.items())
            if e.wall_clock_start is not None
        ]
        for (i1, t1), (i2, t2) in zip(clocked, clocked[1:]):
            if t2 <= t1:
                raise StoreError(
                    f"epoch {i2} starts at {t2}, not after epoch {i1} at {t1}"
                )

    @property
    def epoch_indexes(self) -> list[int]:
        return sorted(self.entries)

    # -- persist / load ----------------------------------------------------

    def persist(self, table: LeafTable, overwrite: bool = False) -> EpochEntry:
        """Serialize a leaf table to its epoch file and register it."""
        if table.schema != self.schema:
            raise StoreError("table schema does not match the store")
        index = table.epoch.index
        if index in self.entries and not overwrite:
            raise StoreError(f"epoch {index} already stored (pass overwrite to replace)")
        raw = serialize_leaf_csv(table)
        compressed = zstd.compress(raw)
        file_name = _epoch_file(index)
        target = self.path / file_name
        tmp = self.path / (file_name + ".tmp")
        try:
            tmp.write_bytes(compressed)
            os.replace(tmp, target)
        except OSError as exc:
            tmp.unlink(missing_ok=True)
            raise StoreError(f"failed writing {target}: {exc}") from exc
        entry = EpochEntry(
            epoch=index,
            wall_clock_start=table.epoch.wall_clock_start,
            file=file_name,
            raw_bytes=len(raw),
            compressed_bytes=len(compressed),
            leaf_count=table.leaf_count,
            ingested_sessions=table.ingested_sessions,
            rejected_sessions=table.rejected_sessions,
            checksum=_checksum(compressed),
        )
        self.entries[index] = entry
        self._write_manifest()
        return entry

    def load(self, index: int) -> LeafTable:
        entry = self.entries.get(index)
        if entry is None:
            raise StoreError(f"epoch {index} is not in the store")
        target = self.path / entry.file
        try:
            compressed = target.read_bytes()
        except OSError as exc:
            raise StoreError(f"epoch {index}: cannot read {target}: {exc}") from exc
        if _checksum(compressed) != entry.checksum:
            raise StoreError(f"epoch {index}: checksum mismatch for {target}")
        try:
            raw = zstd.decompress(compressed)
        except StoreError as exc:
            raise StoreError(f"epoch {index}: {exc}") from exc
        epoch = EpochId(index, entry.wall_clock_start)
        table = parse_leaf_csv(raw, self.schema, self.config, epoch)
        table = LeafTable(
            epoch=table.epoch,
            schema=table.schema,
            hist_specs=table.hist_specs,
            rows=table.rows,
            ingested_sessions=entry.ingested_sessions,
            rejected_sessions=entry.rejected_sessions,
        )
        if table.leaf_count != entry.leaf_count:
            raise StoreError(
                f"epoch {index}: {table.leaf_count} rows on disk, "
                f"manifest says {entry.leaf_count}"
            )
        return table

    def load_range(self, lo: int, hi: int) -> LoadResult:
        """All stored epochs with lo <= index <= hi, ascending.

        Absent epochs inside the span of stored data are reported, never
        fabricated as empty tables.
        """
        if lo > hi:
            raise EpochRangeError(f"from epoch {lo} > to epoch {hi}")
        if hi - lo > _MAX_RANGE_SPAN:
            raise EpochRangeError(f"range [{lo}, {hi}] spans more than {_MAX_RANGE_SPAN} epochs")
        present = [i for i in self.epoch_indexes if lo <= i <= hi]
        missing = sorted(set(range(lo, hi + 1)) - set(present))
        return LoadResult(tables=[self.load(i) for i in present], missing=missing)

    # -- maintenance -------------------------------------------------------

    def verify(self) -> list[str]:
        """Return a list of problems; an empty list means the store is sound."""
        problems = []
        listed = {MANIFEST_NAME}
        for index in self.epoch_indexes:
            entry = self.entries[index]
            listed.add(entry.file)
            target = self.path / entry.file
            if not target.exists():
                problems.append(f"epoch {index}: missing file {entry.file}")
                continue
            data = target.read_bytes()
            if _checksum(data) != entry.checksum:
                problems.append(f"epoch {index}: checksum mismatch in {entry.file}")
                continue
            try:
                table = self.load(index)
            except StoreError as exc:
                problems.append(f"epoch {index}: {exc}")
                continue
            if table.leaf_count != entry.leaf_count:
                problems.append(f"epoch {index}: leaf count drift in {entry.file}")
        for path in sorted(self.path.iterdir()):
            if path.name not in listed and not path.name.endswith(".tmp"):
                problems.append(f"unlisted file in store: {path.name}")
        return problems

    def total_compressed_bytes(self) -> int:
        """Bytes the store occupies on disk (epoch files plus manifest)."""
        total = (self.path / MANIFEST_NAME).stat().st_size
        for entry in self.entries.values():
            total += (self.path / entry.file).stat().st_size
        return total


# ---------------------------------------------------------------------------
# Module-level conveniences mirroring the persistence operations.

def persist(table: LeafTable, store_path: str | Path, overwrite: bool = False) -> EpochEntry:
    path = Path(store_path)
    if (path / MANIFEST_NAME).exists():
        store = ReplayStore.open(path)
        if store.schema != table.schema:
            raise StoreError("table schema does not match the existing store")
    else:
        config = IngestConfig(
            histograms={
                name: spec
                for name, spec in zip(table.schema.metrics.names, table.hist_specs)
                if spec is not None
            }
        )
        store = ReplayStore.create(path, table.schema, config)
    return store.persist(table, overwrite=overwrite)


def load_range(store_path: str | Path, lo: int, hi: int) -> LoadResult:
    return ReplayStore.open(store_path).load_range(lo, hi)


def storage_ratio(store_path: str | Path, raw_bytes: int) -> float:
    """Compressed store footprint relative to the raw dataset it summarizes."""
    if raw_bytes <= 0:
        raise SchemaError(f"raw_bytes must be positive, got {raw_bytes}")
    return ReplayStore.open(store_path).total_compressed_bytes() / raw_bytes


# ---------------------------------------------------------------------------
# Leaf CSV codec.

def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_leaf_csv(table: LeafTable) -> bytes:
    schema = table.schema
    header: list[str] = list(schema.attributes.names)
    for name in schema.metrics.names:
        header += [f"{name}:count", f"{name}:sum", f"{name}:sum_sq", f"{name}:min", f"{name}:max"]
    for name, spec in zip(schema.metrics.names, table.hist_specs):
        if spec is not None:
            header += [f"{name}:hist_below", f"{name}:hist_above"]
            header += [f"{name}:hist_{i}" for i in range(spec.buckets)]

    buf = io.StringIO()
    buf.write(",".join(header))
    buf.write("\n")
    for key in sorted(table.rows):
        agg = table.rows[key]
        cells: list[str] = [str(c) for c in key]
        for m in agg.metrics:
            cells += [
                str(m.count),
                _fmt(m.sum),
                _fmt(m.sum_sq),
                "" if m.min is None else _fmt(m.min),
                "" if m.max is None else _fmt(m.max),
            ]
        for m, spec in zip(agg.metrics, table.hist_specs):
            if spec is None:
                continue
            h = m.hist
            if h is None:
                raise StoreError("row lacks a histogram the config requires")
            cells += [str(h.below), str(h.above), *map(str, h.counts)]
        buf.write(",".join(cells))
        buf.write("\n")
    return buf.getvalue().encode()


def parse_leaf_csv(
    raw: bytes, schema: DatasetSchema, config: IngestConfig, epoch: EpochId
) -> LeafTable:
    specs = config.specs_for(schema)
    m = schema.attribute_count
    k = schema.metric_count
    text = raw.decode()
    lines = text.splitlines()
    if not lines:
        raise StoreError("leaf CSV is empty (missing header)")
    rows: dict[tuple[int, ...], PartialAggregate] = {}
    ingested = 0
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        key = tuple(int(c) for c in cells[:m])
        pos = m
        states: list[MetricAggregate] = []
        for _ in range(k):
            count = int(cells[pos])
            total = float(cells[pos + 1])
            total_sq = float(cells[pos + 2])
            lo = float(cells[pos + 3]) if cells[pos + 3] else None
            hi = float(cells[pos + 4]) if cells[pos + 4] else None
            states.append(MetricAggregate(count, total, total_sq, lo, hi, None))
            pos += 5
        for j, spec in enumerate(specs):
            if spec is None:
                continue
            below = int(cells[pos])
            above = int(cells[pos + 1])
            counts = tuple(int(c) for c in cells[pos + 2 : pos + 2 + spec.buckets])
            pos += 2 + spec.buckets
            states[j] = states[j]._replace(
                hist=HistogramSketch(spec.lo, spec.hi, counts, below, above)
            )
        if pos != len(cells):
            raise StoreError(f"leaf CSV row has {len(cells)} cells, expected {pos}")
        rows[key] = PartialAggregate(tuple(states))
        ingested += states[0].count if states else 0
    return LeafTable(
        epoch=epoch,
        schema=schema,
        hist_specs=specs,
        rows=rows,
        ingested_sessions=ingested,
        rejected_sessions=0,
    )


def now_epoch(index: int) -> EpochId:
    """EpochId stamped with the current wall clock."""
    return EpochId(index, time.time())
