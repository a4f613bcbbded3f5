import json

import numpy as np
import pytest

from aha.aggregates import HistogramSpec
from aha.errors import EpochRangeError, SchemaError, StoreError
from aha.ingest import IngestConfig, ingest_epoch
from aha.schema import (
    AttributeSchema,
    DatasetSchema,
    EpochId,
    MetricSchema,
    SessionBatch,
    SessionRecord,
)
from aha.store import ReplayStore, load_range, persist, storage_ratio
from aha import zstd

from _data import quantized, random_batches, random_schema


@pytest.fixture
def schema():
    return DatasetSchema(
        AttributeSchema([("isp", ["comcast", "verizon"]), ("city", ["sf", "nyc"])]),
        MetricSchema(("bitrate",)),
    )


def small_table(schema, epoch=0, wall=None):
    batch = SessionBatch(
        EpochId(epoch, wall),
        (
            SessionRecord((0, 0), (3.5,)),
            SessionRecord((0, 0), (4.5,)),
            SessionRecord((1, 1), (-2.25,)),
        ),
    )
    return ingest_epoch(schema, batch)


class TestPersistRoundTrip:
    def test_exact_round_trip(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        table = small_table(schema)
        store.persist(table)
        assert store.load(0) == table

    def test_round_trip_with_histograms(self, schema, tmp_path):
        config = IngestConfig(histograms={"bitrate": HistogramSpec(-10.0, 10.0, 8)})
        store = ReplayStore.create(tmp_path / "store", schema, config)
        batch = SessionBatch(
            EpochId(2),
            tuple(SessionRecord((0, 1), (float(v),)) for v in (-12.0, 0.5, 3.25, 99.0)),
        )
        table = ingest_epoch(schema, batch, config)
        store.persist(table)
        assert store.load(2) == table

    def test_round_trip_random_floats_bit_exact(self, tmp_path):
        rng = np.random.default_rng(9)
        schema = random_schema(rng)
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        for batch in random_batches(rng, schema, max_epochs=4, max_total_sessions=300):
            table = ingest_epoch(schema, batch)
            store.persist(table)
            assert store.load(batch.epoch.index) == table

    def test_empty_table_header_only(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        entry = store.persist(ingest_epoch(schema, SessionBatch(EpochId(5), ())))
        assert entry.leaf_count == 0
        raw = zstd.decompress((tmp_path / "store" / entry.file).read_bytes())
        assert raw.decode().count("\n") == 1  # just the header line
        assert store.load(5).leaf_count == 0

    def test_duplicate_epoch_needs_overwrite(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(small_table(schema))
        with pytest.raises(StoreError):
            store.persist(small_table(schema))
        store.persist(small_table(schema), overwrite=True)
        assert store.epoch_indexes == [0]  # one manifest entry, not two

    def test_compression_shrinks_redundant_rows(self, tmp_path):
        schema = DatasetSchema(
            AttributeSchema([("a", [f"v{i}" for i in range(400)]),
                             ("b", [f"w{i}" for i in range(250)])]),
            MetricSchema(("m",)),
        )
        rng = np.random.default_rng(0)
        n = 100_000
        codes_a = rng.integers(0, 400, size=n)
        codes_b = rng.integers(0, 250, size=n)
        values = quantized(rng.normal(100, 5, size=n))
        batch = SessionBatch(
            EpochId(0),
            tuple(
                SessionRecord((int(a), int(b)), (float(v),))
                for a, b, v in zip(codes_a, codes_b, values)
            ),
        )
        table = ingest_epoch(schema, batch)
        assert table.leaf_count > 50_000  # mostly-distinct tuples: little collapsing
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        entry = store.persist(table)
        assert entry.compressed_bytes < entry.raw_bytes

    def test_schema_mismatch_rejected(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        other = DatasetSchema(
            AttributeSchema([("different", ["x"])]), MetricSchema(("m",))
        )
        table = ingest_epoch(other, SessionBatch(EpochId(0), (SessionRecord((0,), (1.0,)),)))
        with pytest.raises(StoreError):
            store.persist(table)


class TestLoadRange:
    def test_ordered_tables(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        for e in (2, 0, 1):
            store.persist(small_table(schema, epoch=e))
        result = store.load_range(0, 2)
        assert [t.epoch.index for t in result.tables] == [0, 1, 2]
        assert result.missing == []

    def test_gap_reported_not_fabricated(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        for e in (0, 2):
            store.persist(small_table(schema, epoch=e))
        result = store.load_range(0, 2)
        assert [t.epoch.index for t in result.tables] == [0, 2]
        assert result.missing == [1]

    def test_reversed_range_is_an_error(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        with pytest.raises(EpochRangeError):
            store.load_range(3, 1)

    def test_module_level_helpers(self, schema, tmp_path):
        table = small_table(schema, epoch=1)
        persist(table, tmp_path / "store")
        result = load_range(tmp_path / "store", 0, 9)
        assert len(result.tables) == 1 and result.tables[0] == table


class TestVerify:
    def test_clean_store(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(small_table(schema))
        assert store.verify() == []

    def test_flipped_byte_detected(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        entry = store.persist(small_table(schema))
        target = tmp_path / "store" / entry.file
        data = bytearray(target.read_bytes())
        data[len(data) // 2] ^= 0xFF
        target.write_bytes(bytes(data))
        problems = ReplayStore.open(tmp_path / "store").verify()
        assert any("checksum" in p for p in problems)
        with pytest.raises(StoreError, match="epoch 0"):
            ReplayStore.open(tmp_path / "store").load(0)

    def test_missing_file_detected(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        entry = store.persist(small_table(schema))
        (tmp_path / "store" / entry.file).unlink()
        assert any("missing" in p for p in ReplayStore.open(tmp_path / "store").verify())

    def test_unlisted_file_detected(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        (tmp_path / "store" / "epoch_99.csv.zst").write_bytes(b"junk")
        assert any("unlisted" in p for p in store.verify())

    def test_corrupt_manifest(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        (tmp_path / "store" / "manifest.json").write_text("{not json")
        with pytest.raises(StoreError):
            ReplayStore.open(tmp_path / "store")


class TestStorageRatio:
    def test_arithmetic(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(small_table(schema))
        total = store.total_compressed_bytes()
        assert storage_ratio(tmp_path / "store", total * 100) == pytest.approx(0.01)

    def test_raw_bytes_must_be_positive(self, schema, tmp_path):
        ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        with pytest.raises(SchemaError):
            storage_ratio(tmp_path / "store", 0)

    def test_degenerate_one_session_per_leaf_reported_honestly(self, tmp_path):
        # No collapsing plus aggregate-column overhead: the ratio may exceed 1.
        schema = DatasetSchema(
            AttributeSchema([("a", [f"v{i}" for i in range(64)])]),
            MetricSchema(("m",)),
        )
        sessions = tuple(SessionRecord((i,), (float(i),)) for i in range(64))
        table = ingest_epoch(schema, SessionBatch(EpochId(0), sessions))
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(table)
        raw_csv_bytes = len("a,m\n") + sum(len(f"v{i},{float(i)!r}\n") for i in range(64))
        ratio = storage_ratio(tmp_path / "store", raw_csv_bytes)
        assert ratio > 0.5  # summaries cannot beat raw data that never repeats


class TestManifestIntegrity:
    def test_wall_clock_must_increase_with_index(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(small_table(schema, epoch=0, wall=1000.0))
        with pytest.raises(StoreError):
            store.persist(small_table(schema, epoch=1, wall=900.0))

    def test_manifest_lists_every_file(self, schema, tmp_path):
        store = ReplayStore.create(tmp_path / "store", schema, IngestConfig())
        store.persist(small_table(schema, epoch=0))
        store.persist(small_table(schema, epoch=1))
        doc = json.loads((tmp_path / "store" / "manifest.json").read_text())
        files = {e["file"] for e in doc["epochs"]}
        on_disk = {p.name for p in (tmp_path / "store").iterdir()} - {"manifest.json"}
        assert files == on_disk

    def test_open_restores_config(self, schema, tmp_path):
        config = IngestConfig(histograms={"bitrate": HistogramSpec(0, 100, 16)})
        ReplayStore.create(tmp_path / "store", schema, config)
        reopened = ReplayStore.open(tmp_path / "store")
        assert reopened.config.histograms["bitrate"] == HistogramSpec(0, 100, 16)
        assert reopened.schema == schema
