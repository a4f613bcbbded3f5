import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from aha.cli import main
from aha.schema import AttributeSchema, DatasetSchema, MetricSchema
from aha.service.app import create_app

SESSIONS_CSV = """isp,city,bitrate
comcast,sf,9.0
comcast,sf,11.0
comcast,nyc,20.0
verizon,nyc,42.0
"""

SESSIONS_EPOCH1 = """isp,city,bitrate
comcast,sf,12.0
comcast,sf,14.0
verizon,nyc,40.0
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def schema_file(tmp_path):
    schema = DatasetSchema(
        AttributeSchema([("isp", ["comcast", "verizon"]), ("city", ["sf", "nyc"])]),
        MetricSchema(("bitrate",)),
    )
    path = tmp_path / "manifest.json"
    path.write_text(schema.to_json())
    return path


@pytest.fixture
def populated_store(runner, schema_file, tmp_path):
    store = tmp_path / "store"
    for epoch, text in enumerate([SESSIONS_CSV, SESSIONS_EPOCH1]):
        csv_path = tmp_path / f"sessions_{epoch}.csv"
        csv_path.write_text(text)
        result = runner.invoke(
            main,
            ["ingest", "--schema", str(schema_file), "--epoch", str(epoch),
             "--input", str(csv_path), "--out", str(store)],
        )
        assert result.exit_code == 0, result.output
    return store


class TestIngest:
    def test_reports_row_counts(self, runner, schema_file, tmp_path):
        csv_path = tmp_path / "sessions.csv"
        csv_path.write_text(SESSIONS_CSV)
        result = runner.invoke(
            main,
            ["ingest", "--schema", str(schema_file), "--epoch", "0",
             "--input", str(csv_path), "--out", str(tmp_path / "store")],
        )
        assert result.exit_code == 0
        assert "4 sessions -> 3 leaf rows" in result.output

    def test_duplicate_epoch_fails_without_overwrite(self, runner, schema_file, tmp_path, populated_store):
        csv_path = tmp_path / "again.csv"
        csv_path.write_text(SESSIONS_CSV)
        result = runner.invoke(
            main,
            ["ingest", "--epoch", "0", "--input", str(csv_path), "--out", str(populated_store)],
        )
        assert result.exit_code == 1
        assert "overwrite" in result.output

    def test_jsonl_input(self, runner, schema_file, tmp_path):
        lines = [
            json.dumps({"isp": "comcast", "city": "sf", "bitrate": 5.0}),
            json.dumps({"isp": "verizon", "city": "nyc", "bitrate": 6.0}),
        ]
        path = tmp_path / "sessions.jsonl"
        path.write_text("\n".join(lines))
        result = runner.invoke(
            main,
            ["ingest", "--schema", str(schema_file), "--epoch", "0",
             "--input", str(path), "--out", str(tmp_path / "store")],
        )
        assert result.exit_code == 0
        assert "2 sessions -> 2 leaf rows" in result.output

    def test_new_store_requires_schema(self, runner, tmp_path):
        csv_path = tmp_path / "sessions.csv"
        csv_path.write_text(SESSIONS_CSV)
        result = runner.invoke(
            main,
            ["ingest", "--epoch", "0", "--input", str(csv_path), "--out", str(tmp_path / "store")],
        )
        assert result.exit_code == 1
        assert "--schema is required" in result.output


class TestStoreCommands:
    def test_ls(self, runner, populated_store):
        result = runner.invoke(main, ["store", "ls", "--store", str(populated_store)])
        assert result.exit_code == 0
        assert "total compressed bytes" in result.output

    def test_verify_clean(self, runner, populated_store):
        result = runner.invoke(main, ["store", "verify", "--store", str(populated_store)])
        assert result.exit_code == 0
        assert "store OK" in result.output

    def test_verify_detects_flipped_byte(self, runner, populated_store):
        target = populated_store / "epoch_0.csv.zst"
        data = bytearray(target.read_bytes())
        data[len(data) // 2] ^= 0x01
        target.write_bytes(bytes(data))
        result = runner.invoke(main, ["store", "verify", "--store", str(populated_store)])
        assert result.exit_code == 1
        assert "epoch 0" in result.output and "checksum" in result.output


class TestQuery:
    def test_json_output(self, runner, populated_store):
        result = runner.invoke(
            main,
            ["query", "--store", str(populated_store), "--pattern", "isp=comcast,city=*",
             "--stat", "mean:bitrate", "--from", "0", "--to", "1"],
        )
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert [p["value"] for p in body["points"]] == [
            pytest.approx(40.0 / 3.0), 13.0,
        ]

    def test_matches_service_response_exactly(self, runner, populated_store):
        args = {"pattern": "isp=comcast,city=*", "stat": "mean:bitrate", "from": 0, "to": 1}
        cli = runner.invoke(
            main,
            ["query", "--store", str(populated_store), "--pattern", args["pattern"],
             "--stat", args["stat"], "--from", "0", "--to", "1"],
        )
        http = TestClient(create_app(populated_store)).get("/cohort", params=args)
        # normalize JSON numbers/whitespace, then demand byte-identical bodies
        cli_doc = json.loads(cli.output)
        http_doc = http.json()
        assert json.dumps(cli_doc, sort_keys=True) == json.dumps(http_doc, sort_keys=True)

    def test_unknown_value_fails(self, runner, populated_store):
        result = runner.invoke(
            main,
            ["query", "--store", str(populated_store), "--pattern", "isp=tmobile",
             "--from", "0", "--to", "1"],
        )
        assert result.exit_code == 1
        assert "not in dictionary" in result.output


class TestCubeCommand:
    def test_writes_csv(self, runner, populated_store, tmp_path):
        out = tmp_path / "cube.csv"
        result = runner.invoke(
            main,
            ["cube", "--store", str(populated_store), "--epoch", "0",
             "--stats", "mean:bitrate,count", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "isp,city,mean:bitrate,count"
        assert any(line.startswith("*,*") for line in lines)
        assert any(line.startswith("comcast,sf") for line in lines)

    def test_stdout_default(self, runner, populated_store):
        result = runner.invoke(
            main, ["cube", "--store", str(populated_store), "--epoch", "1"]
        )
        assert result.exit_code == 0
        assert result.output.startswith("isp,city,count")


class TestWhatifCommand:
    def test_compare_emits_diff(self, runner, schema_file, tmp_path):
        store = tmp_path / "store"
        rows = ["isp,city,bitrate"]
        for epoch, value in enumerate([10.0, 10.2, 9.8, 10.1, 9.9, 30.0]):
            path = tmp_path / f"e{epoch}.csv"
            path.write_text("isp,city,bitrate\n" + f"comcast,sf,{value}\n")
            result = runner.invoke(
                main,
                ["ingest", "--schema", str(schema_file), "--epoch", str(epoch),
                 "--input", str(path), "--out", str(store)],
            )
            assert result.exit_code == 0, result.output
        result = runner.invoke(
            main,
            ["whatif", "--store", str(store), "--pattern", "isp=comcast",
             "--detector", "3sigma", "--sigma", "3", "--window", "5",
             "--min-history", "3", "--from", "0", "--to", "5",
             "--compare", "sigma=1000"],
        )
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        [pattern_result] = body["results"]
        assert pattern_result["series"][0]["anomaly_epochs"] == [5]
        assert pattern_result["series"][1]["anomaly_epochs"] == []
        assert pattern_result["diff"] == {"added": [], "suppressed": [5]}

    def test_bad_override_key(self, runner, populated_store):
        result = runner.invoke(
            main,
            ["whatif", "--store", str(populated_store), "--pattern", "isp=comcast",
             "--from", "0", "--to", "1", "--compare", "bogus=1"],
        )
        assert result.exit_code == 1
        assert "unknown override" in result.output


class TestBenchCommand:
    def test_sparsity_suite_runs(self, runner, tmp_path):
        config = tmp_path / "bench.toml"
        config.write_text(
            """
[sparsity]
attributes = 2
values_per_attribute = 8
alpha = 1.2
seeds = 2
sample_sizes = [200, 2000]
"""
        )
        result = runner.invoke(
            main,
            ["bench", "--suite", "sparsity", "--config", str(config),
             "--out", str(tmp_path / "results")],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "results" / "sparsity.csv").exists()
        summary = json.loads(result.output)
        assert summary["suite"] == "sparsity"
