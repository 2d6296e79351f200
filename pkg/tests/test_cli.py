import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from pyramem.cli import EXIT_CONFLICT, EXIT_INVALID, EXIT_IO, EXIT_NOT_FOUND, main
from pyramem.service import create_app
from test_service import FIXTURE_EVENTS, ndjson


@pytest.fixture()
def runner():
    return CliRunner()


def write_stream(tmp_path, events=FIXTURE_EVENTS):
    path = tmp_path / "stream.ndjson"
    path.write_text(ndjson(events), encoding="utf-8")
    return str(path)


def setup_store(runner, tmp_path, store_id="s1"):
    data_dir = str(tmp_path / "data")
    assert runner.invoke(main, ["create", store_id, "--data-dir", data_dir]
                         ).exit_code == 0
    result = runner.invoke(main, ["ingest", store_id, "--data-dir", data_dir,
                                  "--stream", write_stream(tmp_path)])
    assert result.exit_code == 0, result.output
    return data_dir


class TestCreateIngestQuery:
    def test_happy_path(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, [
            "query", "s1", "--data-dir", data_dir,
            "--question", "what about the kettle whistle", "--trace"])
        assert result.exit_code == 0, result.output
        assert "kettle whistle" in result.output
        assert "turn 0" in result.output

    def test_query_json_is_single_document(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, [
            "query", "s1", "--data-dir", data_dir,
            "--question", "what about the kettle whistle", "--json"])
        doc = json.loads(result.output)  # exactly one JSON value on stdout
        assert doc["terminated_by"] == "sufficient"

    def test_create_duplicate_conflict(self, runner, tmp_path):
        data_dir = str(tmp_path / "data")
        runner.invoke(main, ["create", "s1", "--data-dir", data_dir])
        result = runner.invoke(main, ["create", "s1", "--data-dir", data_dir])
        assert result.exit_code == EXIT_CONFLICT

    def test_ingest_missing_file_io_error(self, runner, tmp_path):
        data_dir = str(tmp_path / "data")
        runner.invoke(main, ["create", "s1", "--data-dir", data_dir])
        result = runner.invoke(main, ["ingest", "s1", "--data-dir", data_dir,
                                      "--stream", str(tmp_path / "missing.ndjson")])
        assert result.exit_code == EXIT_IO

    def test_unknown_store_not_found(self, runner, tmp_path):
        result = runner.invoke(main, ["query", "ghost", "--data-dir",
                                      str(tmp_path / "data"), "--question", "q"])
        assert result.exit_code == EXIT_NOT_FOUND

    def test_store_flag_form(self, runner, tmp_path):
        data_dir = str(tmp_path / "data")
        runner.invoke(main, ["create", "s1", "--data-dir", data_dir])
        result = runner.invoke(main, ["ingest", "--store", "s1",
                                      "--data-dir", data_dir,
                                      "--stream", write_stream(tmp_path)])
        assert result.exit_code == 0, result.output
        result = runner.invoke(main, ["query", "--store", "s1",
                                      "--data-dir", data_dir,
                                      "--question", "kettle whistle begins"])
        assert result.exit_code == 0, result.output

    def test_conflicting_store_forms_rejected(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, ["query", "s1", "--store", "other",
                                      "--data-dir", data_dir, "--question", "q"])
        assert result.exit_code == EXIT_INVALID

    def test_unordered_stream_invalid(self, runner, tmp_path):
        data_dir = str(tmp_path / "data")
        runner.invoke(main, ["create", "s1", "--data-dir", data_dir])
        bad = tmp_path / "bad.ndjson"
        bad.write_text(ndjson([{"t": 9, "text": "a"}, {"t": 1, "text": "b"}]))
        result = runner.invoke(main, ["ingest", "s1", "--data-dir", data_dir,
                                      "--stream", str(bad)])
        assert result.exit_code == EXIT_INVALID


class TestInspectAndStats:
    def test_inspect_node(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, ["inspect", "node", "s1", "f-3",
                                      "--data-dir", data_dir, "--json"])
        doc = json.loads(result.output)
        assert doc["node"]["text"] == "kettle whistle begins"

    def test_inspect_missing_node(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, ["inspect", "node", "s1", "f-77",
                                      "--data-dir", data_dir])
        assert result.exit_code == EXIT_NOT_FOUND

    def test_stats_json(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, ["stats", "s1", "--data-dir", data_dir,
                                      "--json"])
        doc = json.loads(result.output)
        assert doc["facts"] == 6 and doc["clips"] == 2

    def test_persons_listing(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        result = runner.invoke(main, ["persons", "s1", "--data-dir", data_dir,
                                      "--json"])
        assert len(json.loads(result.output)["persons"]) == 2


class TestCliHttpParity:
    def test_query_and_stats_byte_identical(self, runner, tmp_path):
        data_dir = setup_store(runner, tmp_path)
        question = "what about the kettle whistle"
        cli_query = runner.invoke(main, ["query", "s1", "--data-dir", data_dir,
                                         "--question", question, "--json"])
        cli_stats = runner.invoke(main, ["stats", "s1", "--data-dir", data_dir,
                                         "--json"])
        with TestClient(create_app(data_dir)) as client:
            http_query = client.post("/stores/s1/query",
                                     json={"question": question}).text
            http_stats = client.get("/stores/s1/graph/stats").text
        assert cli_query.output.strip() == http_query
        assert cli_stats.output.strip() == http_stats


class TestBenchCommand:
    def test_bench_smoke_with_csv(self, runner, tmp_path):
        out = tmp_path / "results.csv"
        result = runner.invoke(main, [
            "bench", "--tasks", "2", "--hops", "0", "--seed", "1",
            "--variants", "full,no_expand", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "variant,accuracy,p50,p95,mean,mean_context_size"
        assert len(lines) == 3

    def test_bench_unknown_variant(self, runner):
        result = runner.invoke(main, ["bench", "--tasks", "1", "--hops", "0",
                                      "--variants", "bogus"])
        assert result.exit_code == EXIT_INVALID

    def test_bench_workload_round_trip(self, runner, tmp_path):
        saved = tmp_path / "workload.json"
        first = runner.invoke(main, [
            "bench", "--tasks", "2", "--hops", "2", "--seed", "3",
            "--variants", "full", "--save-workload", str(saved)])
        assert first.exit_code == 0, first.output
        second = runner.invoke(main, [
            "bench", "--workload", str(saved), "--variants", "full"])
        assert second.exit_code == 0
        # accuracy column identical between generated and reloaded runs
        acc = [line.split()[1] for line in first.output.splitlines()
               if line.startswith("full")]
        acc2 = [line.split()[1] for line in second.output.splitlines()
                if line.startswith("full")]
        assert acc == acc2 == ["1.000"]
