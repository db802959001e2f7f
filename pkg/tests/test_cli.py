"""CLI behavior: determinism, help text, config precedence, exit codes."""

import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from ragnoise.cli import cli
from ragnoise.tables import _data_path


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path, runner):
    """A synth world on disk plus a corrupted dataset."""
    result = runner.invoke(cli, ["synth", "--out-dir", str(tmp_path), "--seed", "11"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli, [
        "corrupt", "--in", str(tmp_path / "queries.jsonl"),
        "--out", str(tmp_path / "corrupted.jsonl"), "--rate", "0.2", "--seed", "23",
    ])
    assert result.exit_code == 0, result.output
    return tmp_path


class TestCorrupt:
    def test_twice_is_byte_identical(self, runner, tmp_path):
        toy = str(_data_path("toy_queries.jsonl"))
        args = lambda out: ["corrupt", "--in", toy, "--out", out,
                            "--rate", "0.2", "--seed", "7", "--name", "toy"]
        assert runner.invoke(cli, args(str(tmp_path / "a.jsonl"))).exit_code == 0
        assert runner.invoke(cli, args(str(tmp_path / "b.jsonl"))).exit_code == 0
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "a.jsonl.manifest.json").read_bytes() == \
            (tmp_path / "b.jsonl.manifest.json").read_bytes()

    def test_counts_echoed(self, runner, tmp_path):
        toy = str(_data_path("toy_queries.jsonl"))
        result = runner.invoke(cli, ["corrupt", "--in", toy,
                                     "--out", str(tmp_path / "c.jsonl"),
                                     "--rate", "0.2", "--seed", "7"])
        counts = json.loads(result.output)
        assert counts["corrupted"] == 20
        assert counts["per_error_type"] == {"spelling": 12, "keyboard": 4, "visual": 4}


class TestStats:
    def test_human_and_json(self, runner, workdir):
        human = runner.invoke(cli, ["stats", "--in", str(workdir / "queries.jsonl")])
        assert "avg words/query" in human.output
        machine = runner.invoke(cli, ["stats", "--in", str(workdir / "queries.jsonl"),
                                      "--as-json"])
        data = json.loads(machine.output)
        assert data["n_queries"] == 100


class TestRunEvalReport:
    def test_standard_run_artifacts(self, runner, workdir):
        out_dir = workdir / "run-std"
        result = runner.invoke(cli, [
            "run", "--dataset", str(workdir / "corrupted.jsonl"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--out-dir", str(out_dir), "--method", "standard",
        ])
        assert result.exit_code == 0, result.output
        assert (out_dir / "records.jsonl").exists()
        assert (out_dir / "report.json").exists()
        assert (out_dir / "config.json").exists()
        summary = json.loads(result.output)
        assert 0.0 <= summary["overall_f1"] <= 1.0

    def test_eval_matches_report(self, runner, workdir):
        out_dir = workdir / "run-eval"
        runner.invoke(cli, [
            "run", "--dataset", str(workdir / "corrupted.jsonl"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--out-dir", str(out_dir), "--method", "standard",
        ])
        result = runner.invoke(cli, ["eval", "--records", str(out_dir / "records.jsonl"),
                                     "--dataset", str(workdir / "corrupted.jsonl")])
        recomputed = json.loads(result.output)
        stored = json.loads((out_dir / "report.json").read_text())["aggregates"]
        assert recomputed["overall"]["f1"] == stored["overall"]["f1"]

    def test_report_merges_runs(self, runner, workdir):
        for method in ("standard", "raqcg"):
            runner.invoke(cli, [
                "run", "--dataset", str(workdir / "corrupted.jsonl"),
                "--corpus", str(workdir / "corpus.jsonl"),
                "--out-dir", str(workdir / f"run-{method}"), "--method", method,
            ])
        result = runner.invoke(cli, [
            "report", str(workdir / "run-standard" / "report.json"),
            str(workdir / "run-raqcg" / "report.json"),
        ])
        assert result.exit_code == 0
        assert "run-standard,corrupted" in result.output
        assert "run-raqcg,corrupted" in result.output

    def test_quadrant_run(self, runner, workdir):
        result = runner.invoke(cli, [
            "run", "--dataset", str(workdir / "corrupted.jsonl"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--out-dir", str(workdir / "quad"), "--method", "quadrant",
        ])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert set(summary) == {"QE-DE", "QE-DC", "QC-DE", "QC-DC"}
        assert (workdir / "quad" / "qc-dc" / "report.json").exists()


class TestSweep:
    def test_table_rows(self, runner, workdir):
        result = runner.invoke(cli, [
            "sweep-k", "--dataset", str(workdir / "corrupted.jsonl"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--out-dir", str(workdir / "sweep"), "--ks", "1,3",
            "--methods", "standard,raqcg",
        ])
        assert result.exit_code == 0, result.output
        rows = json.loads((workdir / "sweep" / "sweep.json").read_text())
        assert [r["k"] for r in rows] == [1, 3]
        assert all("standard" in r and "raqcg" in r for r in rows)

    def test_default_ks_include_paper_sweep(self, runner):
        result = runner.invoke(cli, ["sweep-k", "--help"])
        assert "1,3,5,15" in result.output


class TestIndexAndRetriever:
    def test_index_build_and_dense_cycle(self, runner, workdir):
        result = runner.invoke(cli, ["index", "build",
                                     "--corpus", str(workdir / "corpus.jsonl"),
                                     "--out", str(workdir / "bm25.idx")])
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli, [
            "retriever", "train",
            "--corpus", str(workdir / "corpus.jsonl"),
            "--dataset", str(workdir / "queries.jsonl"),
            "--positives", str(workdir / "positives.json"),
            "--out", str(workdir / "dense.model"),
            "--dim", "16", "--buckets", "4096", "--epochs", "1",
            "--batch-size", "16", "--lr", "0.5",
        ])
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli, [
            "retriever", "eval",
            "--corpus", str(workdir / "corpus.jsonl"),
            "--dataset", str(workdir / "queries.jsonl"),
            "--positives", str(workdir / "positives.json"),
            "--model", str(workdir / "dense.model"), "--recall-at", "3",
        ])
        assert result.exit_code == 0, result.output
        metrics = json.loads(result.output)
        assert 0.0 <= metrics["overall"] <= 1.0


class TestCorrect:
    def test_writes_corrected_dataset(self, runner, workdir):
        result = runner.invoke(cli, [
            "correct", "--in", str(workdir / "corrupted.jsonl"),
            "--corpus", str(workdir / "corpus.jsonl"),
            "--out", str(workdir / "fixed.jsonl"), "--k", "3",
        ])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.output)
        assert summary["queries"] == 100
        assert summary["changed"] > 0


HELP_EXPECTATIONS = {
    ("corrupt",): ["--rate", "--seed", "--word-select-prob", "--weights", "0.2", "3,1,1"],
    ("stats",): ["--in", "--as-json"],
    ("synth",): ["--out-dir", "--groups", "--distractors"],
    ("index", "build"): ["--k1", "--b", "1.2", "0.75"],
    ("retriever", "train"): ["--lr", "--batch-size", "--epochs", "2e-05", "64"],
    ("retriever", "eval"): ["--recall-at", "3"],
    ("correct",): ["--retriever", "--k", "--external"],
    ("run",): ["--method", "--corrector", "--generator", "--max-input-units", "4096"],
    ("eval",): ["--records", "--dataset"],
    ("report",): ["--out"],
    ("sweep-k",): ["--ks", "--methods", "1,3,5,15"],
}


@pytest.mark.parametrize("command", sorted(HELP_EXPECTATIONS), ids="/".join)
def test_help_lists_flags_with_defaults(runner, command):
    result = runner.invoke(cli, [*command, "--help"])
    assert result.exit_code == 0
    for expected in HELP_EXPECTATIONS[command]:
        assert expected in result.output, f"{command}: missing {expected}"


class TestConfigPrecedence:
    def test_file_overrides_defaults_flags_override_file(self, runner, tmp_path):
        toy = str(_data_path("toy_queries.jsonl"))
        config = tmp_path / "conf.yaml"
        config.write_text("rate: 0.4\nseed: 7\n")
        result = runner.invoke(cli, ["--config", str(config), "corrupt", "--in", toy,
                                     "--out", str(tmp_path / "a.jsonl")])
        assert json.loads(result.output)["corrupted"] == 40  # file beat the 0.2 default
        result = runner.invoke(cli, ["--config", str(config), "corrupt", "--in", toy,
                                     "--out", str(tmp_path / "b.jsonl"), "--rate", "0.1"])
        assert json.loads(result.output)["corrupted"] == 10  # flag beat the file

    def test_env_overrides_file(self, runner, tmp_path, monkeypatch):
        toy = str(_data_path("toy_queries.jsonl"))
        config = tmp_path / "conf.yaml"
        config.write_text("rate: 0.4\nseed: 7\n")
        monkeypatch.setenv("RAGNOISE_CORRUPT_RATE", "0.3")
        result = runner.invoke(cli, ["--config", str(config), "corrupt", "--in", toy,
                                     "--out", str(tmp_path / "c.jsonl")], auto_envvar_prefix="RAGNOISE")
        assert json.loads(result.output)["corrupted"] == 30


class TestExitCodes:
    def _main(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "ragnoise.cli", *args],
            capture_output=True, text=True,
        )

    def test_success_is_zero(self, tmp_path):
        proc = self._main("synth", "--out-dir", str(tmp_path), "--queries", "5",
                          "--groups", "2", "--distractors", "1")
        assert proc.returncode == 0

    def test_validation_error_is_one_with_json_record(self, tmp_path):
        missing = str(tmp_path / "nope.jsonl")
        proc = self._main("stats", "--in", missing)
        assert proc.returncode == 1
        record = json.loads(proc.stderr.strip().splitlines()[-1])
        assert "error" in record and "message" in record

    def test_domain_validation_error_is_one(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "question": "q"}\n')
        proc = self._main("stats", "--in", str(bad))
        assert proc.returncode == 1
        record = json.loads(proc.stderr.strip().splitlines()[-1])
        assert record["error"] == "SchemaError"
