"""Config ingestion, results persistence, and the command-line surface."""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from logfit.cli import cli
from logfit.harness import TrialRecord, example2_config, run_trial
from logfit.runio import (
    ConfigError,
    config_digest,
    config_from_doc,
    default_config_doc,
    emit_results,
    load_config,
    resolve_config_doc,
    write_histogram_csv,
)


class TestLoadConfig:
    def test_empty_doc_gets_desk_defaults(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{}")
        cfg = load_config(path)
        assert cfg.icfg.dt == 1e-4
        assert cfg.sched.T1 == 3.0
        assert cfg.epochs == 2000 and cfg.trials == 20

    def test_partial_integrator_section_defaults_dt(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"integrator": {"method": "euler"}}))
        assert load_config(path).icfg.dt == 1e-4

    def test_rejects_unreachable_reset(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"schedule": {"l0": 5.0}}))  # D=10, dT2=1
        with pytest.raises(ConfigError, match="l0"):
            load_config(path)

    def test_rejects_misaligned_grid(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"integrator": {"dt": 7e-4}}))
        with pytest.raises(ConfigError, match="misalignment"):
            load_config(path)

    def test_rejects_unknown_field(self):
        with pytest.raises(ConfigError, match="unknown field"):
            resolve_config_doc({"experiment": {"momentum": 0.9}})

    def test_rejects_nonpositive_epochs(self):
        with pytest.raises(ConfigError, match="epochs"):
            config_from_doc({"experiment": {"epochs": 0}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(tmp_path / "nope.json")

    def test_infinite_norm_bound_spelled_out(self):
        cfg, _ = config_from_doc(
            {"schedule": {"D": "inf", "T": 9.0, "l0": 1.0},
             "integrator": {"dt": 1e-3}}
        )
        assert math.isinf(cfg.sched.D)


class TestDigest:
    def test_key_order_does_not_matter(self):
        a = {"schedule": {"T": 2.0, "dT2": 1.0}, "experiment": {"seed": 7}}
        b = {"experiment": {"seed": 7}, "schedule": {"dT2": 1.0, "T": 2.0}}
        assert config_digest(resolve_config_doc(a)) == config_digest(resolve_config_doc(b))

    def test_distinct_configs_get_distinct_digests(self):
        docs = [
            {},
            {"experiment": {"seed": 8}},
            {"experiment": {"trials": 21}},
            {"adaptation": {"gamma": 0.002}},
            {"schedule": {"l0": 11.0}},
            {"integrator": {"dt": 5e-5}},
        ]
        digests = {config_digest(resolve_config_doc(d)) for d in docs}
        assert len(digests) == len(docs)

    def test_explicit_default_equals_omitted(self):
        assert config_digest(resolve_config_doc({})) == config_digest(
            resolve_config_doc({"integrator": {"dt": 0.0001}})
        )


def _records():
    return [
        TrialRecord(trial=0, seed=111, d0=3.5, d_final=1.25, R0=0.5, R_final=0.125),
        TrialRecord(trial=1, seed=222, d0=4.0, d_final=math.nan, R0=0.25, R_final=math.nan,
                    status="diverged"),
    ]


class TestEmitResults:
    def test_empty_batch_writes_header_and_manifest(self, tmp_path):
        manifest = emit_results([], tmp_path, config_digest="abc")
        text = (tmp_path / "trials.csv").read_text()
        assert text.strip() == "trial,seed,d0,d_final,R0,R_final,status"
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["config_digest"] == "abc"
        assert doc["outputs"] == ["trials.csv"]
        assert manifest.artifact_version

    def test_round_trip_values(self, tmp_path):
        emit_results(_records(), tmp_path)
        with (tmp_path / "trials.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["d_final"]) == 1.25
        assert rows[0]["status"] == "ok"
        assert math.isnan(float(rows[1]["R_final"]))
        assert rows[1]["status"] == "diverged"

    def test_reruns_are_byte_identical(self, tmp_path):
        emit_results(_records(), tmp_path / "a")
        emit_results(_records(), tmp_path / "b")
        assert (tmp_path / "a/trials.csv").read_bytes() == (tmp_path / "b/trials.csv").read_bytes()

    def test_trace_csv_columns(self, tmp_path):
        cfg = example2_config("desk", trials=1, epochs=2, record_stride=5000)
        rec = run_trial(cfg, 0)
        emit_results([rec], tmp_path)
        with (tmp_path / "trial_0_trace.csv").open() as fh:
            header = fh.readline().strip().split(",")
        n = cfg.sys.n
        assert header[:5] == ["t", "e", "lambda", "d", "R"]
        assert header[5:5 + n] == [f"alpha_hat_{i+1}" for i in range(n)]
        assert header[5 + n:] == [f"K_{i+1}" for i in range(n)]

    def test_histogram_csv(self, tmp_path):
        write_histogram_csv([1.0, 2.0, 3.0], [0.5, 0.7, 0.2], tmp_path / "h.csv", bins=4)
        with (tmp_path / "h.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert sum(int(r["count_start"]) for r in rows) == 3
        assert sum(int(r["count_end"]) for r in rows) == 3


class TestCli:
    def test_convert_round_trip(self, monkeypatch, capsys):
        doc = {"kind": "sigmoid_sum", "a": [2 / 3], "b": [-2.944], "c": [2.0]}
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
        assert cli(["convert"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["kind"] == "logistic_ensemble"
        assert out["alpha"][0] == pytest.approx(2 / 3)
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(out)))
        assert cli(["convert"]) == 0
        back = json.loads(capsys.readouterr().out)
        assert back["kind"] == "sigmoid_sum"
        assert back["a"][0] == pytest.approx(2 / 3)
        assert back["b"][0] == pytest.approx(-2.944)
        assert back["c"][0] == pytest.approx(2.0)

    def test_convert_rejects_unknown_kind(self, monkeypatch, capsys):
        monkeypatch.setattr("sys.stdin", io.StringIO('{"kind": "spline"}'))
        assert cli(["convert"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_exits_one(self, capsys):
        assert cli(["example2", "--turbo"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_command_exits_one(self, capsys):
        assert cli([]) == 1

    def test_simulate_autonomous(self, monkeypatch, capsys):
        doc = {"alpha": [1.0], "beta": [1.0], "c_out": [1.0], "x0": [0.5]}
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
        assert cli(["simulate", "--system", "autonomous", "--t-end", "1.0", "--dt", "0.01"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "t,x_1,y"
        assert len(lines) == 102

    def test_simulate_feedback(self, monkeypatch, capsys):
        doc = {"alpha": [0.5], "beta": [1.0], "c_out": [1.0], "x0": [0.2]}
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
        assert cli(["simulate", "--system", "feedback", "--t-end", "1.0", "--dt", "0.01"]) == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header == "t,x_1,y,z"

    def test_simulate_multiinput(self, monkeypatch, capsys):
        doc = {
            "alpha": [[1.0]], "beta": [[1.0]], "c_out": [1.0], "x0": [0.3],
            "inputs": [{"type": "constant", "value": 2.0}],
        }
        monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps(doc)))
        assert cli(["simulate", "--system", "multiinput", "--t-end", "1.0", "--dt", "0.01"]) == 0
        assert capsys.readouterr().out.startswith("t,x_1,y")

    def test_example2_tiny_run_writes_outputs(self, tmp_path):
        code = cli([
            "example2", "--scale", "desk", "--trials", "2", "--epochs", "2",
            "--seed", "7", "--out", str(tmp_path), "--quiet",
        ])
        assert code == 0
        with (tmp_path / "trials.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert (tmp_path / "d_hist.csv").exists()
        assert (tmp_path / "R_hist.csv").exists()
        assert (tmp_path / "manifest.json").exists()

    def test_example1_writes_summary(self, tmp_path):
        code = cli([
            "example1", "--variant", "batch", "--init", "1.0,1.0",
            "--t-end", "5.0", "--out", str(tmp_path), "--quiet",
        ])
        assert code == 0
        summary = json.loads((tmp_path / "example1_batch_summary.json").read_text())
        assert summary["variant"] == "batch"
        assert (tmp_path / "example1_batch.csv").exists()

    def test_example1_bad_init_exits_one(self, capsys):
        assert cli(["example1", "--init", "1.0"]) == 1

    def test_fit_runs_config(self, tmp_path):
        cfg = {"experiment": {"trials": 1, "epochs": 2, "seed": 3}}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        assert cli(["fit", "--config", str(path), "--out", str(out), "--quiet"]) == 0
        with (out / "trials.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1 and rows[0]["status"] == "ok"

    def test_fit_divergence_exits_two(self, tmp_path):
        cfg = {
            "system": {"alpha": [3.0], "beta": [-0.5], "c_out": [1.0], "x0": [0.5]},
            "schedule": {"T": 1.0, "dT2": 0.5, "D": "inf", "l0": 1.0},
            "adaptation": {"adapt_quad": True, "gamma": 0.001, "delta": 0.0001,
                            "delta1": 0.001, "c_weighted_alpha": True,
                            "adapt_gain": True, "gain_init": 0.0},
            "integrator": {"dt": 0.001, "method": "euler"},
            "experiment": {"trials": 1, "epochs": 1, "seed": 1,
                            "init_box": [[2.9, 3.1]], "record_stride": 0},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli(["fit", "--config", str(path), "--out", str(tmp_path / "o"), "--quiet"]) == 2

    def test_fit_without_config_exits_one(self, capsys):
        assert cli(["fit"]) == 1

    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LOGFIT_OUT", str(tmp_path / "envout"))
        code = cli(["example1", "--variant", "batch", "--init", "1,1",
                    "--t-end", "2.0", "--quiet"])
        assert code == 0
        assert (tmp_path / "envout" / "example1_batch_summary.json").exists()


def test_default_doc_matches_module_defaults():
    doc = default_config_doc()
    cfg, _ = config_from_doc({})
    assert doc["adaptation"]["gamma"] == cfg.acfg.gamma
    assert doc["experiment"]["trials"] == cfg.trials
    assert np.all(np.asarray(doc["system"]["x0"]) == cfg.sys.x0)
