import json

import numpy as np
import pytest

from ordinal_atd.cli import main
from ordinal_atd.persistence import load_model

from conftest import uci_data_dir


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


SYNTH = ["--synthetic", "--samples-per-class", "20", "--epochs", "3", "--embedding-dim", "8", "--quiet"]


class TestTemplates:
    def test_five_categories(self, capsys):
        code, out, _ = run(capsys, "templates", "--categories", "5")
        lines = out.strip().splitlines()
        assert code == 0
        assert len(lines) == 1 + 9
        assert "0,2,4,0.5,0.5,1/2,1/2,boundary" in lines

    def test_two_categories(self, capsys):
        code, _, err = run(capsys, "templates", "--categories", "2")
        assert code != 0 and err.startswith("error[data]")


class TestVerifyMetric:
    def test_planar(self, capsys, tmp_path):
        code, out, _ = run(capsys, "verify-metric", "--dim", "2", "--samples", "10000", "--seed", "1",
                           "--out", str(tmp_path))
        assert code == 0
        assert "all_passed=true" in out
        assert (tmp_path / "axioms.txt").read_text() == out

    def test_impossible_tolerance_fails(self, capsys):
        code, _, err = run(capsys, "verify-metric", "--samples", "10", "--tol", "-1")
        assert code == 1 and err.startswith("error[axiom]")


class TestUsage:
    def test_no_arguments(self, capsys):
        code, _, err = run(capsys)
        assert code != 0 and "usage" in err

    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, "fly")
        assert code != 0 and "error[usage]" in err

    def test_bad_flag(self, capsys):
        code, _, err = run(capsys, "train", "--epochs", "many")
        assert code != 0 and "error[usage]" in err


class TestTrainEval:
    def test_train_eval_matrix(self, capsys, tmp_path):
        out_dir = tmp_path / "run"
        code, _, _ = run(capsys, "train", *SYNTH, "--out", str(out_dir))
        assert code == 0
        model = out_dir / "model.json"
        history = (out_dir / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,loss,val_accuracy,selected" and len(history) == 4

        code, out, _ = run(capsys, "eval", "--model", str(model), "--k-list", "1,3", "--out", str(out_dir))
        assert code == 0
        metrics = (out_dir / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "k,knn_accuracy,classification_error" and len(metrics) == 3
        assert "classification_error.k3=" in (out_dir / "metrics.txt").read_text()

        code, out, _ = run(capsys, "matrix", "--model", str(model), "--out", str(out_dir))
        assert code == 0
        assert (out_dir / "matrix.csv").read_text().startswith("rank,0,1,2,3\n")
        assert "monotonicity=" in (out_dir / "matrix.txt").read_text()

    def test_progress_lines(self, capsys, tmp_path):
        args = [a for a in SYNTH if a != "--quiet"]
        code, _, err = run(capsys, "train", *args, "--out", str(tmp_path))
        assert code == 0
        assert [l.split()[:2] for l in err.strip().splitlines()] == [["epoch", "0"], ["epoch", "1"], ["epoch", "2"]]

    def test_config_file_and_flag_precedence(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 2, "lr": 0.01, "embedding_dim": 6, "synthetic": {"samples_per_class": 15}}))
        code, _, _ = run(capsys, "train", "--config", str(cfg), "--lr", "0.002", "--quiet", "--out", str(tmp_path))
        assert code == 0
        art = load_model(tmp_path / "model.json")
        assert art.config["train"]["epochs"] == 2
        assert art.config["train"]["learning_rate"] == 0.002
        assert art.config["synthetic"]["samples_per_class"] == 15
        assert art.params.embedding_dim == 6

    def test_output_dir_from_environment(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("ATD_OUTPUT_DIR", str(tmp_path / "env"))
        code, _, _ = run(capsys, "train", *SYNTH)
        assert code == 0 and (tmp_path / "env" / "model.json").exists()

    def test_deterministic_metrics(self, capsys, tmp_path):
        texts = []
        for name in ("a", "b"):
            d = tmp_path / name
            assert run(capsys, "train", *SYNTH, "--seed", "4", "--out", str(d))[0] == 0
            assert run(capsys, "eval", "--model", str(d / "model.json"), "--out", str(d))[0] == 0
            texts.append(((d / "metrics.csv").read_bytes(), (d / "history.csv").read_bytes()))
        assert texts[0] == texts[1]

    def test_uci_file(self, capsys, tmp_path):
        data = uci_data_dir() / "balance-scale.data"
        if not data.exists():
            pytest.skip("balance-scale.data not present")
        code, _, _ = run(capsys, "train", "--data", str(data), "--schema", "balance-scale", "--epochs", "1",
                         "--quiet", "--out", str(tmp_path))
        assert code == 0
        assert load_model(tmp_path / "model.json").n_categories == 3


class TestErrors:
    def test_missing_data_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "--data", str(tmp_path / "nope.csv"), "--schema", "car")
        assert code == 1 and err.startswith("error[config]: data")

    def test_missing_schema(self, capsys, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("a\n")
        code, _, err = run(capsys, "train", "--data", str(f))
        assert code == 1 and err.startswith("error[config]: schema")

    def test_bad_training_value(self, capsys):
        code, _, err = run(capsys, "train", "--synthetic", "--epochs", "-2")
        assert code == 1 and err.startswith("error[config]")

    def test_bad_config_json(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text("{not json")
        code, _, err = run(capsys, "train", "--config", str(cfg))
        assert code == 1 and err.startswith("error[config]: config")

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"synthetic": True, "train": {"momentum": 0.9}}))
        code, _, err = run(capsys, "train", "--config", str(cfg))
        assert code == 1 and "momentum" in err

    def test_bad_data_value(self, capsys, tmp_path):
        f = tmp_path / "bad.data"
        f.write_text("vhigh,vhigh,2,2,small,low,unacc\nvhigh,purple,2,2,small,low,unacc\n")
        code, _, err = run(capsys, "train", "--data", str(f), "--schema", "car")
        assert code == 1 and err.startswith("error[data]") and "row 2" in err

    def test_corrupt_model(self, capsys, tmp_path):
        m = tmp_path / "m.json"
        m.write_text('{"format": "ordinal-atd-model", "version": 1, "payload": {}, "checksum": "0"}')
        code, _, err = run(capsys, "eval", "--model", str(m))
        assert code == 1 and err.startswith("error[model-corrupt]")

    def test_zero_k(self, capsys, tmp_path):
        assert run(capsys, "train", *SYNTH, "--out", str(tmp_path))[0] == 0
        code, _, err = run(capsys, "eval", "--model", str(tmp_path / "model.json"), "--k-list", "0")
        assert code == 1 and "k_list" in err
