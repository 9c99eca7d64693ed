"""CLI wiring: dataset generation, training artifacts, report determinism."""

import json
from pathlib import Path

import pytest

import presslab.cli as cli_mod
from presslab.cli import main
from presslab.nn import REDUCED_CONFIG, HardnessModel
from presslab.training import TrainConfig, load_checkpoint, save_checkpoint


def manifest_rows(path):
    return (Path(path) / "manifest.jsonl").read_text().splitlines()


class TestGenData:
    def test_pretrain_profile_writes_n_clips(self, tmp_path, capsys):
        out = tmp_path / "pre"
        assert main(["--seed", "4", "gen-data", "--profile", "pretrain", "--n", "3", "--out", str(out)]) == 0
        assert len(manifest_rows(out)) == 3
        assert "wrote 3 clips" in capsys.readouterr().out

    def test_eval_profile_defaults_to_100(self, tmp_path):
        out = tmp_path / "ev"
        assert main(["gen-data", "--profile", "eval", "--n", "2", "--out", str(out)]) == 0
        rows = [json.loads(r) for r in manifest_rows(out)]
        assert len(rows) == 2
        assert all(60.0 <= r["hardness"] <= 90.0 for r in rows)

    def test_same_seed_same_manifest(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["--seed", "9", "gen-data", "--profile", "pretrain", "--n", "2", "--out", str(a)])
        main(["--seed", "9", "gen-data", "--profile", "pretrain", "--n", "2", "--out", str(b)])
        assert manifest_rows(a) == manifest_rows(b)


class TestTrain:
    def test_writes_checkpoint_history_metrics(self, tmp_path):
        data = tmp_path / "pre"
        main(["--seed", "4", "gen-data", "--profile", "pretrain", "--n", "6", "--out", str(data)])
        cfg = tmp_path / "cfg.json"
        cfg.write_text(
            json.dumps(
                {
                    "pretrain_epochs": 2,
                    "finetune_epochs": 0,
                    "batch_size": 3,
                    "val_fraction": 0.34,
                    "conv_channels": [8, 16],
                    "lstm_hidden": 8,
                    "head_hidden": 16,
                }
            )
        )
        out = tmp_path / "run"
        code = main(
            ["--config", str(cfg), "train", "--data-pretrain", str(data), "--out", str(out)]
        )
        assert code == 0
        model, meta = load_checkpoint(out / "checkpoint.json")
        assert meta["t"] == 2
        assert model.config.lstm_hidden == 8
        history = (out / "history.csv").read_text().splitlines()
        assert len(history) == 3  # header + 2 epochs
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["pretrain"] is not None and metrics["finetune"] is None

    def test_requires_some_dataset(self, tmp_path, capsys):
        code = main(["train", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestReports:
    @pytest.fixture()
    def checkpoint(self, tmp_path):
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, HardnessModel(REDUCED_CONFIG, seed=0), TrainConfig(seed=0))
        return path

    def test_run_scenarios_fixed_seed_is_byte_identical(self, tmp_path, checkpoint):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        argv = [
            "--seed", "42",
            "run-scenarios", "--scenario", "1", "--runs", "1",
            "--checkpoint", str(checkpoint), "--out",
        ]
        assert main(argv + [str(a)]) == 0
        assert main(argv + [str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        report = json.loads(a.read_text())
        assert set(report) == {"1"}
        assert len(report["1"]["runs"]) == 1

    def test_eval_servoing_writes_both_profiles(self, tmp_path):
        out = tmp_path / "servo.json"
        code = main(["--seed", "1", "eval-servoing", "--scenes", "4", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert set(report["profiles"]) == {"yolo-like", "gsam-like"}

    def test_eval_tactile_plumbs_checkpoint_to_report(self, tmp_path, checkpoint, monkeypatch):
        seen = {}

        def fake_ranking(model, t, seed=0, alpha=0.01):
            seen["t"] = t
            seen["seed"] = seed
            return {"stub": True}

        monkeypatch.setattr(cli_mod, "evaluate_ranking", fake_ranking)
        out = tmp_path / "rank.json"
        code = main(
            ["--seed", "6", "eval-tactile", "--checkpoint", str(checkpoint), "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text()) == {"stub": True}
        assert seen == {"t": 2, "seed": 6}


class TestErrors:
    def test_unknown_command_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])

    def test_missing_required_flag_exits_nonzero(self):
        with pytest.raises(SystemExit):
            main(["gen-data", "--profile", "pretrain"])

    def test_bad_checkpoint_is_a_clean_error(self, tmp_path, capsys):
        bogus = tmp_path / "nope.json"
        bogus.write_text("{}")
        code = main(
            ["run-scenarios", "--checkpoint", str(bogus), "--out", str(tmp_path / "r.json")]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err
