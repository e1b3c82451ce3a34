import json
from pathlib import Path

import pytest

from signpose.cli import main, parse_args

SUBCOMMANDS = ["synth", "ingest", "downsample", "train", "eval", "ablate", "stats"]


class TestParseArgs:
    def test_downsample_defaults_k_100(self):
        args = parse_args(["downsample", "--manifest", "m.csv", "--out", "d.csv"])
        assert args.command == "downsample"
        assert args.k == 100

    def test_train_requires_manifest(self, capsys):
        with pytest.raises(SystemExit) as e:
            parse_args(["train", "--out", "x"])
        assert e.value.code == 2
        assert "--manifest" in capsys.readouterr().err

    def test_synth_command(self):
        args = parse_args(["synth", "--classes", "10", "--out", "dir"])
        assert args.command == "synth"
        assert args.classes == 10

    def test_unknown_flag_rejected(self):
        with pytest.raises(SystemExit) as e:
            parse_args(["stats", "--manifest", "m.csv", "--bogus"])
        assert e.value.code == 2

    def test_unknown_subcommand_rejected(self):
        with pytest.raises(SystemExit) as e:
            parse_args(["transmogrify"])
        assert e.value.code == 2

    @pytest.mark.parametrize("cmd", SUBCOMMANDS)
    def test_help_exits_zero_and_lists_flags(self, cmd, capsys):
        with pytest.raises(SystemExit) as e:
            parse_args([cmd, "--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        assert "--" in out


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-ds")
    code = main([
        "synth", "--classes", "3", "--train-per-class", "6", "--val-per-class", "2",
        "--frames", "10", "--out", str(out), "--seed", "7",
    ])
    assert code == 0
    return out


class TestEndToEnd:
    def test_synth_wrote_dataset(self, synth_dir):
        assert (synth_dir / "manifest.csv").exists()
        assert len(list((synth_dir / "keypoints").glob("*.pose.json"))) == 24

    def test_train_eval_roundtrip(self, synth_dir, tmp_path, capsys):
        run_dir = tmp_path / "run"
        code = main([
            "train", "--manifest", str(synth_dir / "manifest.csv"), "--out", str(run_dir),
            "--epochs", "2", "--batch-size", "8", "--seq-len", "8",
            "--embed-dim", "8", "--hidden-dim", "8", "--seed", "3",
        ])
        assert code == 0
        assert (run_dir / "best.ckpt.json").exists()
        assert (run_dir / "metrics.jsonl").exists()
        code = main([
            "eval", "--checkpoint", str(run_dir / "best.ckpt.json"),
            "--manifest", str(synth_dir / "manifest.csv"), "--split", "val",
            "--json", str(tmp_path / "metrics.json"),
        ])
        assert code == 0
        doc = json.loads((tmp_path / "metrics.json").read_text())
        assert doc["split"] == "val"
        assert "top1" in capsys.readouterr().out

    def test_train_with_augment_and_config_file(self, synth_dir, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text(
            "epochs = 1\nbatch_size = 8\nseq_len = 8\nembed_dim = 8\nhidden_dim = 8\n"
            "augment = true\naugment.jitter_sigma = 0.005\naugment.seed = 2\n"
        )
        run_dir = tmp_path / "run"
        code = main([
            "train", "--manifest", str(synth_dir / "manifest.csv"),
            "--out", str(run_dir), "--config", str(config), "--epochs", "2",
        ])
        assert code == 0
        # The flag must beat the config file: two epochs of metrics lines, not one.
        lines = (run_dir / "metrics.jsonl").read_text().strip().splitlines()
        epochs = {json.loads(l)["epoch"] for l in lines}
        assert epochs == {0, 1}

    def test_eval_missing_checkpoint_exit_1(self, synth_dir, capsys, tmp_path):
        code = main([
            "eval", "--checkpoint", str(tmp_path / "absent.ckpt.json"),
            "--manifest", str(synth_dir / "manifest.csv"),
        ])
        assert code == 1
        assert "absent.ckpt.json" in capsys.readouterr().err

    def test_stats_on_fixture_manifest(self, capsys, tmp_path):
        fixture = Path(__file__).parent / "fixtures" / "tiny_manifest.csv"
        code = main(["stats", "--manifest", str(fixture), "--split", "train",
                     "--json", str(tmp_path / "s.json"),
                     "--histogram", str(tmp_path / "h.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert "glosses:  3" in out
        doc = json.loads((tmp_path / "s.json").read_text())
        assert doc["n_entries"] == 6
        hist = (tmp_path / "h.csv").read_text().strip().splitlines()
        assert hist[0] == "count,glosses"

    def test_downsample_cli(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "down.csv"
        code = main([
            "downsample", "--manifest", str(synth_dir / "manifest.csv"),
            "--k", "2", "--out", str(out),
        ])
        assert code == 0
        assert out.exists()
        assert "kept 2 glosses" in capsys.readouterr().out

    def test_ingest_cli(self, synth_dir, tmp_path):
        out = tmp_path / "ingested.csv"
        code = main([
            "ingest", "--keypoints", str(synth_dir / "keypoints"),
            "--out", str(out), "--split", "train",
        ])
        assert code == 0
        text = out.read_text()
        assert text.startswith("video_id,gloss,signer_id,split,keypoint_path")
        assert len(text.strip().splitlines()) == 25

    def test_ablate_cli(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "ablation"
        code = main([
            "ablate", "--manifest", str(synth_dir / "manifest.csv"),
            "--axis", "dropout", "--values", "0,0.2", "--out", str(out),
            "--epochs", "1", "--batch-size", "8", "--seq-len", "8",
            "--embed-dim", "8", "--hidden-dim", "8",
        ])
        assert code == 0
        csv_text = (out / "report.csv").read_text()
        assert csv_text.splitlines()[0] == "dropout,top1,top5"
        assert len(csv_text.strip().splitlines()) == 3
        assert (out / "report.txt").exists()

    def test_seeded_synth_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--classes", "2", "--train-per-class", "2",
                         "--val-per-class", "1", "--frames", "6",
                         "--out", str(out), "--seed", "5"]) == 0
        for fa in sorted((a / "keypoints").glob("*.pose.json")):
            fb = b / "keypoints" / fa.name
            assert fa.read_bytes() == fb.read_bytes()

    def test_runtime_error_is_exit_1(self, tmp_path, capsys):
        code = main(["stats", "--manifest", str(tmp_path / "missing.csv")])
        assert code == 1
        assert "error" in capsys.readouterr().err
