import json
import os

import pytest

from clnce.cli import main
from clnce.data import save_dataset, save_hierarchy
from clnce.datagen import make_mixture_dataset


@pytest.fixture()
def workspace(tmp_path):
    d = make_mixture_dataset(
        num_classes=3, dim=6, num_samples=90, num_attributes=4,
        class_sep=3.0, seed=0,
    )
    data_path = str(tmp_path / "data.csv")
    hier_path = str(tmp_path / "hier.tsv")
    save_dataset(d, data_path)
    save_hierarchy(d.hierarchy, hier_path)
    cfg = {
        "data": data_path,
        "hierarchy": hier_path,
        "train": {
            "epochs": 2, "batch_size": 16, "seed": 0,
            "encoder_widths": [8], "projection_widths": [4],
            "eval_epochs": 30,
        },
        "train_fraction": 0.7,
    }
    cfg_path = str(tmp_path / "run.json")
    with open(cfg_path, "w") as fh:
        json.dump(cfg, fh)
    return tmp_path, data_path, hier_path, cfg_path


class TestTrain:
    def test_train_writes_artifacts(self, workspace, capsys):
        tmp_path, _, _, cfg_path = workspace
        out = str(tmp_path / "run1")
        assert main(["train", "--config", cfg_path, "--out", out]) == 0
        for name in ("checkpoint.bin", "report.json", "loss.csv", "info_plane.csv"):
            assert os.path.exists(os.path.join(out, name)), name
        captured = capsys.readouterr()
        assert "final loss" in captured.out
        assert "linear accuracy" in captured.out

    def test_repeat_runs_are_byte_identical(self, workspace):
        tmp_path, _, _, cfg_path = workspace
        out1 = str(tmp_path / "a")
        out2 = str(tmp_path / "b")
        assert main(["train", "--config", cfg_path, "--out", out1]) == 0
        assert main(["train", "--config", cfg_path, "--out", out2]) == 0
        for name in ("checkpoint.bin", "loss.csv"):
            b1 = open(os.path.join(out1, name), "rb").read()
            b2 = open(os.path.join(out2, name), "rb").read()
            assert b1 == b2, name
        # report.json embeds its own output path, so compare everything else
        r1 = json.load(open(os.path.join(out1, "report.json")))
        r2 = json.load(open(os.path.join(out2, "report.json")))
        r1.pop("checkpoint_path")
        r2.pop("checkpoint_path")
        assert r1 == r2

    def test_seed_override_changes_run(self, workspace):
        tmp_path, _, _, cfg_path = workspace
        out1 = str(tmp_path / "s0")
        out2 = str(tmp_path / "s7")
        main(["train", "--config", cfg_path, "--out", out1])
        main(["train", "--config", cfg_path, "--out", out2, "--seed", "7"])
        b1 = open(os.path.join(out1, "checkpoint.bin"), "rb").read()
        b2 = open(os.path.join(out2, "checkpoint.bin"), "rb").read()
        assert b1 != b2

    def test_unknown_config_key_exits_2(self, workspace, capsys):
        tmp_path, data_path, _, _ = workspace
        bad = {"data": data_path, "train": {}, "extra": 1}
        bad_path = str(tmp_path / "bad.json")
        with open(bad_path, "w") as fh:
            json.dump(bad, fh)
        assert main(["train", "--config", bad_path, "--out", str(tmp_path / "x")]) == 2
        assert "error [ParameterError]" in capsys.readouterr().err

    def test_missing_data_file_exits_3(self, workspace, tmp_path):
        cfg = {"data": str(tmp_path / "nope.csv"), "train": {}}
        cfg_path = str(tmp_path / "missing.json")
        with open(cfg_path, "w") as fh:
            json.dump(cfg, fh)
        assert main(["train", "--config", cfg_path, "--out", str(tmp_path / "x")]) == 3


class TestEval:
    def test_eval_checkpoint(self, workspace, capsys):
        tmp_path, data_path, _, cfg_path = workspace
        out = str(tmp_path / "run")
        main(["train", "--config", cfg_path, "--out", out])
        capsys.readouterr()
        rc = main([
            "eval",
            "--checkpoint", os.path.join(out, "checkpoint.bin"),
            "--train-data", data_path,
            "--eval-data", data_path,
            "--epochs", "30",
        ])
        assert rc == 0
        assert "linear accuracy" in capsys.readouterr().out


class TestInfoplane:
    def test_sweep(self, workspace, capsys):
        tmp_path, _, _, cfg_path = workspace
        specs = [{"source": "labels"}, {"source": "instance_id"}]
        specs_path = str(tmp_path / "specs.json")
        with open(specs_path, "w") as fh:
            json.dump(specs, fh)
        out = str(tmp_path / "sweep")
        rc = main(["infoplane", "--config", cfg_path, "--configs", specs_path, "--out", out])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "info_plane.csv"))
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert all("score=" in ln for ln in lines)


class TestVerifyBounds:
    def test_all_chains_hold(self, capsys):
        rc = main(["verify-bounds", "--models", "10", "--seed", "3", "--n", "2"])
        assert rc == 0
        assert "all chains hold" in capsys.readouterr().out


class TestMakeClusters:
    def test_kmeans_export(self, workspace, capsys):
        tmp_path, data_path, _, _ = workspace
        out = str(tmp_path / "clusters.csv")
        rc = main([
            "make-clusters", "--data", data_path, "--source", "kmeans",
            "--K", "5", "--out", out,
        ])
        assert rc == 0
        assert os.path.exists(out)
        assert os.path.exists(out + ".json")
        assert "5 clusters" in capsys.readouterr().out

    def test_hierarchy_source(self, workspace):
        tmp_path, data_path, hier_path, _ = workspace
        out = str(tmp_path / "hclusters.csv")
        rc = main([
            "make-clusters", "--data", data_path, "--hierarchy", hier_path,
            "--source", "hierarchy", "--level", "2", "--out", out,
        ])
        assert rc == 0

    def test_bad_k_exits_nonzero(self, workspace, capsys):
        tmp_path, data_path, _, _ = workspace
        rc = main([
            "make-clusters", "--data", data_path, "--source", "attributes",
            "--k", "0", "--out", str(tmp_path / "c.csv"),
        ])
        assert rc == 2
        assert "error [" in capsys.readouterr().err


class TestMakeData:
    def test_blobs_round_trip(self, tmp_path, capsys):
        out = str(tmp_path / "gen")
        rc = main(["make-data", "--preset", "blobs", "--seed", "1", "--out", out])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "blobs.csv"))
        assert "wrote 400 samples" in capsys.readouterr().out
