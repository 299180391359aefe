import json

import pytest

from deepprior.cli import build_parser, resolve_config, run


@pytest.fixture
def run_config(tmp_path):
    """Small, fast settings shared by the command-line tests."""
    path = tmp_path / "run.json"
    path.write_text(json.dumps({
        "architecture": {"pca_components": 6, "robust_prior_samples": 2000, "fc_width": 32},
        "optimizer": {"epochs": 1, "batch_size": 4},
        "refiner_epochs": 1,
        "dtype": "float64",
    }))
    return str(path)


@pytest.fixture
def dataset_file(tmp_path):
    path = tmp_path / "hands.dpds"
    assert run(["generate-data", "--frames", "8", "--subjects", "2", "--seed", "3", "--out", str(path)]) == 0
    return str(path)


def epoch_lines(text):
    return [line for line in text.splitlines() if line.startswith("[epoch]")]


def test_help_exits_cleanly(capsys):
    assert run(["--help"]) == 0
    assert run(["train", "--help"]) == 0
    assert "--augment" in capsys.readouterr().out


def test_usage_errors_exit_with_one(capsys):
    assert run(["train", "--bogus"]) == 1
    assert run([]) == 1
    assert run(["train", "--data", "x.dpds", "--out", "m.dpm", "--augment", "RX"]) == 1
    # train has no default dataset
    assert run(["train", "--epochs", "0", "--out", "m.bin"]) == 1
    assert "Error" in capsys.readouterr().err


def test_invalid_config_exits_with_one(tmp_path, dataset_file):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"optimizer": {"epochs": -1}}))
    assert run(["train", "--data", dataset_file, "--out", str(tmp_path / "m.dpm"), "--config", str(bad)]) == 1
    bad.write_text(json.dumps({"optimiser": {}}))
    assert run(["train", "--data", dataset_file, "--out", str(tmp_path / "m.dpm"), "--config", str(bad)]) == 1


def test_missing_files_exit_with_two(tmp_path, dataset_file):
    missing = str(tmp_path / "missing.dpm")
    assert run(["evaluate", "--model", missing, "--data", dataset_file]) == 2
    assert run(["train", "--data", str(tmp_path / "none.dpds"), "--out", missing]) == 2


def test_generate_data_summary(tmp_path, capsys):
    out = tmp_path / "one.dpds"
    assert run(["generate-data", "--frames", "1", "--no-noise", "--out", str(out)]) == 0
    assert out.exists() and (tmp_path / "one.joints.json").exists()
    assert "Generated 1 frames" in capsys.readouterr().out


def test_train_progress_lines(tmp_path, dataset_file, run_config, capsys):
    model = tmp_path / "pose.dpm"
    assert run(["train", "--data", dataset_file, "--out", str(model), "--config", run_config,
                "--epochs", "2"]) == 0
    out = capsys.readouterr().out
    lines = epoch_lines(out)
    assert len(lines) == 2
    assert lines[0].startswith("[epoch] 1/2 loss=")
    assert "Trained resnet" in out

    assert run(["train", "--data", dataset_file, "--out", str(model), "--config", run_config, "--quiet"]) == 0
    out = capsys.readouterr().out
    assert epoch_lines(out) == []
    assert "Trained resnet" in out


def test_zero_epoch_training(tmp_path, dataset_file, run_config, capsys):
    model = tmp_path / "pose.dpm"
    assert run(["train", "--data", dataset_file, "--out", str(model), "--config", run_config,
                "--epochs", "0"]) == 0
    assert epoch_lines(capsys.readouterr().out) == []
    assert model.exists()


def test_training_is_deterministic(tmp_path, dataset_file, run_config):
    first, second = tmp_path / "a.dpm", tmp_path / "b.dpm"
    for path in (first, second):
        assert run(["train", "--data", dataset_file, "--out", str(path), "--config", run_config,
                    "--seed", "5", "--quiet"]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_prior_then_train_then_evaluate(tmp_path, dataset_file, run_config, capsys):
    prior, model = tmp_path / "prior.json", tmp_path / "pose.dpm"
    report = tmp_path / "report.csv"
    db = f"sqlite:///{tmp_path / 'runs.db'}"
    assert run(["fit-prior", "--data", dataset_file, "--out", str(prior), "--config", run_config]) == 0
    assert run(["train", "--data", dataset_file, "--prior", str(prior), "--out", str(model),
                "--config", run_config, "--quiet"]) == 0
    assert run(["evaluate", "--model", str(model), "--data", dataset_file, "--mode", "ground_truth",
                "--out", str(report), "--db", db]) == 0
    out = capsys.readouterr().out
    assert "Average 3D error" in out
    assert report.read_text().splitlines()[0] == "# label=pose"

    converted = tmp_path / "report.json"
    assert run(["export-curves", "--report", str(report), "--out", str(converted)]) == 0
    assert json.loads(converted.read_text())["label"] == "pose"

    assert run(["records", "--db", db]) == 0
    assert "1 records" in capsys.readouterr().out


def test_refiner_localize_and_predict(tmp_path, dataset_file, run_config, capsys):
    refiner, model = tmp_path / "refine.dpm", tmp_path / "pose.dpm"
    assert run(["train-refiner", "--data", dataset_file, "--out", str(refiner), "--config", run_config]) == 0
    assert len(epoch_lines(capsys.readouterr().out)) == 1
    locations = tmp_path / "locations.json"
    assert run(["localize", "--data", dataset_file, "--mode", "refined", "--refiner", str(refiner),
                "--out", str(locations)]) == 0
    document = json.loads(locations.read_text())
    assert document["mode"] == "refined"
    assert len(document["locations"]) == 8

    # refined localization without a refiner is a usage error
    assert run(["localize", "--data", dataset_file, "--mode", "refined"]) == 1

    assert run(["train", "--data", dataset_file, "--out", str(model), "--config", run_config, "--quiet"]) == 0
    predictions = tmp_path / "predictions.json"
    assert run(["predict", "--model", str(model), "--data", dataset_file, "--mode", "com",
                "--out", str(predictions)]) == 0
    joints = json.loads(predictions.read_text())["joints"]
    assert len(joints) == 8 and len(joints[0]) == 14

    # a pose network cannot stand in for the refiner
    assert run(["localize", "--data", dataset_file, "--mode", "refined", "--refiner", str(model)]) == 2


def test_evaluate_defaults_to_center_of_mass(tmp_path, dataset_file, run_config, capsys):
    model, report = tmp_path / "m.dpm", tmp_path / "report.csv"
    assert run(["train", "--data", dataset_file, "--epochs", "0", "--out", str(model), "--config", run_config]) == 0
    assert run(["evaluate", "--model", str(model), "--data", dataset_file, "--out", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert any(line.startswith("# average_error_mm=") for line in lines)
    assert sum(1 for line in lines if line.startswith("all_joints,")) == 81
    assert sum(1 for line in lines if line.startswith("per_frame_average,")) == 81

    locations = tmp_path / "locations.json"
    assert run(["localize", "--data", dataset_file, "--out", str(locations)]) == 0
    assert json.loads(locations.read_text())["mode"] == "com"
    assert run(["predict", "--model", str(model), "--data", dataset_file]) == 0


def test_unreachable_record_store_exits_with_two(tmp_path, capsys):
    db = f"sqlite:///{tmp_path / 'missing' / 'runs.db'}"
    assert run(["records", "--db", db]) == 2
    assert "run records" in capsys.readouterr().err


def test_benchmark(tmp_path, dataset_file, run_config, capsys):
    model = tmp_path / "pose.dpm"
    assert run(["train", "--data", dataset_file, "--out", str(model), "--config", run_config, "--epochs", "0"]) == 0
    out = tmp_path / "fps.json"
    assert run(["benchmark", "--model", str(model), "--data", dataset_file, "--warmup", "2", "--runs", "2",
                "--out", str(out)]) == 0
    document = json.loads(out.read_text())
    assert document["frames"] == 6 and len(document["runs"]) == 2
    assert "fps" in capsys.readouterr().out


def test_flag_overrides_config_overrides_default(run_config):
    args = build_parser().parse_args(["train", "--data", "d.dpds", "--config", run_config, "--epochs", "5"])
    cfg = resolve_config(args)
    assert cfg.optimizer.epochs == 5
    assert cfg.optimizer.batch_size == 4
    assert cfg.optimizer.learning_rate == pytest.approx(1e-4)
    assert cfg.architecture.pca_components == 6


def test_flag_mapping(run_config):
    args = build_parser().parse_args([
        "train", "--data", "d.dpds", "--augment", "none", "--arch", "original", "--freeze-prior",
        "--no-robust-prior", "--seed", "9", "--cube-size", "250",
    ])
    cfg = resolve_config(args)
    assert not cfg.augmentation.any_enabled
    assert cfg.architecture.preset == "original"
    assert cfg.architecture.freeze_prior and not cfg.architecture.robust_prior
    assert cfg.seed == 9 and cfg.scene.seed == 9
    assert cfg.evaluation.cube_size_mm == 250.0

    refiner = resolve_config(build_parser().parse_args(["train-refiner", "--data", "d.dpds", "--epochs", "3"]))
    assert refiner.refiner_epochs == 3


def test_ablate_small_preset(tmp_path, run_config, capsys):
    table = tmp_path / "table.csv"
    assert run(["ablate", "--preset", "table5", "--frames", "9", "--subjects", "3", "--epochs", "0",
                "--config", run_config, "--out", str(table)]) == 0
    out = capsys.readouterr().out
    for label in ("CoM", "Refined CoM", "Ground truth"):
        assert label in out
    rows = table.read_text().splitlines()
    assert rows[0] == "label,status,seeds,average_error_mm,std_error_mm,localization_error_mm,message"
    assert len(rows) == 4
