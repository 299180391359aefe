from datetime import timedelta
from functools import partial

import numpy as np
import pytest

from deepprior.errors import (
    ConfigError, DatasetFormatError, DomainError, InsufficientDataError, RecordStoreError, ShapeError,
)
from deepprior.evaluation.ablation import (
    AblationCell, PRESETS, ablate, default_split, format_table, preset_cells, write_table,
)
from deepprior.evaluation.benchmark import fps_benchmark
from deepprior.evaluation.export import export_report, load_report, report_to_csv
from deepprior.evaluation.metrics import (
    ALL_JOINTS, PER_FRAME_AVERAGE, average_3d_error, curve_from_errors, default_thresholds,
    evaluate_predictions, fraction_curve, joint_errors, per_joint_error,
)
from deepprior.geometry.frames import Pose3D
from deepprior.localization.refinement import HandTracker
from deepprior.localization.segmentation import HandLocation, LocationSource, locate_center_of_mass
from deepprior.neuralnet.architectures import build_posenet, build_refinenet
from deepprior.neuralnet.layers import LayerSpec
from deepprior.neuralnet.network import Network
from deepprior.tasks.evaluation_task import (
    evaluate_network, list_records, localize_dataset, record_failure, record_report,
)


@pytest.fixture
def report(rng):
    gts = rng.normal(0.0, 50.0, size=(20, 14, 3)) + [0.0, 0.0, 500.0]
    preds = gts + rng.normal(0.0, 8.0, size=gts.shape)
    result = evaluate_predictions(preds, gts, fingerprint="f" * 64, label="resnet")
    result.localization_error_mm = 4.25
    result.extras["refine_iterations"] = 1.0
    return result


def test_single_joint_error():
    preds = [Pose3D(np.array([[3.0, 4.0, 0.0]]))]
    gts = [Pose3D(np.array([[0.0, 0.0, 0.0]]))]
    assert average_3d_error(preds, gts) == pytest.approx(5.0)


def test_curve_steps_at_frame_errors():
    preds = np.array([[[10.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]], [[0.0, 0.0, 1.0]]])
    curve = fraction_curve(preds, np.zeros_like(preds), thresholds=[0.0, 0.5, 1.0, 9.0, 10.0])
    np.testing.assert_allclose(curve.fractions, [0.0, 0.0, 2 / 3, 2 / 3, 1.0])


def test_all_joints_curve_uses_worst_joint():
    # one frame: joint errors 2 and 6 -> worst 6, average 4
    preds = np.array([[[2.0, 0.0, 0.0], [0.0, 6.0, 0.0]]])
    gts = np.zeros_like(preds)
    worst = fraction_curve(preds, gts, [3.0, 5.0, 6.0], ALL_JOINTS)
    average = fraction_curve(preds, gts, [3.0, 5.0, 6.0], PER_FRAME_AVERAGE)
    np.testing.assert_array_equal(worst.fractions, [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(average.fractions, [0.0, 1.0, 1.0])
    np.testing.assert_allclose(per_joint_error(preds, gts), [2.0, 6.0])


def test_average_error_is_symmetric_and_translation_invariant(rng):
    for _ in range(200):
        n, j = rng.integers(1, 6), rng.integers(1, 15)
        a = rng.normal(0.0, 50.0, size=(n, j, 3)) + [0.0, 0.0, 500.0]
        b = a + rng.normal(0.0, 10.0, size=a.shape)
        shift = rng.normal(0.0, 200.0, size=3)
        error = average_3d_error(a, b)
        assert average_3d_error(b, a) == pytest.approx(error, abs=1e-9)
        assert average_3d_error(a + shift, b + shift) == pytest.approx(error, abs=1e-9)


def test_curve_properties_on_random_sets(rng):
    thresholds = default_thresholds()
    for _ in range(1000):
        n, j = rng.integers(1, 6), rng.integers(1, 5)
        errors = np.abs(rng.normal(0.0, 30.0, size=(n, j)))
        worst = curve_from_errors(errors, thresholds, ALL_JOINTS).fractions
        average = curve_from_errors(errors, thresholds, PER_FRAME_AVERAGE).fractions
        assert np.all(np.diff(worst) >= 0)
        assert np.all((worst >= 0) & (worst <= 1))
        assert np.all(average >= worst)


def test_default_thresholds():
    thresholds = default_thresholds()
    assert len(thresholds) == 81
    assert thresholds[0] == 0.0 and thresholds[-1] == 80.0


def test_thresholds_must_increase():
    errors = np.ones((2, 3))
    with pytest.raises(DomainError):
        curve_from_errors(errors, [0.0, 5.0, 5.0])
    with pytest.raises(DomainError):
        curve_from_errors(errors, [])
    with pytest.raises(DomainError):
        curve_from_errors(errors, [1.0, 2.0], variant="median")


def test_mismatched_or_empty_predictions():
    with pytest.raises(ShapeError):
        joint_errors(np.zeros((2, 14, 3)), np.zeros((2, 13, 3)))
    with pytest.raises(InsufficientDataError):
        joint_errors([], [])


def test_report_contents(report):
    assert report.frame_count == 20
    assert report.per_joint_mm.shape == (14,)
    assert report.average_error_mm == pytest.approx(report.per_joint_mm.mean())
    assert set(report.curves) == {ALL_JOINTS, PER_FRAME_AVERAGE}


@pytest.mark.parametrize("suffix", ["csv", "json"])
def test_report_export_and_reload(tmp_path, report, suffix):
    path = export_report(report, tmp_path / f"report.{suffix}")
    restored = load_report(path)
    assert restored.average_error_mm == report.average_error_mm
    assert restored.localization_error_mm == 4.25
    assert restored.fingerprint == report.fingerprint
    assert restored.extras == {"refine_iterations": 1.0}
    np.testing.assert_array_equal(restored.per_joint_mm, report.per_joint_mm)
    for variant, curve in report.curves.items():
        np.testing.assert_array_equal(restored.curves[variant].fractions, curve.fractions)
    # a reloaded report exports to the same bytes
    again = export_report(restored, tmp_path / f"again.{suffix}")
    assert again.read_bytes() == path.read_bytes()


def test_csv_layout(report):
    lines = report_to_csv(report).splitlines()
    data = [line for line in lines if not line.startswith("#")]
    assert data[0] == "variant,threshold_mm,fraction"
    assert len(data) == 1 + 2 * 81
    assert "# label=resnet" in lines
    assert data[1].startswith("all_joints,0.0,")


def test_unknown_report_format(tmp_path, report):
    with pytest.raises(DatasetFormatError):
        export_report(report, tmp_path / "report.xml")
    (tmp_path / "broken.csv").write_text("a,b\n1,2\n")
    with pytest.raises(DatasetFormatError):
        load_report(tmp_path / "broken.csv")


def test_run_records(tmp_path, report):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    record_report(report, url)
    records = list_records(url)
    assert len(records) == 1
    assert records[0].label == "resnet"
    assert records[0].average_error_mm == pytest.approx(report.average_error_mm)
    assert records[0].frame_count == 20
    assert records[0].created_at.utcoffset() == timedelta(0)


def test_run_records_newest_first(tmp_path, report):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    record_report(report, url)
    record_failure("broken cell", "seed 0: diverged", "f" * 64, url)
    records = list_records(url)
    assert [r.status for r in records] == ["error", "success"]
    assert records[0].created_at >= records[1].created_at
    assert len(list_records(url, limit=1)) == 1


def test_unreachable_record_store(tmp_path, report):
    url = f"sqlite:///{tmp_path / 'missing' / 'runs.db'}"
    with pytest.raises(RecordStoreError):
        record_report(report, url)
    with pytest.raises(RecordStoreError):
        list_records(url)


def test_preset_labels():
    assert [c.label for c in preset_cells("table4")] == [
        "none", "T", "R", "S", "R+T+S", "R+T+S & no prior aug.",
    ]
    assert [c.label for c in preset_cells("table5")] == ["CoM", "Refined CoM", "Ground truth"]
    assert [c.label for c in preset_cells("table6")] == ["Original", "Original with more filters", "ResNet"]
    assert all(cell.measure_fps for cell in PRESETS["table6"])
    with pytest.raises(ConfigError):
        preset_cells("table9")


def test_default_split_holds_out_last_subjects(small_dataset):
    train, test = default_split(small_dataset)
    assert set(train.subject_ids) == {0}
    assert set(test.subject_ids) == {1, 2}
    single = small_dataset.subset([0, 3, 6])
    with pytest.raises(InsufficientDataError):
        default_split(single)


def test_ground_truth_localization_has_no_error(small_dataset, fast_config):
    locations = localize_dataset(small_dataset, fast_config, mode="ground_truth")
    for loc, pose in zip(locations, small_dataset.annotations):
        np.testing.assert_allclose(loc.array, pose.reference)
    perturbed = localize_dataset(small_dataset, fast_config, mode="perturbed")
    offsets = np.stack([loc.array - pose.reference for loc, pose in zip(perturbed, small_dataset.annotations)])
    assert 0.0 < np.abs(offsets).mean() < 20.0
    with pytest.raises(ConfigError):
        localize_dataset(small_dataset, fast_config, mode="refined")


def test_evaluate_untrained_network(small_dataset, fast_config):
    cfg = fast_config.with_overrides(evaluation={"localization": "ground_truth"})
    net = build_posenet("desk", components=6, fc_width=32, dtype="float64")
    result = evaluate_network(net, small_dataset, cfg, label="untrained")
    assert result.frame_count == len(small_dataset)
    assert result.localization_error_mm == 0.0
    # an empty prior layer predicts every joint at the cube centre
    expected = np.mean([np.linalg.norm(p.joints - p.reference, axis=1).mean() for p in small_dataset.annotations])
    assert result.average_error_mm == pytest.approx(expected)


def test_ablation_runs_cells_and_records_failures(tmp_path, small_dataset, fast_config):
    base = fast_config.with_overrides(evaluation={"localization": "perturbed"})
    cells = [
        AblationCell("first", {}),
        AblationCell("second", {}),
        AblationCell("huge cube", {"evaluation": {"cube_size_mm": 2000.0}}),
    ]
    table = ablate(small_dataset, cells, base, seeds=(0,))
    first, second, failed = table.rows
    assert first.status == "success" and second.status == "success"
    assert first.mean_error == second.mean_error
    assert failed.status == "error" and failed.mean_error is None
    assert "huge cube" in format_table(table)

    path = write_table(table, tmp_path / "table.csv")
    assert len(path.read_text().splitlines()) == 4
    rerun = write_table(ablate(small_dataset, cells, base, seeds=(0,)), tmp_path / "rerun.csv")
    assert rerun.read_bytes() == path.read_bytes()


def test_ablation_over_seeds_in_threads(small_dataset, fast_config):
    base = fast_config.with_overrides(evaluation={"localization": "ground_truth"})
    table = ablate(small_dataset, [AblationCell("rts", {})], base, seeds=(0, 1), threads=2)
    row = table.row("rts")
    assert row.seeds == [0, 1]
    assert len(row.reports) == 2
    assert row.std_error >= 0.0


def test_fps_benchmark(small_dataset):
    net = build_posenet("desk", components=6, fc_width=16)
    localizer = partial(locate_center_of_mass, k=small_dataset.intrinsics)
    result = fps_benchmark(net, localizer, small_dataset.frames[:4], warmup=1, runs=2)
    assert result.frames == 3
    assert len(result.runs) == 2
    assert result.mean > 0
    with pytest.raises(InsufficientDataError):
        fps_benchmark(net, localizer, small_dataset.frames[:2], warmup=2)


def test_fps_benchmark_through_tracker(small_dataset):
    net = build_posenet("desk", components=6, fc_width=16)
    refiner = build_refinenet("desk", fc_width=16)
    for value in refiner.layers[-1].params.values():
        value[...] = 0.0
    tracker = HandTracker(refiner, k=small_dataset.intrinsics)
    result = fps_benchmark(net, tracker, small_dataset.frames[:4], warmup=1, runs=2)
    assert result.frames == 3 and result.mean > 0
    assert tracker.previous is not None


def _conv_net(resolution):
    specs = [
        LayerSpec("conv", filters=16, size=5, padding=2),
        LayerSpec("relu"),
        LayerSpec("conv", filters=16, size=3, padding=1),
        LayerSpec("relu"),
        LayerSpec("maxpool", pool=4),
        LayerSpec("fullyconnected", neurons=3),
    ]
    return Network(specs, (1, resolution, resolution))


def test_fps_falls_as_resolution_rises(small_dataset):
    references = {id(frame): pose.reference for frame, pose in zip(small_dataset.frames, small_dataset.annotations)}

    def localizer(frame):
        return HandLocation(references[id(frame)], LocationSource.GROUND_TRUTH)

    fps = [fps_benchmark(_conv_net(resolution), localizer, small_dataset.frames, warmup=2, runs=3).mean
           for resolution in (32, 64, 128)]
    assert fps[0] > fps[1] > fps[2]
