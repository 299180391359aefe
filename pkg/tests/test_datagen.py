import hashlib
import json

import numpy as np
import pytest

from deepprior.datagen.dataset import (
    DIGEST_SIZE, HEADER, SUBJECT, Dataset, generate_dataset, load_dataset, save_dataset,
    sidecar_path, split_by_subject,
)
from deepprior.datagen.hand_model import HandModel, NUM_JOINTS, forward_kinematics, sample_angles
from deepprior.datagen.model_io import decode_model, encode_model, load_model, load_prior, save_model, save_prior
from deepprior.datagen.renderer import render_depth, render_spheres, scene_intrinsics
from deepprior.errors import (
    ArchitectureMismatchError, ChecksumError, DatasetFormatError, InsufficientDataError,
    OutOfViewError, ShapeError, TruncatedFileError, VersionMismatchError,
)
from deepprior.geometry.frames import Pose3D
from deepprior.models.run_config import SceneConfig
from deepprior.neuralnet.architectures import build_posenet, build_refinenet
from deepprior.prior.pca import fit_pca


def test_forward_kinematics_preserves_bone_lengths(rng):
    model = HandModel()
    root = np.array([10.0, -5.0, 500.0])
    pose = forward_kinematics(model, sample_angles(SceneConfig(), rng), root)
    assert pose.num_joints == NUM_JOINTS
    np.testing.assert_allclose(pose.joints[0], root)
    for i, joint in enumerate(model.joints()):
        if joint.parent >= 0:
            length = np.linalg.norm(pose.joints[i] - pose.joints[joint.parent])
            assert length == pytest.approx(model.segment_length(i))


def test_rest_pose_fingers_point_up():
    pose = forward_kinematics(HandModel(), {}, np.zeros(3))
    np.testing.assert_allclose(pose.joints[9], [0.0, -90.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(pose.joints[1], [0.0, 85.0, 0.0], atol=1e-9)


def test_sphere_render(intrinsics):
    depth = render_spheres([(0.0, 0.0, 500.0, 50.0)], intrinsics)
    assert depth[120, 160] == pytest.approx(450.0)
    hit = depth > 0
    # silhouette radius is f * tan(asin(r / d)) pixels
    radius_px = 500.0 * np.tan(np.arcsin(0.1))
    assert hit.sum() == pytest.approx(np.pi * radius_px ** 2, rel=0.02)
    assert depth[hit].max() <= 500.0


def test_sphere_render_background_and_occlusion(intrinsics):
    depth = render_spheres([(0.0, 0.0, 500.0, 50.0), (0.0, 0.0, 700.0, 100.0)], intrinsics, 1000.0)
    assert depth[120, 160] == pytest.approx(450.0)
    assert depth[0, 0] == 1000.0


def test_sphere_behind_camera(intrinsics):
    with pytest.raises(OutOfViewError):
        render_spheres([(0.0, 0.0, 20.0, 50.0)], intrinsics)


def test_clean_render_matches_annotation(clean_scene, rng):
    k = scene_intrinsics(clean_scene)
    model = HandModel()
    root = np.array([0.0, 0.0, 550.0])
    frame, pose = render_depth(model, sample_angles(clean_scene, rng), root, clean_scene, noise=False)
    assert frame.depth.dtype == np.uint16
    assert frame.depth.shape == (clean_scene.height, clean_scene.width)
    hand = frame.depth < clean_scene.background_depth_mm
    uvd = pose.joints[:, :2] * [k.fx, k.fy] / pose.joints[:, 2:] + [k.cx, k.cy]
    for u, v in np.rint(uvd).astype(int):
        assert hand[max(v - 1, 0):v + 2, max(u - 1, 0):u + 2].any()
    z = pose.joints[:, 2]
    reach = model.palm_thickness / 2.0
    assert frame.depth[hand].min() >= z.min() - reach - 1
    assert frame.depth[hand].max() <= z.max() + 1


def test_hand_outside_frustum(clean_scene):
    with pytest.raises(OutOfViewError):
        render_depth(HandModel(), {}, np.array([1000.0, 0.0, 500.0]), clean_scene, noise=False)


def test_missing_pixel_rate(rng):
    cfg = SceneConfig(missing_probability=0.2, depth_jitter_mm=0.0)
    frame, _ = render_depth(HandModel(), {}, np.array([0.0, 0.0, 550.0]), cfg, rng)
    assert abs(np.mean(frame.depth == 0) - 0.2) < 0.02


def test_generation_is_deterministic_and_thread_independent():
    cfg = SceneConfig(seed=11)
    a = generate_dataset(6, 2, cfg, threads=1)
    b = generate_dataset(6, 2, cfg, threads=3)
    for fa, fb in zip(a.frames, b.frames):
        np.testing.assert_array_equal(fa.depth, fb.depth)
    np.testing.assert_array_equal(a.poses(), b.poses())
    c = generate_dataset(6, 2, SceneConfig(seed=12), threads=1)
    assert not np.array_equal(a.poses(), c.poses())


def test_subjects_are_assigned_round_robin(small_dataset):
    assert small_dataset.subject_ids == [0, 1, 2] * 4
    scales = {m.palm_width for m in small_dataset.hand_models.values()}
    assert len(scales) == 3


def test_single_frame_dataset():
    ds = generate_dataset(1, cfg=SceneConfig(seed=2))
    assert len(ds) == 1
    assert ds.num_joints == NUM_JOINTS


def test_empty_generation_rejected():
    with pytest.raises(InsufficientDataError):
        generate_dataset(0)


def test_split_by_subject(small_dataset):
    train, test = split_by_subject(small_dataset, [2])
    assert len(train) + len(test) == len(small_dataset)
    assert set(test.subject_ids) == {2}
    assert not set(train.subject_ids) & set(test.subject_ids)
    assert set(train.hand_models) == {0, 1}


def test_dataset_lengths_must_agree(small_dataset):
    with pytest.raises(ShapeError):
        Dataset(small_dataset.frames[:2], small_dataset.annotations[:3], [0, 0], small_dataset.intrinsics)


def test_dataset_save_and_load(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    assert sidecar_path(path).name == "hands.joints.json"
    k = small_dataset.intrinsics
    frame_bytes = SUBJECT.size + 2 * k.width * k.height
    assert path.stat().st_size == HEADER.size + len(small_dataset) * frame_bytes + DIGEST_SIZE

    loaded = load_dataset(path)
    assert loaded.subject_ids == small_dataset.subject_ids
    assert loaded.intrinsics == small_dataset.intrinsics
    for original, restored in zip(small_dataset.frames, loaded.frames):
        np.testing.assert_array_equal(original.depth, restored.depth)
    np.testing.assert_array_equal(loaded.poses(), small_dataset.poses())


def test_corrupted_dataset_is_detected(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    blob = bytearray(path.read_bytes())
    blob[HEADER.size + 100] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ChecksumError):
        load_dataset(path)


def test_dataset_version_and_magic(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionMismatchError):
        load_dataset(path)
    path.write_bytes(b"NOPE" + bytes(blob[4:]))
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def test_truncated_dataset(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    path.write_bytes(path.read_bytes()[:-500])
    with pytest.raises(TruncatedFileError):
        load_dataset(path)


def test_corrupted_annotation_is_detected(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    sidecar = json.loads(sidecar_path(path).read_text())
    sidecar["joints"][0][0][0] += 10.0
    sidecar_path(path).write_text(json.dumps(sidecar, separators=(",", ":")))
    with pytest.raises(ChecksumError):
        load_dataset(path)


def test_short_and_padded_dataset_files(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    blob = path.read_bytes()
    path.write_bytes(blob[:3])
    with pytest.raises(TruncatedFileError):
        load_dataset(path)
    path.write_bytes(blob + b"\x00")
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def test_sidecar_must_match_binary(tmp_path, small_dataset):
    path = save_dataset(small_dataset, tmp_path / "hands.dpds")
    sidecar = json.loads(sidecar_path(path).read_text())
    sidecar["checksum"] = hashlib.sha256(b"other").hexdigest()
    sidecar_path(path).write_text(json.dumps(sidecar))
    with pytest.raises(ChecksumError):
        load_dataset(path)

    sidecar_path(path).unlink()
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


def _trained_like_posenet(rng):
    net = build_posenet("desk", num_joints=NUM_JOINTS, components=8, fc_width=32, seed=3)
    prior = fit_pca(rng.normal(size=(40, 3 * NUM_JOINTS)), 8)
    for value in net.parameters().values():
        value += rng.normal(scale=0.01, size=value.shape).astype(value.dtype)
    return net, prior


def test_model_round_trip_is_bit_identical(tmp_path, rng):
    net, prior = _trained_like_posenet(rng)
    path = save_model(tmp_path / "pose.dpm", net, prior, "abc123", {"cube_size_mm": 300.0})
    saved = load_model(path, expected_kind="posenet")
    assert saved.fingerprint == "abc123"
    assert saved.metadata == {"cube_size_mm": 300.0}
    for key, value in net.parameters().items():
        restored = saved.net.parameters()[key]
        assert restored.dtype == value.dtype
        np.testing.assert_array_equal(restored, value)
    np.testing.assert_array_equal(saved.prior.components, prior.components)
    assert encode_model(saved.net, saved.prior, "abc123", {"cube_size_mm": 300.0}) == path.read_bytes()


def test_model_file_is_compact(tmp_path):
    path = save_model(tmp_path / "pose.dpm", build_posenet("desk", components=30))
    assert path.stat().st_size < 10 * 1024 * 1024


def test_model_kind_is_checked(tmp_path):
    path = save_model(tmp_path / "refine.dpm", build_refinenet("desk", fc_width=16))
    with pytest.raises(ArchitectureMismatchError):
        load_model(path, expected_kind="posenet")
    assert load_model(path, expected_kind="refinenet").prior is None


def test_corrupted_model(rng):
    net, prior = _trained_like_posenet(rng)
    blob = bytearray(encode_model(net, prior))
    blob[-100] ^= 0x01
    with pytest.raises(ChecksumError):
        decode_model(bytes(blob))
    with pytest.raises(TruncatedFileError):
        decode_model(bytes(blob[:20]))
    with pytest.raises(DatasetFormatError):
        decode_model(b"XXXX" + bytes(blob[4:]))


def test_prior_file_round_trip(tmp_path, rng):
    prior = fit_pca(rng.normal(size=(30, 9)), 4)
    path = save_prior(prior, tmp_path / "prior.json", "f00")
    restored = load_prior(path)
    np.testing.assert_array_equal(restored.mean, prior.mean)
    np.testing.assert_array_equal(restored.components, prior.components)

    document = json.loads(path.read_text())
    document["version"] = 99
    path.write_text(json.dumps(document))
    with pytest.raises(VersionMismatchError):
        load_prior(path)


def test_pose_requires_three_coordinates():
    with pytest.raises(ShapeError):
        Pose3D(np.zeros((4, 2)))
