import numpy as np
import pytest

from deepprior.errors import DomainError, NoHandError, ShapeError
from deepprior.geometry.camera import backproject
from deepprior.geometry.frames import DepthFrame
from deepprior.localization.refinement import HandTracker, localization_error, refine_location, track
from deepprior.localization.segmentation import (
    HandLocation,
    LocationSource,
    center_of_mass,
    locate_center_of_mass,
    segment_hand,
)
from deepprior.neuralnet.architectures import build_posenet, build_refinenet


def constant_offset_refiner(offset):
    """Refinement net whose output is ``offset`` for every input."""
    net = build_refinenet("desk", fc_width=16, dtype="float64", seed=0)
    last = net.layers[-1]
    last.params["weight"][...] = 0.0
    last.params["bias"][...] = offset
    return net


def test_segment_hand_selects_nearest_object(block_frame):
    mask = segment_hand(block_frame, extent=250.0)
    expected = np.zeros_like(mask)
    expected[110:131, 150:171] = True
    np.testing.assert_array_equal(mask, expected)


def test_segment_hand_ignores_missing_pixels(block_frame):
    depth = block_frame.depth.copy()
    depth[0:5, 0:5] = 0
    mask = segment_hand(DepthFrame(depth, block_frame.intrinsics), 250.0)
    assert not mask[0:5, 0:5].any()


def test_center_of_mass_of_centred_block(block_frame):
    loc = locate_center_of_mass(block_frame, extent=250.0)
    assert loc.source == LocationSource.CENTER_OF_MASS
    np.testing.assert_allclose(loc.point, [0.0, 0.0, 500.0], atol=1e-9)


def test_center_of_mass_is_mean_of_backprojected_pixels(block_frame):
    mask = np.zeros(block_frame.depth.shape, dtype=bool)
    mask[112:118, 150:155] = True
    rows, cols = np.nonzero(mask)
    expected = backproject(cols.astype(float), rows.astype(float), np.full(rows.size, 500.0),
                           block_frame.intrinsics).mean(axis=0)
    np.testing.assert_allclose(center_of_mass(block_frame, mask).point, expected)


def test_no_valid_pixels_is_no_hand(intrinsics):
    empty = DepthFrame(np.zeros((intrinsics.height, intrinsics.width), dtype=np.uint16), intrinsics)
    with pytest.raises(NoHandError):
        segment_hand(empty)
    with pytest.raises(NoHandError):
        center_of_mass(empty, np.zeros(empty.depth.shape, dtype=bool))


def test_hand_location_must_be_in_front_of_camera():
    with pytest.raises(DomainError):
        HandLocation((0.0, 0.0, -5.0), LocationSource.CENTER_OF_MASS)


def test_refine_location_applies_scaled_offset(block_frame):
    net = constant_offset_refiner([0.1, 0.0, -0.2])
    start = HandLocation((0.0, 0.0, 500.0), LocationSource.CENTER_OF_MASS)
    refined = refine_location(block_frame, start, net, c_size=300.0)
    assert refined.source == LocationSource.REFINED
    np.testing.assert_allclose(refined.point, [15.0, 0.0, 470.0], atol=1e-9)


def test_zero_offset_keeps_location(block_frame):
    net = constant_offset_refiner([0.0, 0.0, 0.0])
    start = HandLocation((3.0, -4.0, 510.0), LocationSource.CENTER_OF_MASS)
    np.testing.assert_allclose(refine_location(block_frame, start, net).point, start.point)


def test_iterated_refinement_accumulates(block_frame):
    net = constant_offset_refiner([0.1, 0.0, 0.0])
    start = HandLocation((0.0, 0.0, 500.0), LocationSource.CENTER_OF_MASS)
    refined = refine_location(block_frame, start, net, c_size=300.0, iterations=2)
    assert refined.point[0] == pytest.approx(30.0)


def test_refiner_must_output_three_values(block_frame):
    assert build_refinenet("desk", fc_width=16, dtype="float64").output_dim == 3
    posenet = build_posenet("desk", components=5, fc_width=16, dtype="float64")
    with pytest.raises(ShapeError):
        refine_location(block_frame, HandLocation((0.0, 0.0, 500.0), "refined"), posenet)


def test_track_starts_from_previous_location(block_frame):
    net = constant_offset_refiner([0.0, 0.1, 0.0])
    prev = HandLocation((0.0, 0.0, 500.0), LocationSource.REFINED)
    tracked = track(prev, block_frame, net, c_size=300.0)
    assert tracked.source == LocationSource.TRACKED
    assert tracked.point[1] == pytest.approx(15.0)


def test_tracker_falls_back_to_center_of_mass(block_frame):
    tracker = HandTracker(constant_offset_refiner([0.0, 0.0, 0.0]), c_size=300.0, k=block_frame.intrinsics)
    tracker.previous = HandLocation((5000.0, 0.0, 500.0), LocationSource.TRACKED)
    loc = tracker.update(block_frame)
    assert tracker.fallbacks == 1
    np.testing.assert_allclose(loc.point, [0.0, 0.0, 500.0], atol=1e-9)
    # the next frame is tracked from the recovered location
    assert tracker.update(block_frame).source == LocationSource.TRACKED
    assert tracker.fallbacks == 1


def test_localization_error():
    locations = [HandLocation((3.0, 4.0, 500.0), "refined"), HandLocation((0.0, 0.0, 510.0), "refined")]
    references = [np.array([0.0, 0.0, 500.0]), np.array([0.0, 0.0, 500.0])]
    assert localization_error(locations, references) == pytest.approx(7.5)
    with pytest.raises(ShapeError):
        localization_error(locations, references[:1])


def test_segmentation_grows_with_extent(small_dataset):
    extents = [1.0, 50.0, 100.0, 150.0, 250.0, 500.0, 2000.0]
    for frame in small_dataset.frames[:4]:
        masks = [segment_hand(frame, extent) for extent in extents]
        for smaller, larger in zip(masks, masks[1:]):
            assert not np.any(smaller & ~larger)
        assert masks[0].any()
        np.testing.assert_array_equal(masks[-1], frame.valid_mask())
