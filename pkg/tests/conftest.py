import numpy as np
import pytest

from deepprior.datagen.dataset import generate_dataset
from deepprior.geometry.camera import CameraIntrinsics
from deepprior.geometry.frames import DepthFrame
from deepprior.models.run_config import RunConfig, SceneConfig


@pytest.fixture
def intrinsics():
    """320x240 sensor with fx = fy = 500 and the principal point at (160, 120)."""
    return CameraIntrinsics(500.0, 500.0, 160.0, 120.0, 320, 240)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def block_frame(intrinsics):
    """Background at 1000mm with a 21x21 pixel block at 500mm centred on the principal point."""
    depth = np.full((intrinsics.height, intrinsics.width), 1000, dtype=np.uint16)
    depth[110:131, 150:171] = 500
    return DepthFrame(depth, intrinsics)


@pytest.fixture
def clean_scene():
    return SceneConfig(missing_probability=0.0, depth_jitter_mm=0.0, seed=3)


@pytest.fixture(scope="session")
def small_dataset():
    """Twelve noisy frames of three subjects."""
    return generate_dataset(12, 3, SceneConfig(seed=7), seed=7, threads=1)


@pytest.fixture
def fast_config():
    """Desk-scale run settings that keep training-based tests quick."""
    return RunConfig().with_overrides(
        architecture={"scale": "desk", "pca_components": 6, "robust_prior_samples": 2000, "fc_width": 32},
        optimizer={"epochs": 0, "batch_size": 4},
        refiner_epochs=0,
        dtype="float64",
    )
