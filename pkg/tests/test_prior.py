import numpy as np
import pytest

from deepprior.augmentation.params import AugmentParams
from deepprior.augmentation.transforms import augment_pose
from deepprior.errors import DimensionError, InsufficientDataError, ShapeError
from deepprior.geometry.frames import Pose3D
from deepprior.models.run_config import AugmentConfig
from deepprior.neuralnet.architectures import build_posenet
from deepprior.prior.pca import embed, fit_pca, init_output_layer, reconstruct, reconstruction_error
from deepprior.prior.robust import fit_robust_prior


@pytest.fixture
def poses(rng):
    """200 correlated 42-dimensional pose vectors."""
    latent = rng.normal(size=(200, 8)) * np.linspace(3.0, 0.5, 8)
    mixing = rng.normal(size=(8, 42))
    return latent @ mixing + rng.normal(scale=0.05, size=(200, 42)) + rng.normal(size=42)


def test_matches_brute_force_decomposition(poses):
    prior = fit_pca(poses, 8)
    centered = poses - poses.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    np.testing.assert_allclose(prior.mean, poses.mean(axis=0))
    np.testing.assert_allclose(prior.eigenvalues, singular[:8] ** 2 / (len(poses) - 1), rtol=1e-8)
    # same principal subspace, whatever the sign of each direction
    np.testing.assert_allclose(prior.components.T @ prior.components, vt[:8].T @ vt[:8], atol=1e-8)


def test_components_are_orthonormal_and_sorted(poses):
    prior = fit_pca(poses, 12)
    np.testing.assert_allclose(prior.components @ prior.components.T, np.eye(12), atol=1e-10)
    assert np.all(np.diff(prior.eigenvalues) <= 0)


def test_sign_convention(poses):
    components = fit_pca(poses, 6).components
    largest = components[np.arange(6), np.argmax(np.abs(components), axis=1)]
    assert np.all(largest > 0)


def test_reconstruction_error_decreases_with_components(poses):
    errors = [reconstruction_error(fit_pca(poses, k), poses) for k in (1, 2, 4, 8, 16, 42)]
    assert all(a >= b for a, b in zip(errors, errors[1:]))
    assert errors[-1] == pytest.approx(0.0, abs=1e-9)


def test_embed_then_reconstruct_is_a_projection(poses):
    prior = fit_pca(poses, 8)
    once = reconstruct(prior, embed(prior, poses))
    twice = reconstruct(prior, embed(prior, once))
    np.testing.assert_allclose(once, twice, atol=1e-9)
    assert embed(prior, poses[0]).shape == (8,)


def test_too_many_components(poses):
    with pytest.raises(DimensionError):
        fit_pca(poses, 43)


def test_too_few_poses(poses):
    with pytest.raises(InsufficientDataError):
        fit_pca(poses[:5], 5)


def test_mismatched_vectors(poses):
    prior = fit_pca(poses, 4)
    with pytest.raises(ShapeError):
        embed(prior, poses[:, :30])
    with pytest.raises(ShapeError):
        reconstruct(prior, np.zeros(5))


def test_prior_layer_outputs_mean_for_zero_coefficients(rng):
    poses = rng.normal(size=(50, 9))
    prior = fit_pca(poses, 5)
    net = build_posenet("desk", num_joints=3, components=5, fc_width=16, dtype="float64", seed=1)
    net.install_prior(*init_output_layer(prior))
    coefficients = net.layers[-2]
    coefficients.params["weight"][...] = 0.0
    coefficients.params["bias"][...] = 0.0
    out = net.forward(rng.uniform(-1, 1, size=(2, 1, 64, 64)))
    np.testing.assert_allclose(out, np.tile(prior.mean, (2, 1)), atol=1e-12)

    coefficients.params["bias"][...] = [1.0, -2.0, 0.5, 0.0, 3.0]
    out = net.forward(rng.uniform(-1, 1, size=(1, 1, 64, 64)))
    np.testing.assert_allclose(out[0], reconstruct(prior, [1.0, -2.0, 0.5, 0.0, 3.0]), atol=1e-12)


def test_prior_layer_starts_at_zero():
    net = build_posenet("desk", num_joints=3, components=5, fc_width=16, dtype="float64")
    assert not np.any(net.prior_layer.params["weight"])
    assert not np.any(net.prior_layer.params["bias"])


def _hand_like_poses(rng, n=40, joints=5):
    """Cube-normalized poses with the reference joint at the origin."""
    offsets = np.array([[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [0.1, 0.4, 0.05], [-0.2, 0.3, 0.0], [0.0, -0.3, 0.1]])
    poses = offsets[None, :joints] + rng.normal(scale=0.02, size=(n, joints, 3))
    poses[:, 0] = 0.0
    return poses.reshape(n, -1)


def test_robust_prior_spreads_variance(rng):
    poses = _hand_like_poses(rng)
    plain = fit_pca(poses, 10)
    robust = fit_robust_prior(poses, AugmentConfig(), n_samples=5000, k=10, rng=np.random.default_rng(0))
    assert robust.eigenvalues.sum() > 2 * plain.eigenvalues.sum()
    # the rotated poses fill the image plane, so the top directions lie in x/y
    in_plane = robust.components[0].reshape(-1, 3)[:, :2]
    assert np.sum(in_plane ** 2) > 0.9


def test_robust_prior_is_reproducible(rng):
    poses = _hand_like_poses(rng)
    a = fit_robust_prior(poses, AugmentConfig(), 2000, 6, np.random.default_rng(3))
    b = fit_robust_prior(poses, AugmentConfig(), 2000, 6, np.random.default_rng(3))
    np.testing.assert_array_equal(a.components, b.components)


def test_robust_prior_without_augmentation_is_plain_pca(rng):
    poses = _hand_like_poses(rng)
    robust = fit_robust_prior(poses, AugmentConfig.from_flags(""), 2000, 6, np.random.default_rng(0))
    plain = fit_pca(poses, 6)
    np.testing.assert_allclose(robust.components, plain.components)
    np.testing.assert_allclose(robust.mean, plain.mean)


def test_robust_prior_needs_poses():
    with pytest.raises(InsufficientDataError):
        fit_robust_prior(np.zeros((0, 9)), AugmentConfig(), 100, 3)


def test_robust_prior_reconstructs_turned_pose_better(rng):
    poses = _hand_like_poses(rng)
    plain = fit_pca(poses, 6)
    robust = fit_robust_prior(poses, AugmentConfig(), n_samples=5000, k=6, rng=np.random.default_rng(0))
    held_out = _hand_like_poses(np.random.default_rng(99), n=1)[0].reshape(-1, 3)
    test_pose = augment_pose(Pose3D(held_out), AugmentParams(angle=90.0), np.zeros(3)).joints.reshape(1, -1)
    assert reconstruction_error(robust, test_pose) < reconstruction_error(plain, test_pose)


def test_fit_ignores_pose_order(poses, rng):
    prior = fit_pca(poses, 8)
    shuffled = fit_pca(poses[rng.permutation(len(poses))], 8)
    np.testing.assert_allclose(shuffled.mean, prior.mean, atol=1e-9)
    np.testing.assert_allclose(shuffled.components, prior.components, atol=1e-9)
    np.testing.assert_allclose(shuffled.eigenvalues, prior.eigenvalues, rtol=1e-9)


def test_shifted_poses_shift_only_the_mean(poses, rng):
    shift = rng.normal(scale=100.0, size=poses.shape[1])
    prior = fit_pca(poses, 8)
    shifted = fit_pca(poses + shift, 8)
    np.testing.assert_allclose(shifted.mean, prior.mean + shift, atol=1e-9)
    np.testing.assert_allclose(shifted.components, prior.components, atol=1e-9)
