"""
Pose network training jobs.

Training crops are centred on the annotated middle-finger MCP; translation
augmentation stands in for localization noise. The prior is fitted on the
same cube-normalized targets the network regresses.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np

from deepprior.augmentation.stream import AugmentedStream, BaseSample
from deepprior.datagen.dataset import Dataset, load_dataset
from deepprior.datagen.model_io import load_prior, save_model, save_prior
from deepprior.errors import DeepPriorError, InsufficientDataError
from deepprior.geometry.crop import CropCube, normalize_joints
from deepprior.models.run_config import RunConfig
from deepprior.neuralnet.adam import AdamState
from deepprior.neuralnet.architectures import build_from_config
from deepprior.neuralnet.network import Network
from deepprior.neuralnet.trainer import EpochStats, train
from deepprior.prior.pca import PcaPrior, fit_pca, init_output_layer
from deepprior.prior.robust import fit_robust_prior

logger = logging.getLogger(__name__)

EpochCallback = Optional[Callable[[EpochStats], None]]


def derive_seed(*keys: int) -> int:
    """A 32-bit seed mixed from several integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass
class TrainedPoseNet:
    net: Network
    prior: PcaPrior
    history: List[float]


def ground_truth_samples(dataset: Dataset) -> List[BaseSample]:
    return [
        BaseSample(i, frame, pose, pose.reference.copy(), dataset.intrinsics)
        for i, (frame, pose) in enumerate(zip(dataset.frames, dataset.annotations))
    ]


def normalized_poses(dataset: Dataset, cube_size: float) -> np.ndarray:
    """(N, 3J) annotations normalized to cubes centred on their MCP joint."""
    return np.stack([
        normalize_joints(pose, CropCube(tuple(pose.reference), cube_size))
        for pose in dataset.annotations
    ])


def prior_components(requested: int, n_poses: int, dim: int) -> int:
    k = min(requested, n_poses - 1, dim)
    if k < 1:
        raise InsufficientDataError(f"Cannot fit a prior on {n_poses} poses")
    if k != requested:
        logger.warning(f"Prior reduced from {requested} to {k} components ({n_poses} poses, dimension {dim})")
    return k


def fit_prior(dataset: Dataset, cfg: RunConfig) -> PcaPrior:
    """Plain or augmentation-robust PCA prior, as configured."""
    poses = normalized_poses(dataset, cfg.evaluation.cube_size_mm)
    arch = cfg.architecture
    if arch.robust_prior and cfg.augmentation.any_enabled:
        k = prior_components(arch.pca_components, arch.robust_prior_samples, poses.shape[1])
        rng = np.random.default_rng(derive_seed(cfg.seed, cfg.augmentation.seed, 1))
        return fit_robust_prior(poses, cfg.augmentation, arch.robust_prior_samples, k, rng,
                                cfg.evaluation.cube_size_mm)
    k = prior_components(arch.pca_components, len(poses), poses.shape[1])
    return fit_pca(poses, k)


def build_pose_network(cfg: RunConfig, prior: PcaPrior) -> Network:
    net = build_from_config(cfg.architecture, prior.num_joints, prior.k, cfg.dtype, cfg.seed)
    net.install_prior(*init_output_layer(prior))
    return net


def train_posenet(
    dataset: Dataset,
    cfg: RunConfig,
    on_epoch: EpochCallback = None,
    prior: Optional[PcaPrior] = None,
) -> TrainedPoseNet:
    if not len(dataset):
        raise InsufficientDataError("Cannot train on an empty dataset")
    prior = prior or fit_prior(dataset, cfg)
    net = build_pose_network(cfg, prior)

    stream = AugmentedStream(
        ground_truth_samples(dataset),
        cfg.augmentation,
        cube_size=cfg.evaluation.cube_size_mm,
        resolution=cfg.architecture.input_size(),
        seed=derive_seed(cfg.seed, cfg.augmentation.seed, 2),
    )
    opt = cfg.optimizer
    adam = AdamState(opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon)
    logger.info(f"Training {net.kind} ({net.parameter_count()} parameters) on {len(dataset)} frames "
                f"for {opt.epochs} epochs")
    net, history = train(net, stream, opt.epochs, opt.batch_size, adam,
                         seed=derive_seed(cfg.seed, 3), on_epoch=on_epoch)
    return TrainedPoseNet(net, prior, history)


def model_metadata(cfg: RunConfig, num_joints: int) -> dict:
    return {"cube_size_mm": cfg.evaluation.cube_size_mm, "num_joints": num_joints}


def run_training(
    data_path: Union[str, Path],
    out_path: Union[str, Path],
    cfg: RunConfig,
    on_epoch: EpochCallback = None,
    prior_path: Optional[Union[str, Path]] = None,
) -> dict:
    """Train a pose network on a dataset file and save it to ``out_path``."""
    try:
        dataset = load_dataset(data_path)
        prior = None
        if prior_path is not None:
            prior = load_prior(prior_path)
        result = train_posenet(dataset, cfg, on_epoch, prior)
    except DeepPriorError as e:
        logger.error(f"Training failed: {e}")
        return {"status": "error", "message": str(e), "error": e}

    save_model(out_path, result.net, result.prior, cfg.fingerprint(),
               model_metadata(cfg, result.prior.num_joints))
    return {
        "status": "success",
        "model": str(out_path),
        "frames": len(dataset),
        "epochs": len(result.history),
        "final_loss": result.history[-1] if result.history else None,
        "parameters": result.net.parameter_count(),
    }


def run_fit_prior(data_path: Union[str, Path], out_path: Union[str, Path], cfg: RunConfig) -> dict:
    try:
        dataset = load_dataset(data_path)
        prior = fit_prior(dataset, cfg)
    except DeepPriorError as e:
        logger.error(f"Prior fitting failed: {e}")
        return {"status": "error", "message": str(e), "error": e}
    save_prior(prior, out_path, cfg.fingerprint())
    return {
        "status": "success",
        "prior": str(out_path),
        "components": prior.k,
        "captured_variance": float(prior.eigenvalues.sum()),
    }
