"""
Refinement network training.

Crops are centred on the centre-of-mass estimate; the target is the
offset to the middle-finger MCP in cube-normalized units, clipped to
[-1, 1]. Scale augmentation is never used here because the predicted
offset is converted back with the nominal cube size.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

from deepprior.augmentation.stream import AugmentedStream, BaseSample
from deepprior.datagen.dataset import Dataset, load_dataset
from deepprior.datagen.model_io import save_model
from deepprior.errors import DeepPriorError, InsufficientDataError, NoHandError
from deepprior.geometry.frames import Pose3D
from deepprior.localization.segmentation import locate_center_of_mass
from deepprior.models.run_config import AugmentConfig, RunConfig
from deepprior.neuralnet.adam import AdamState
from deepprior.neuralnet.architectures import build_refinenet
from deepprior.neuralnet.network import Network
from deepprior.neuralnet.trainer import train
from deepprior.tasks.training_task import EpochCallback, derive_seed, model_metadata

logger = logging.getLogger(__name__)


def refiner_augmentation(cfg: AugmentConfig) -> AugmentConfig:
    return cfg.model_copy(update={"enable_scale": False})


def center_of_mass_samples(dataset: Dataset, extent: float) -> List[BaseSample]:
    samples = []
    for i, (frame, pose) in enumerate(zip(dataset.frames, dataset.annotations)):
        try:
            com = locate_center_of_mass(frame, dataset.intrinsics, extent)
        except NoHandError:
            logger.warning(f"Frame {i}: no hand pixels, skipped for refiner training")
            continue
        samples.append(BaseSample(i, frame, Pose3D(pose.joints[:1]), com.array, dataset.intrinsics))
    if not samples:
        raise InsufficientDataError("No frame yields a centre-of-mass estimate")
    return samples


def train_refiner(dataset: Dataset, cfg: RunConfig, on_epoch: EpochCallback = None) -> Tuple[Network, List[float]]:
    net = build_refinenet(cfg.architecture.scale, cfg.architecture.fc_width, cfg.architecture.dropout_rate,
                          cfg.dtype, derive_seed(cfg.seed, 10))
    stream = AugmentedStream(
        center_of_mass_samples(dataset, cfg.evaluation.segment_extent_mm),
        refiner_augmentation(cfg.augmentation),
        cube_size=cfg.evaluation.cube_size_mm,
        resolution=net.input_shape[1],
        seed=derive_seed(cfg.seed, cfg.augmentation.seed, 11),
        target_clip=1.0,
    )
    opt = cfg.optimizer
    adam = AdamState(opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon)
    logger.info(f"Training refiner on {len(stream)} frames for {cfg.refiner_epochs} epochs")
    return train(net, stream, cfg.refiner_epochs, opt.batch_size, adam,
                 seed=derive_seed(cfg.seed, 12), on_epoch=on_epoch)


def run_refiner_training(
    data_path: Union[str, Path],
    out_path: Union[str, Path],
    cfg: RunConfig,
    on_epoch: EpochCallback = None,
) -> dict:
    try:
        dataset = load_dataset(data_path)
        net, history = train_refiner(dataset, cfg, on_epoch)
    except DeepPriorError as e:
        logger.error(f"Refiner training failed: {e}")
        return {"status": "error", "message": str(e), "error": e}

    save_model(out_path, net, None, cfg.fingerprint(), model_metadata(cfg, 1))
    return {
        "status": "success",
        "model": str(out_path),
        "frames": len(dataset),
        "epochs": len(history),
        "final_loss": history[-1] if history else None,
    }
