from .params import AugmentParams, IDENTITY, sample_params, sample_params_batch, invert_params, active_flags
from .transforms import augment, augment_pose, augment_poses_batch, rotate_patch, rotate_joints
from .stream import AugmentedStream, BaseSample, Sample, stream, sample_rng

__all__ = [
    "AugmentParams", "IDENTITY", "sample_params", "sample_params_batch", "invert_params", "active_flags",
    "augment", "augment_pose", "augment_poses_batch", "rotate_patch", "rotate_joints",
    "AugmentedStream", "BaseSample", "Sample", "stream", "sample_rng",
]
