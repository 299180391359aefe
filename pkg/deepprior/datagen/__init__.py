from .hand_model import (
    JOINT_NAMES, NUM_JOINTS, HandModel, dof_names, forward_kinematics,
    sample_angles, sample_root, sample_pose,
)
from .renderer import render_depth, render_spheres, hand_spheres, scene_intrinsics
from .dataset import (
    Dataset, generate_dataset, split_by_subject, save_dataset, load_dataset, sidecar_path,
)
from .model_io import SavedModel, save_model, load_model, save_prior, load_prior

__all__ = [
    "JOINT_NAMES", "NUM_JOINTS", "HandModel", "dof_names", "forward_kinematics",
    "sample_angles", "sample_root", "sample_pose",
    "render_depth", "render_spheres", "hand_spheres", "scene_intrinsics",
    "Dataset", "generate_dataset", "split_by_subject", "save_dataset", "load_dataset", "sidecar_path",
    "SavedModel", "save_model", "load_model", "save_prior", "load_prior",
]
