"""
Articulated synthetic hand.

Fourteen joints in a kinematic tree rooted at the middle-finger MCP:

    0 middle_mcp   1 wrist        2 index_mcp    3 pinky_mcp
    4 thumb_mcp    5 thumb_tip    6 index_pip    7 index_tip
    8 middle_pip   9 middle_tip  10 ring_pip    11 ring_tip
   12 pinky_pip   13 pinky_tip

In the rest pose the palm lies in the camera's x/y plane facing the
camera, fingers pointing towards -y (up in the image). Positive flexion
curls a finger towards the camera.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from deepprior.errors import DomainError
from deepprior.geometry.frames import Pose3D
from deepprior.models.run_config import SceneConfig

JOINT_NAMES = (
    "middle_mcp", "wrist", "index_mcp", "pinky_mcp", "thumb_mcp", "thumb_tip",
    "index_pip", "index_tip", "middle_pip", "middle_tip", "ring_pip", "ring_tip",
    "pinky_pip", "pinky_tip",
)
NUM_JOINTS = len(JOINT_NAMES)
FINGERS = ("thumb", "index", "middle", "ring", "pinky")


@dataclass(frozen=True)
class JointDef:
    name: str
    parent: int              # -1 for the root
    offset: Tuple[float, float, float]
    abduction: Optional[str] = None   # DOF name rotating about the palm normal (z)
    flexion: Optional[str] = None     # DOF name rotating about the palm x axis
    radius: float = 8.0


@dataclass
class HandModel:
    """Per-subject hand geometry in millimetres."""
    palm_width: float = 80.0
    palm_length: float = 85.0
    palm_thickness: float = 24.0
    # (proximal, distal) segment lengths per finger
    finger_lengths: Dict[str, Tuple[float, float]] = field(default_factory=lambda: {
        "thumb": (40.0, 32.0),
        "index": (42.0, 40.0),
        "middle": (46.0, 44.0),
        "ring": (44.0, 40.0),
        "pinky": (34.0, 32.0),
    })
    finger_radius: float = 8.5

    def __post_init__(self):
        lengths = [v for pair in self.finger_lengths.values() for v in pair]
        if min(lengths + [self.palm_width, self.palm_length, self.finger_radius]) <= 0:
            raise DomainError("Hand segment lengths and radii must be positive")

    def scaled(self, factor: float) -> "HandModel":
        return HandModel(
            self.palm_width * factor,
            self.palm_length * factor,
            self.palm_thickness * factor,
            {k: (a * factor, b * factor) for k, (a, b) in self.finger_lengths.items()},
            self.finger_radius * factor,
        )

    def joints(self) -> List[JointDef]:
        w, l = self.palm_width, self.palm_length
        fl = self.finger_lengths
        r = self.finger_radius
        palm_r = self.palm_thickness / 2.0
        ring_x = w / 6.0
        return [
            JointDef("middle_mcp", -1, (0.0, 0.0, 0.0), radius=palm_r),
            JointDef("wrist", 0, (0.0, l, 0.0), radius=palm_r),
            JointDef("index_mcp", 0, (-w / 3.0, 0.04 * l, 0.0), radius=palm_r),
            JointDef("pinky_mcp", 0, (w / 2.5, 0.12 * l, 0.0), radius=palm_r),
            JointDef("thumb_mcp", 1, (-0.55 * w, -0.4 * l, 0.0), "thumb_abd", "thumb_flex1", r * 1.1),
            JointDef("thumb_tip", 4, (-0.35 * fl["thumb"][1], -0.94 * fl["thumb"][1], 0.0),
                     None, "thumb_flex2", r),
            JointDef("index_pip", 2, (0.0, -fl["index"][0], 0.0), "index_abd", "index_flex1", r),
            JointDef("index_tip", 6, (0.0, -fl["index"][1], 0.0), None, "index_flex2", r * 0.9),
            JointDef("middle_pip", 0, (0.0, -fl["middle"][0], 0.0), "middle_abd", "middle_flex1", r),
            JointDef("middle_tip", 8, (0.0, -fl["middle"][1], 0.0), None, "middle_flex2", r * 0.9),
            JointDef("ring_pip", 0, (ring_x, -fl["ring"][0], 0.0), "ring_abd", "ring_flex1", r),
            JointDef("ring_tip", 10, (0.0, -fl["ring"][1], 0.0), None, "ring_flex2", r * 0.9),
            JointDef("pinky_pip", 3, (0.0, -fl["pinky"][0], 0.0), "pinky_abd", "pinky_flex1", r * 0.9),
            JointDef("pinky_tip", 12, (0.0, -fl["pinky"][1], 0.0), None, "pinky_flex2", r * 0.8),
        ]

    def bones(self) -> List[Tuple[int, int, float]]:
        """(parent, child, radius) for every segment, plus the palm cross-braces."""
        defs = self.joints()
        bones = [(d.parent, i, min(d.radius, defs[d.parent].radius)) for i, d in enumerate(defs) if d.parent >= 0]
        palm_r = self.palm_thickness / 2.0
        bones += [(2, 3, palm_r), (1, 2, palm_r), (1, 3, palm_r)]
        return bones

    def segment_length(self, child: int) -> float:
        return float(np.linalg.norm(self.joints()[child].offset))


def dof_names() -> List[str]:
    names = ["roll", "pitch", "yaw"]
    for finger in FINGERS:
        names += [f"{finger}_abd", f"{finger}_flex1", f"{finger}_flex2"]
    return names


def _rx(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def forward_kinematics(model: HandModel, angles: Dict[str, float], root: np.ndarray) -> Pose3D:
    """Joint positions for DOF angles (radians) with the MCP root placed at ``root``."""
    defs = model.joints()
    global_rot = _rz(angles.get("roll", 0.0)) @ _ry(angles.get("yaw", 0.0)) @ _rx(angles.get("pitch", 0.0))
    positions = np.zeros((len(defs), 3))
    rotations = [np.eye(3)] * len(defs)
    for i, d in enumerate(defs):
        if d.parent < 0:
            positions[i] = root
            rotations[i] = global_rot
            continue
        local = np.eye(3)
        if d.abduction:
            local = local @ _rz(angles.get(d.abduction, 0.0))
        if d.flexion:
            local = local @ _rx(angles.get(d.flexion, 0.0))
        rotations[i] = rotations[d.parent] @ local
        positions[i] = positions[d.parent] + rotations[i] @ np.asarray(d.offset)
    return Pose3D(positions)


def sample_angles(cfg: SceneConfig, rng: np.random.Generator) -> Dict[str, float]:
    """Joint angles drawn uniformly within the configured limits (radians)."""
    roll = np.deg2rad(cfg.max_roll_deg)
    tilt = np.deg2rad(cfg.max_tilt_deg)
    flex = np.deg2rad(cfg.max_flexion_deg)
    abd = np.deg2rad(cfg.max_abduction_deg)
    angles = {
        "roll": rng.uniform(-roll, roll),
        "pitch": rng.uniform(-tilt, tilt),
        "yaw": rng.uniform(-tilt, tilt),
    }
    for finger in FINGERS:
        angles[f"{finger}_abd"] = rng.uniform(-abd, abd)
        angles[f"{finger}_flex1"] = rng.uniform(0.0, flex)
        angles[f"{finger}_flex2"] = rng.uniform(0.0, flex)
    return {k: float(v) for k, v in angles.items()}


def sample_root(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Hand MCP position: depth uniform in range, image position near the principal point."""
    z = rng.uniform(cfg.distance_min_mm, cfg.distance_max_mm)
    margin_u = 0.15 * cfg.width
    margin_v = 0.15 * cfg.height
    u = cfg.cx + rng.uniform(-margin_u, margin_u)
    v = cfg.cy + rng.uniform(-margin_v, margin_v)
    return np.array([(u - cfg.cx) * z / cfg.fx, (v - cfg.cy) * z / cfg.fy, z])


def sample_pose(model: HandModel, cfg: SceneConfig, rng: np.random.Generator):
    """Random joint angles plus the resulting pose."""
    angles = sample_angles(cfg, rng)
    root = sample_root(cfg, rng)
    return angles, forward_kinematics(model, angles, root)
