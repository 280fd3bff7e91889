"""Body-centric, scale-free features of a tracked pose.

Positions are expressed in the body frame (right, up, forward) with
the pelvis at the origin, and divided by the torso length T (pelvis to
neck), so subjects of any size, standing anywhere and facing any
horizontal direction, give the same features.
"""
from typing import Optional

import numpy as np

from pawcap.body.joints import JointId
from pawcap.body.skeleton import DegenerateDirection, SkeletonPose, body_basis
from pawcap.util import PawcapError

WRISTS = (JointId.LEFT_WRIST, JointId.RIGHT_WRIST)


class DegenerateBasis(PawcapError):
    pass


class FeatureFrame:
    """Features of one pose.

    Attributes:
        t: Timestamp (s).
        torso_length: T, in meters.
        origin: Pelvis world position.
        basis: 3x3 matrix with columns right, up, forward.
        positions: (N, 3) body-frame positions in units of T, NaN
            where missing.
        conf: (N,) joint confidences.
        wrist_velocity: (2, 3) left and right wrist velocities in the
            body frame (T/s), by backward difference.
    """

    def __init__(self, t: float, torso_length: float, origin: np.ndarray,
                 basis: np.ndarray, positions: np.ndarray, conf: np.ndarray,
                 wrist_velocity: np.ndarray) -> None:
        self.t = t
        self.torso_length = torso_length
        self.origin = origin
        self.basis = basis
        self.positions = positions
        self.conf = conf
        self.wrist_velocity = wrist_velocity

    def joint(self, joint: JointId) -> np.ndarray:
        return self.positions[joint]

    def height(self, joint: JointId) -> float:
        return float(self.positions[joint, 1])

    def has(self, *joints: JointId) -> bool:
        return not np.any(np.isnan(self.positions[list(joints)]))


def extract_features(pose: SkeletonPose,
                     previous: Optional[FeatureFrame] = None
                     ) -> FeatureFrame:
    """Compute the features of a pose.

    Args:
        pose: A tracked (or constrained) pose.
        previous: Features of the preceding frame, for velocities.

    Raises:
        DegenerateBasis: If the pelvis, neck or hips are missing, the
            hips coincide, or the torso is shorter than 1 um.
    """
    needed = [JointId.PELVIS, JointId.NECK, JointId.LEFT_HIP,
              JointId.RIGHT_HIP]
    if not np.all(pose.present[needed]):
        raise DegenerateBasis('Pose at t={} lacks pelvis, neck or hips'
                              .format(pose.t))
    origin = pose.positions[JointId.PELVIS]
    torso = float(np.linalg.norm(pose.positions[JointId.NECK] - origin))
    if torso < 1e-6:
        raise DegenerateBasis('Torso length vanishes at t={}'.format(pose.t))
    try:
        basis = body_basis(pose.positions)
    except DegenerateDirection as e:
        raise DegenerateBasis(str(e))

    positions = (pose.positions - origin) @ basis / torso

    velocity = np.zeros((2, 3))
    if previous is not None and pose.t > previous.t:
        dt = pose.t - previous.t
        for side, wrist in enumerate(WRISTS):
            now = positions[wrist]
            before = previous.positions[wrist]
            if not (np.any(np.isnan(now)) or np.any(np.isnan(before))):
                velocity[side] = (now - before) / dt

    return FeatureFrame(pose.t, torso, origin, basis, positions,
                        pose.conf.copy(), velocity)


class FeatureExtractor:
    """Stateful wrapper remembering the previous frame for velocities.

    Frames that cannot be featurised are skipped and do not break the
    velocity chain.
    """

    def __init__(self) -> None:
        self._previous = None  # type: Optional[FeatureFrame]

    def reset(self) -> None:
        self._previous = None

    def step(self, pose: SkeletonPose) -> FeatureFrame:
        """Featurise a pose.

        Raises:
            DegenerateBasis: As extract_features.
        """
        frame = extract_features(pose, self._previous)
        self._previous = frame
        return frame
