"""Builders shared by the test suites."""
import numpy as np

from pawcap.body.joints import NUM_JOINTS
from pawcap.body.skeleton import SkeletonPose, Topology, forward_kinematics
from pawcap.geometry.stereo import CameraModel, StereoRig
from scipy.spatial.transform import Rotation


def parallel_rig(k1=0.0, k2=0.0):
    """Two identity-rotation cameras, the right one 0.5 m along +X."""
    left = CameraModel(0, 1000.0, 1000.0, 960.0, 540.0, k1, k2)
    right = CameraModel(1, 1000.0, 1000.0, 960.0, 540.0, k1, k2,
                        np.eye(3), [-0.5, 0.0, 0.0])
    return StereoRig(left, right)


def rest_pose(topology, t=0.0, offset=(0.0, 0.0, 0.0)):
    positions = topology.rest_positions + np.asarray(offset)
    return SkeletonPose(t, positions, np.ones(len(topology)))


def random_local_rotations(topology, rng, max_angle=0.6):
    """Random small local rotations, hinge joints bent only about X."""
    rotvecs = rng.uniform(-max_angle, max_angle, size=(len(topology), 3))
    rotvecs[topology.root] = 0.0
    for hinge in topology.hinges:
        for child in topology.children[hinge]:
            rotvecs[child] = [rng.uniform(0.0, max_angle), 0.0, 0.0]
    return Rotation.from_rotvec(rotvecs)


def random_pose(topology, rng, t=0.0, lengths=None):
    """A pose built by forward kinematics, so bones have exact lengths."""
    local = random_local_rotations(topology, rng)
    root_rotation = Rotation.from_rotvec([0.0, rng.uniform(-np.pi, np.pi),
                                          0.0])
    root_position = topology.rest_positions[topology.root] + rng.uniform(
        -0.5, 0.5, size=3)
    positions = forward_kinematics(topology, local, root_position,
                                   root_rotation, lengths)
    return SkeletonPose(t, positions, np.ones(len(topology)))


def renamed_topology(topology, prefix='x_'):
    """The same tree with every name prefixed and no synonyms."""
    return Topology([prefix + name for name in topology.names],
                    topology.parents, topology.rest_offsets,
                    topology.hinges)


def empty_points():
    return np.full((NUM_JOINTS, 3), np.nan)


def interleave(left, right):
    """Merge two camera streams into one, frame by frame."""
    return [frame for pair in zip(left, right) for frame in pair]
