"""Skeleton topologies, subject proportions and biomechanical
constraint projection.

A topology is a tree of named joints. Each non-root joint has a bone
from its parent, described by a rest offset in world axes (the rest
pose is a T-pose facing +Z, so every rest frame is aligned with the
world). The same ``Topology`` class describes the human body and any
retargeting target such as the cat avatar.
"""
import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from pawcap.body.joints import NUM_JOINTS, JointId
from pawcap.geometry.rotations import shortest_arc_matrices, twist_angles
from pawcap.geometry.stereo import RawPose3D
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data')

DEFAULT_HINGE_LIMITS = (0.0, 160.0)


class TopologyError(PawcapError):
    pass


class InsufficientObservations(PawcapError):
    def __init__(self, joints: List[str]) -> None:
        super().__init__('Too few observations for bones ending at: {}'
                         .format(', '.join(joints)))
        self.joints = joints


class MissingRoot(PawcapError):
    pass


class DegenerateDirection(PawcapError):
    pass


class Topology:
    """A tree of named joints with rest offsets.

    Args:
        names: Joint names, in index order.
        parents: Parent index per joint, -1 for the root.
        rest_offsets: (N, 3) offsets from the parent in the rest pose
            (m). The root's entry is its rest position.
        hinges: Hinge limits in degrees, keyed by the index of the
            hinge joint (e.g. an elbow).
        end_effectors: Declared end effector indices.
        synonyms: Name synonyms, this topology's name to a source name.

    Raises:
        TopologyError: If the joints do not form a single tree, a bone
            has zero length, or a hinge range is empty.
    """

    def __init__(self, names: Sequence[str], parents: Sequence[int],
                 rest_offsets: np.ndarray,
                 hinges: Optional[Dict[int, Tuple[float, float]]] = None,
                 end_effectors: Optional[Sequence[int]] = None,
                 synonyms: Optional[Dict[str, str]] = None) -> None:
        self.names = list(names)
        self.parents = [int(p) for p in parents]
        self.rest_offsets = np.asarray(rest_offsets, dtype=float).reshape(
            len(self.names), 3)
        self.hinges = dict(hinges or {})
        self.end_effectors = list(end_effectors or [])
        self.synonyms = dict(synonyms or {})
        self._index = {name: i for i, name in enumerate(self.names)}

        if len(self._index) != len(self.names):
            raise TopologyError('Duplicate joint names in topology')
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if len(roots) != 1:
            raise TopologyError('Topology must have exactly one root')
        self.root = roots[0]

        self.children = [[] for _ in self.names]  # type: List[List[int]]
        for i, p in enumerate(self.parents):
            if p >= len(self.names):
                raise TopologyError('Invalid parent of {}'.format(
                    self.names[i]))
            if p >= 0:
                self.children[p].append(i)
                if np.linalg.norm(self.rest_offsets[i]) <= 0.0:
                    raise TopologyError('Bone to {} has zero length'.format(
                        self.names[i]))

        self.order = []  # type: List[int]
        """Joint indices, parents before children."""
        self.levels = []  # type: List[np.ndarray]
        """Non-root joint indices grouped by depth, shallowest first."""
        level = [self.root]
        while level:
            self.order.extend(level)
            level = [c for j in level for c in self.children[j]]
            if level:
                self.levels.append(np.array(level, dtype=int))
        if len(self.order) != len(self.names):
            raise TopologyError('Topology contains a cycle')

        for j, (lo, hi) in self.hinges.items():
            if not lo < hi:
                raise TopologyError('Empty hinge range at {}'.format(
                    self.names[j]))
            if self.parents[j] < 0:
                raise TopologyError('The root cannot be a hinge')

        self.parent_array = np.array(self.parents, dtype=int)
        self.rest_lengths = np.linalg.norm(self.rest_offsets, axis=1)
        self.rest_lengths[self.root] = 0.0
        self.rest_directions = self.rest_offsets / np.where(
            self.rest_lengths > 0.0, self.rest_lengths, 1.0)[:, None]
        """Unit rest direction per bone; the root row is its position."""
        self.rest_positions = self._rest_positions()

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        """Index of the joint with this name.

        Raises:
            KeyError: If there is no such joint.
        """
        return self._index[name]

    def has_joint(self, name: str) -> bool:
        return name in self._index

    def path_from_root(self, j: int) -> List[int]:
        """Joint indices from the root down to j, inclusive."""
        path = [j]
        while self.parents[path[-1]] >= 0:
            path.append(self.parents[path[-1]])
        return path[::-1]

    def leaves(self) -> List[int]:
        return [j for j in range(len(self.names)) if not self.children[j]]

    def _rest_positions(self) -> np.ndarray:
        positions = np.zeros((len(self.names), 3))
        for j in self.order:
            p = self.parents[j]
            positions[j] = self.rest_offsets[j] if p < 0 else (
                positions[p] + self.rest_offsets[j])
        return positions

    def leg_length(self) -> float:
        """Rest height of the root above the lowest joint."""
        return float(self.rest_positions[self.root, 1] -
                     np.min(self.rest_positions[:, 1]))

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> 'Topology':
        """Build a topology from the skeleton JSON schema.

        Raises:
            TopologyError: If the description is invalid.
        """
        try:
            joints = data['joints']
            names = [joint['name'] for joint in joints]
            index = {name: i for i, name in enumerate(names)}
            parents = [-1 if joint['parent'] is None else index[joint['parent']]
                       for joint in joints]
            offsets = np.array([joint['rest_offset'] for joint in joints],
                               dtype=float)
            hinges = {index[name]: (float(lim[0]), float(lim[1]))
                      for name, lim in data.get('hinges', {}).items()}
            end_effectors = [index[name]
                             for name in data.get('end_effectors', [])]
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise TopologyError('Invalid skeleton description: {}'.format(e))
        return Topology(names, parents, offsets, hinges, end_effectors,
                        data.get('synonyms', {}))

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'joints': [{
                'name': name,
                'parent': (None if p < 0 else self.names[p]),
                'rest_offset': [float(x) for x in offset]
            } for name, p, offset in zip(self.names, self.parents,
                                         self.rest_offsets)],
            'hinges': {self.names[j]: [lo, hi]
                       for j, (lo, hi) in sorted(self.hinges.items())},
        }  # type: Dict[str, Any]
        if self.end_effectors:
            data['end_effectors'] = [self.names[j] for j in self.end_effectors]
        if self.synonyms:
            data['synonyms'] = dict(self.synonyms)
        return data


def load_topology(path: str) -> Topology:
    """Load a skeleton JSON file.

    Raises:
        TopologyError: If the file cannot be read or is invalid.
    """
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise TopologyError('Could not read skeleton file {}: {}'.format(
            path, e))
    return Topology.from_dict(data)


def load_human_topology(path: Optional[str] = None) -> Topology:
    """Load a human topology and check it follows the JointId order.

    Args:
        path: A skeleton file, defaults to the shipped T-pose.
    """
    if path is None:
        path = os.path.join(DATA_DIR, 'human_topology.json')
    topology = load_topology(path)
    expected = [joint.joint_name for joint in JointId]
    if topology.names != expected:
        raise TopologyError(
            'Human topology must list the {} body joints in canonical'
            ' order'.format(NUM_JOINTS))
    return topology


class SkeletonProportions:
    """Per-bone lengths of one subject.

    Args:
        bone_lengths: Length per joint of the bone ending there (m);
            the root's entry is ignored.
    """

    def __init__(self, bone_lengths: np.ndarray) -> None:
        self.bone_lengths = np.array(bone_lengths, dtype=float)

    @staticmethod
    def from_topology(topology: Topology) -> 'SkeletonProportions':
        """Proportions of the rest pose."""
        return SkeletonProportions(topology.rest_lengths.copy())

    def scaled(self, factor: float) -> 'SkeletonProportions':
        return SkeletonProportions(self.bone_lengths * factor)


class SkeletonPose:
    """Joint positions at one instant.

    Args:
        t: Timestamp (s).
        positions: (N, 3) world positions, NaN rows where missing.
        conf: (N,) confidences in [0, 1], 0 where missing.
    """

    def __init__(self, t: float, positions: np.ndarray,
                 conf: Optional[np.ndarray] = None) -> None:
        self.t = float(t)
        self.positions = np.array(positions, dtype=float)
        present = ~np.any(np.isnan(self.positions), axis=1)
        if conf is None:
            conf = np.where(present, 1.0, 0.0)
        self.conf = np.array(conf, dtype=float)

    @property
    def present(self) -> np.ndarray:
        return ~np.any(np.isnan(self.positions), axis=1)


def _bone_samples(topology: Topology, frames: Sequence[RawPose3D]
                  ) -> List[List[float]]:
    samples = [[] for _ in topology.names]  # type: List[List[float]]
    for frame in frames:
        present = frame.present
        for j, p in enumerate(topology.parents):
            if p >= 0 and present[j] and present[p]:
                samples[j].append(float(np.linalg.norm(
                    frame.positions[j] - frame.positions[p])))
    return samples


def estimate_proportions(frames: Sequence[RawPose3D],
                         topology: Topology,
                         min_samples: int = 15) -> SkeletonProportions:
    """Estimate bone lengths from a warm-up window of raw poses.

    Each bone's length is the median of its observed lengths, so the
    result does not depend on frame order and shrugs off outliers.

    Args:
        frames: Raw poses.
        topology: The human topology.
        min_samples: Observations needed per bone.

    Raises:
        InsufficientObservations: If some bone was seen in fewer than
            min_samples frames.
    """
    samples = _bone_samples(topology, frames)
    short = [topology.names[j] for j, p in enumerate(topology.parents)
             if p >= 0 and len(samples[j]) < min_samples]
    if short:
        raise InsufficientObservations(short)

    lengths = np.zeros(len(topology))
    for j, p in enumerate(topology.parents):
        if p >= 0:
            lengths[j] = float(np.median(samples[j]))
    return SkeletonProportions(lengths)


def update_proportions(current: SkeletonProportions, frame: RawPose3D,
                       topology: Topology, alpha: float = 0.02,
                       min_conf: float = 0.5) -> SkeletonProportions:
    """Blend confidently observed bone lengths into the proportions.

    Args:
        current: The current proportions.
        frame: A new raw pose.
        topology: The human topology.
        alpha: Blend weight of the new observation, in [0, 1].
        min_conf: Minimum confidence of both bone endpoints.

    Returns:
        New proportions; bones not observed keep their length.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError('alpha must be in [0, 1]')
    lengths = current.bone_lengths.copy()
    if alpha == 0.0:
        return SkeletonProportions(lengths)
    present = frame.present
    parents = topology.parent_array
    has_parent = parents >= 0
    p = np.where(has_parent, parents, topology.root)
    ok = (has_parent & present & present[p] & (frame.conf >= min_conf) &
          (frame.conf[p] >= min_conf))
    observed = np.linalg.norm(frame.positions[ok] - frame.positions[p[ok]],
                              axis=1)
    lengths[ok] = (1.0 - alpha) * lengths[ok] + alpha * observed
    return SkeletonProportions(lengths)


def _hinge_angle(upper: np.ndarray, lower: np.ndarray) -> float:
    """Flexion angle in degrees, 0 when the limb is straight."""
    cos_angle = float(upper @ lower / (
        np.linalg.norm(upper) * np.linalg.norm(lower)))
    return math.degrees(math.acos(max(-1.0, min(1.0, cos_angle))))


def _clamp_hinge(upper: np.ndarray, lower: np.ndarray,
                 limits: Tuple[float, float]) -> np.ndarray:
    """Rotate lower about the hinge axis into the allowed flexion range.

    Returns:
        The new lower limb vector, same length.
    """
    angle = _hinge_angle(upper, lower)
    lo, hi = limits
    if lo <= angle <= hi:
        return lower
    target = hi if angle > hi else lo

    axis = np.cross(upper, lower)
    if np.linalg.norm(axis) < 1e-12:
        axis = np.cross(upper, [0.0, 1.0, 0.0])
        if np.linalg.norm(axis) < 1e-12:
            axis = np.cross(upper, [1.0, 0.0, 0.0])
    axis = axis / np.linalg.norm(axis)

    u = upper / np.linalg.norm(upper)
    # direction at the target flexion, in the limb plane
    v = np.cross(axis, u)
    theta = math.radians(target)
    direction = math.cos(theta) * u + math.sin(theta) * v
    return direction * np.linalg.norm(lower)


def constrain_pose(topology: Topology, proportions: SkeletonProportions,
                   raw: RawPose3D) -> SkeletonPose:
    """Project a raw pose onto the bone lengths and hinge limits.

    One pass from the root outwards, a tree level at a time: each
    present joint is placed at exactly its bone length from its
    constrained parent, in the direction of its raw position. Children
    of hinge joints are then rotated about the hinge axis into the
    allowed flexion range. Joints whose parent is missing cannot be
    placed and are missing too.

    Raises:
        MissingRoot: If the root joint is missing.
    """
    root = topology.root
    present = raw.present
    if not present[root]:
        raise MissingRoot('Pose at t={} has no {}'.format(
            raw.t, topology.names[root]))

    positions = np.full((len(topology), 3), np.nan)
    conf = np.zeros(len(topology))
    positions[root] = raw.positions[root]
    conf[root] = raw.conf[root]
    placed = np.zeros(len(topology), dtype=bool)
    placed[root] = True

    for level in topology.levels:
        parents = topology.parent_array[level]
        ok = present[level] & placed[parents]
        joints, parents = level[ok], parents[ok]
        if len(joints) == 0:
            continue
        direction = raw.positions[joints] - positions[parents]
        norm = np.linalg.norm(direction, axis=1)
        coincident = norm < 1e-12
        direction[coincident] = topology.rest_directions[joints[coincident]]
        norm[coincident] = 1.0
        lower = direction * (proportions.bone_lengths[joints] / norm)[:, None]

        for k, (j, p) in enumerate(zip(joints, parents)):
            if p in topology.hinges:
                grandparent = topology.parents[p]
                if grandparent >= 0 and placed[grandparent]:
                    upper = positions[p] - positions[grandparent]
                    lower[k] = _clamp_hinge(upper, lower[k],
                                            topology.hinges[p])

        positions[joints] = positions[parents] + lower
        conf[joints] = raw.conf[joints]
        placed[joints] = True

    return SkeletonPose(raw.t, positions, conf)


def body_basis(positions: np.ndarray) -> np.ndarray:
    """The body frame of a human pose.

    Columns are right, up and forward: up is world +Y, right is the
    horizontal part of left hip to right hip, and forward = up x right
    points out of the chest.

    Raises:
        DegenerateDirection: If the hips coincide horizontally.
    """
    up = np.array([0.0, 1.0, 0.0])
    right = (positions[JointId.RIGHT_HIP] - positions[JointId.LEFT_HIP])
    right = right - up * float(right @ up)
    norm = float(np.linalg.norm(right))
    if not norm >= 1e-9:
        raise DegenerateDirection('Hips coincide, no body frame')
    right = right / norm
    forward = np.cross(up, right)
    return np.column_stack([right, up, forward])


class JointRotations:
    """Local rotations of a pose.

    ``local[j]`` rotates the rest direction of the bone ending at j,
    expressed in the frame of the parent's bone; ``root_rotation`` is
    the body frame relative to its rest orientation.
    """

    def __init__(self, t: float, local: Rotation, root_position: np.ndarray,
                 root_rotation: Rotation,
                 lengths: Optional[np.ndarray] = None) -> None:
        self.t = float(t)
        self.local = local
        self.root_position = np.asarray(root_position, dtype=float)
        self.root_rotation = root_rotation
        self.lengths = lengths
        """Bone lengths for forward kinematics, or None for rest."""


def pose_to_rotations(topology: Topology, pose: SkeletonPose,
                      previous: Optional[JointRotations] = None
                      ) -> JointRotations:
    """Decompose a full human pose into local bone rotations.

    Each local rotation takes the bone's rest direction to its observed
    direction in the parent's frame. Without ``previous`` it is the
    shortest arc. With the solution of the previous frame, the twist
    about the rest direction is chosen closest to that solution
    instead, so a stream of poses gives continuous rotations even
    where the shortest arc flips (a bone passing the opposite of its
    rest direction).

    Args:
        topology: The human topology.
        pose: A constraint-satisfying pose with every joint present.
        previous: The rotations of the preceding frame, if any.

    Raises:
        DegenerateDirection: If a joint is missing or a bone has zero
            length.
    """
    if not np.all(pose.present):
        raise DegenerateDirection('pose_to_rotations needs every joint')

    rest_basis = body_basis(topology.rest_positions)
    basis = body_basis(pose.positions)
    root_matrix = basis @ rest_basis.T

    root = topology.root
    parents = topology.parent_array
    bones = pose.positions - pose.positions[np.where(parents >= 0, parents,
                                                     root)]
    lengths = np.linalg.norm(bones, axis=1)
    lengths[root] = 0.0
    short = np.flatnonzero((parents >= 0) & (lengths < 1e-12))
    if short.size:
        raise DegenerateDirection('Bone to {} has zero length'.format(
            topology.names[short[0]]))

    n = len(topology)
    global_m = np.zeros((n, 3, 3))
    local_m = np.tile(np.eye(3), (n, 1, 1))
    global_m[root] = root_matrix
    prior = None if previous is None else previous.local

    for level in topology.levels:
        parent_m = global_m[parents[level]]
        observed = np.einsum('nji,nj->ni', parent_m, bones[level])
        rest = topology.rest_directions[level]
        local = shortest_arc_matrices(rest, observed)
        if prior is not None:
            arc = Rotation.from_matrix(local)
            angles = twist_angles(arc.inv() * prior[level], rest)
            local = (arc * Rotation.from_rotvec(
                rest * angles[:, None])).as_matrix()
        local_m[level] = local
        global_m[level] = parent_m @ local

    return JointRotations(pose.t, Rotation.from_matrix(local_m),
                          pose.positions[root],
                          Rotation.from_matrix(root_matrix), lengths)


def forward_kinematics(topology: Topology, local: Rotation,
                       root_position: np.ndarray, root_rotation: Rotation,
                       lengths: Optional[np.ndarray] = None) -> np.ndarray:
    """Joint positions from local rotations.

    Args:
        topology: The skeleton.
        local: One local rotation per joint (the root's is ignored).
        root_position: World position of the root.
        root_rotation: Orientation of the root frame.
        lengths: Bone lengths, defaults to the rest lengths.

    Returns:
        (N, 3) world positions.
    """
    if lengths is None:
        lengths = topology.rest_lengths
    n = len(topology)
    local_m = local.as_matrix().reshape(n, 3, 3)
    offsets = topology.rest_directions * np.asarray(lengths)[:, None]
    positions = np.zeros((n, 3))
    global_m = np.zeros((n, 3, 3))
    positions[topology.root] = root_position
    global_m[topology.root] = root_rotation.as_matrix()
    for level in topology.levels:
        parents = topology.parent_array[level]
        global_m[level] = global_m[parents] @ local_m[level]
        positions[level] = positions[parents] + np.einsum(
            'nij,nj->ni', global_m[level], offsets[level])
    return positions


def hinge_angles(topology: Topology, pose: SkeletonPose) -> Dict[int, float]:
    """Flexion angle (degrees) of every hinge with all three joints
    present."""
    angles = {}
    for h in topology.hinges:
        p = topology.parents[h]
        for c in topology.children[h]:
            if p >= 0 and pose.present[[p, h, c]].all():
                angles[h] = _hinge_angle(
                    pose.positions[h] - pose.positions[p],
                    pose.positions[c] - pose.positions[h])
    return angles
