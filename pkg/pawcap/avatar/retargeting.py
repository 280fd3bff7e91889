"""Transfer of human motion onto a target skeleton of another shape.

A ``BoneMap`` binds every target joint it can to a source joint, or
to a point between two source joints on the same chain. Retargeting
then copies each source bone's rotation away from its rest direction
onto the bound target bone, so target bone lengths never change.
"""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from pawcap.body.skeleton import (JointRotations, SkeletonProportions,
                                  Topology, forward_kinematics)
from pawcap.geometry.rotations import (UnnormalizedRotation, canonical_quat,
                                       rotations_from_quats, slerp)
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

Binding = Tuple[int, int, float]
"""Source joints a and b and the weight of b; (s, s, 0.0) is direct."""


class NoCommonStructure(PawcapError):
    pass


class BoneMap:
    """Correspondence between a source and a target skeleton.

    Attributes:
        source: The source topology.
        target: The target topology.
        bindings: Target joint index to Binding.
        chains: Pairs of (source chain, target chain) joint index
            lists, root to end effector.
        chain_ratios: Target over source rest length, per chain.
        unmapped_source: Source joints used by no binding.
        unmapped_target: Target joints without a binding.
    """

    def __init__(self, source: Topology, target: Topology,
                 bindings: Dict[int, Binding],
                 chains: List[Tuple[List[int], List[int]]],
                 chain_ratios: List[float]) -> None:
        self.source = source
        self.target = target
        self.bindings = dict(bindings)
        self.chains = list(chains)
        self.chain_ratios = list(chain_ratios)

        used = set()
        for a, b, w in self.bindings.values():
            used.add(a)
            if w > 0.0:
                used.add(b)
        self.unmapped_source = [j for j in range(len(source))
                                if j not in used]
        self.unmapped_target = [j for j in range(len(target))
                                if j not in self.bindings]

    def to_dict(self) -> Dict[str, Any]:
        src = self.source.names
        tgt = self.target.names
        return {
            'bindings': {
                tgt[t]: [src[a], src[b], w]
                for t, (a, b, w) in sorted(self.bindings.items())},
            'chains': [[[src[j] for j in s], [tgt[j] for j in t]]
                       for s, t in self.chains],
            'chain_ratios': list(self.chain_ratios),
            'unmapped_source': [src[j] for j in self.unmapped_source],
            'unmapped_target': [tgt[j] for j in self.unmapped_target],
        }


def _match_names(source: Topology, target: Topology) -> Dict[int, int]:
    matches = {}
    for t, name in enumerate(target.names):
        if source.has_joint(name):
            matches[t] = source.index(name)
        elif source.has_joint(target.synonyms.get(name, '')):
            matches[t] = source.index(target.synonyms[name])
    return matches


def _cumulative(topology: Topology, chain: Sequence[int]) -> np.ndarray:
    lengths = np.array([0.0] + [topology.rest_lengths[j]
                                for j in chain[1:]])
    total = np.cumsum(lengths)
    return total / total[-1]


def _distribute(source: Topology, target: Topology,
                src_segment: List[int], tgt_segment: List[int]
                ) -> Dict[int, Binding]:
    """Bind the interior joints of a target segment to points along
    the source segment with the same fraction of rest length."""
    src_frac = _cumulative(source, src_segment)
    tgt_frac = _cumulative(target, tgt_segment)
    bindings = {}
    for t, f in zip(tgt_segment[1:-1], tgt_frac[1:-1]):
        k = int(np.searchsorted(src_frac, f, side='right')) - 1
        k = min(max(k, 0), len(src_segment) - 2)
        width = src_frac[k + 1] - src_frac[k]
        weight = float((f - src_frac[k]) / width)
        if weight <= 0.0:
            bindings[t] = (src_segment[k], src_segment[k], 0.0)
        else:
            bindings[t] = (src_segment[k], src_segment[k + 1], weight)
    return bindings


def auto_map(source: Topology, target: Topology) -> BoneMap:
    """Find a bone mapping between two skeletons.

    Joints are first matched by name, directly or through the target's
    synonym table. Then every target chain from the root to an end
    effector (declared, or a leaf) whose end effector was matched is
    aligned with the source chain ending at its match, and the
    unmatched joints between two matched ones are spread over the
    source segment by rest length.

    Raises:
        NoCommonStructure: If no chain could be aligned.
    """
    matches = _match_names(source, target)
    bindings = {t: (s, s, 0.0) for t, s in matches.items()}

    endpoints = []  # type: List[int]
    for j in list(target.end_effectors) + target.leaves():
        if j not in endpoints:
            endpoints.append(j)

    chains = []  # type: List[Tuple[List[int], List[int]]]
    ratios = []  # type: List[float]
    for end in endpoints:
        if end not in matches:
            continue
        tgt_chain = target.path_from_root(end)
        src_chain = source.path_from_root(matches[end])
        src_pos = {s: i for i, s in enumerate(src_chain)}

        anchors = [(i, src_pos[matches[t]]) for i, t in enumerate(tgt_chain)
                   if t in matches and matches[t] in src_pos]
        # keep anchors whose source positions run down the chain
        ordered = []  # type: List[Tuple[int, int]]
        for anchor in anchors:
            if not ordered or anchor[1] > ordered[-1][1]:
                ordered.append(anchor)

        for (ti, si), (tj, sj) in zip(ordered, ordered[1:]):
            if tj - ti < 2:
                continue
            for t, binding in _distribute(
                    source, target, src_chain[si:sj + 1],
                    tgt_chain[ti:tj + 1]).items():
                bindings.setdefault(t, binding)

        chains.append((src_chain, tgt_chain))
        src_len = float(sum(source.rest_lengths[j] for j in src_chain))
        tgt_len = float(sum(target.rest_lengths[j] for j in tgt_chain))
        ratios.append(tgt_len / src_len if src_len > 0.0 else 1.0)

    if not chains:
        raise NoCommonStructure(
            'No chain of the target skeleton corresponds to the source')

    bone_map = BoneMap(source, target, bindings, chains, ratios)
    _logger.info('Mapped {} of {} target joints over {} chains'.format(
        len(bone_map.bindings), len(target), len(chains)))
    return bone_map


class AvatarPose:
    """A pose of the target skeleton.

    Args:
        t: Timestamp (s).
        local: Local rotation per target joint.
        root_position: Root position (m).
        root_rotation: Root orientation.
    """

    def __init__(self, t: float, local: Rotation, root_position: np.ndarray,
                 root_rotation: Rotation) -> None:
        self.t = float(t)
        self.local = local
        self.root_position = np.asarray(root_position, dtype=float)
        self.root_rotation = root_rotation

    @staticmethod
    def rest(target: Topology, t: float = 0.0) -> 'AvatarPose':
        return AvatarPose(t, Rotation.identity(len(target)),
                          target.rest_positions[target.root],
                          Rotation.identity())

    def positions(self, target: Topology) -> np.ndarray:
        """World joint positions by forward kinematics."""
        return forward_kinematics(target, self.local, self.root_position,
                                  self.root_rotation)

    def to_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'root': [float(x) for x in self.root_position],
            'root_rotation': [float(x)
                              for x in canonical_quat(self.root_rotation)],
            'rotations': [[float(x) for x in canonical_quat(q)]
                          for q in self.local],
        }

    @staticmethod
    def from_dict(record: Dict[str, Any]) -> 'AvatarPose':
        """Parse an animation record.

        Raises:
            UnnormalizedRotation: If a quaternion is not unit length.
        """
        return AvatarPose(
            record['t'], rotations_from_quats(record['rotations']),
            np.array(record['root'], dtype=float),
            rotations_from_quats(record['root_rotation'])[0])


def _leg_length(topology: Topology,
                proportions: Optional[SkeletonProportions]) -> float:
    rest = topology.leg_length()
    if proportions is None:
        return rest
    lowest = int(np.argmin(topology.rest_positions[:, 1]))
    path = topology.path_from_root(lowest)[1:]
    rest_sum = float(sum(topology.rest_lengths[j] for j in path))
    actual = float(sum(proportions.bone_lengths[j] for j in path))
    if rest_sum <= 0.0 or not actual > 0.0:
        return rest
    return rest * actual / rest_sum


def _idle_rotvecs(target: Topology, joints: Sequence[int], t: float,
                  amplitude_deg: float) -> np.ndarray:
    """Tail sway and ear flick of unmapped joints, as rotation vectors;
    other unmapped joints stay at rest."""
    axes = np.zeros((len(joints), 3))
    depths = np.zeros(len(joints))
    for k, j in enumerate(joints):
        name = target.names[j]
        depths[k] = len(target.path_from_root(j)) - 1
        if 'tail' in name:
            axes[k] = [0.0, 1.0, 0.0]
        elif 'ear' in name:
            axes[k] = [0.0, 0.0, 0.25]
    phase = 2.0 * np.pi * 0.5 * t + depths * np.pi / 4.0
    return axes * (np.radians(amplitude_deg) * np.sin(phase))[:, None]


def retarget_pose(bone_map: BoneMap, source_rotations: JointRotations,
                  proportions: Optional[SkeletonProportions] = None,
                  idle_amplitude_deg: float = 10.0) -> AvatarPose:
    """Pose the target skeleton like the source.

    Args:
        bone_map: From auto_map.
        source_rotations: Source local rotations, as from
            pose_to_rotations. ``local`` may also be an (N, 4)
            quaternion array.
        proportions: The subject's bone lengths, for scaling the root
            translation; rest lengths if None.
        idle_amplitude_deg: Amplitude of the idle tail sway and ear
            flick of unmapped joints; 0 holds them at rest.

    Raises:
        UnnormalizedRotation: If an input quaternion is not unit norm.
    """
    source = bone_map.source
    target = bone_map.target
    local_src = rotations_from_quats(source_rotations.local)
    if len(local_src) != len(source):
        raise UnnormalizedRotation(
            'Expected {} source rotations, got {}'.format(
                len(source), len(local_src)))
    t = source_rotations.t

    quats = np.tile([0.0, 0.0, 0.0, 1.0], (len(target), 1))
    bound = [j for j in sorted(bone_map.bindings) if j != target.root]
    if bound:
        triples = np.array([bone_map.bindings[j] for j in bound])
        a = triples[:, 0].astype(int)
        b = triples[:, 1].astype(int)
        quats[bound] = slerp(local_src[a], local_src[b],
                             triples[:, 2]).as_quat()
    idle = [j for j in bone_map.unmapped_target if j != target.root]
    if idle:
        quats[idle] = Rotation.from_rotvec(_idle_rotvecs(
            target, idle, t, idle_amplitude_deg)).as_quat()

    ratio = target.leg_length() / _leg_length(source, proportions)
    src_rest_root = source.rest_positions[source.root]
    reference = src_rest_root * np.array(
        [1.0, _leg_length(source, proportions) / source.leg_length(), 1.0])
    root = (target.rest_positions[target.root] +
            ratio * (source_rotations.root_position - reference))

    return AvatarPose(t, Rotation.from_quat(quats), root,
                      source_rotations.root_rotation)
