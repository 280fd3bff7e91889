import json
import os

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pawcap.behaviour.features import (DegenerateBasis, FeatureExtractor,
                                       extract_features)
from pawcap.body.joints import JointId
from pawcap.body.skeleton import DATA_DIR, SkeletonPose
from pawcap.test.helpers import random_pose


def test_rest_pose_golden(human):
    with open(os.path.join(DATA_DIR, 'rest_features.json')) as f:
        golden = json.load(f)
    frame = extract_features(SkeletonPose(0.0, human.rest_positions))
    assert frame.torso_length == pytest.approx(golden['torso_length'])
    for name in ('left_wrist', 'right_wrist', 'left_shoulder',
                 'right_shoulder'):
        assert frame.joint(JointId.from_name(name)) == pytest.approx(
            golden[name], abs=1e-9)


def test_scale_invariance(human):
    rng = np.random.default_rng(3)
    pose = random_pose(human, rng)
    pelvis = pose.positions[JointId.PELVIS]
    scaled = SkeletonPose(0.0, pelvis + 2.0 * (pose.positions - pelvis))
    a = extract_features(pose)
    b = extract_features(scaled)
    assert b.positions == pytest.approx(a.positions, abs=1e-9)
    assert b.torso_length == pytest.approx(2.0 * a.torso_length)


def test_rigid_invariance(human):
    rng = np.random.default_rng(4)
    pose = random_pose(human, rng)
    turn = Rotation.from_euler('y', 90.0, degrees=True)
    moved = SkeletonPose(0.0, turn.apply(pose.positions) + [3.0, 0.0, 0.0])
    a = extract_features(pose)
    b = extract_features(moved)
    assert b.positions == pytest.approx(a.positions, abs=1e-9)


def test_wrist_velocity(human):
    extractor = FeatureExtractor()
    first = SkeletonPose(0.0, human.rest_positions)
    extractor.step(first)
    positions = human.rest_positions.copy()
    # subject's left is +X, the body frame's right axis is -X
    positions[JointId.LEFT_WRIST] += [0.05, 0.0, 0.0]
    frame = extractor.step(SkeletonPose(0.1, positions))
    assert frame.wrist_velocity[0] == pytest.approx([-1.0, 0.0, 0.0])
    assert frame.wrist_velocity[1] == pytest.approx([0.0, 0.0, 0.0])


def test_missing_wrist(human):
    positions = human.rest_positions.copy()
    positions[JointId.RIGHT_WRIST] = np.nan
    frame = extract_features(SkeletonPose(0.0, positions))
    assert not frame.has(JointId.RIGHT_WRIST)
    assert frame.has(JointId.LEFT_WRIST, JointId.LEFT_SHOULDER)


def test_degenerate(human):
    positions = human.rest_positions.copy()
    positions[JointId.NECK] = np.nan
    with pytest.raises(DegenerateBasis):
        extract_features(SkeletonPose(0.0, positions))

    positions = human.rest_positions.copy()
    positions[JointId.RIGHT_HIP] = positions[JointId.LEFT_HIP]
    with pytest.raises(DegenerateBasis):
        extract_features(SkeletonPose(0.0, positions))
