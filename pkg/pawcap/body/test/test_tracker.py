import numpy as np
import pytest

from pawcap.body.joints import NUM_JOINTS, JointId
from pawcap.body.skeleton import SkeletonPose
from pawcap.body.tracker import (JointTracker, NonMonotonicTimestamp,
                                 TrackerConfig)

DT = 1.0 / 30.0
VELOCITY = np.array([0.3, -0.1, 0.2])


def _moving_pose(i, missing=()):
    positions = np.tile([0.0, 1.0, 0.0], (NUM_JOINTS, 1)) + (
        np.arange(NUM_JOINTS)[:, None] * 0.05)
    positions = positions + VELOCITY * (i * DT)
    conf = np.full(NUM_JOINTS, 0.9)
    for j in missing:
        positions[j] = np.nan
        conf[j] = 0.0
    return SkeletonPose(i * DT, positions, conf)


def test_first_measurement():
    tracker = JointTracker(NUM_JOINTS)
    pose = _moving_pose(0)
    tracked = tracker.step(pose)
    assert np.array_equal(tracked.positions, pose.positions)
    assert np.all(tracked.velocities == 0.0)
    assert not np.any(tracked.coasting)


@pytest.mark.parametrize('alpha,beta', [(0.5, 0.1), (1.0, 1.0), (0.05, 0.9)])
def test_constant_velocity(alpha, beta):
    tracker = JointTracker(NUM_JOINTS, TrackerConfig(alpha, beta))
    for i in range(20):
        pose = _moving_pose(i)
        tracked = tracker.step(pose)
        if i >= 1:
            assert tracked.positions == pytest.approx(pose.positions,
                                                      abs=1e-9)
            assert tracked.velocities[5] == pytest.approx(VELOCITY, abs=1e-9)


def test_coasting():
    tracker = JointTracker(NUM_JOINTS)
    for i in range(5):
        tracker.step(_moving_pose(i))
    for i in range(5, 8):
        tracked = tracker.step(_moving_pose(i, missing=[JointId.RIGHT_WRIST]))
        assert tracked.coasting[JointId.RIGHT_WRIST]
        assert tracked.positions[JointId.RIGHT_WRIST] == pytest.approx(
            _moving_pose(i).positions[JointId.RIGHT_WRIST], abs=1e-9)
    assert tracked.conf[JointId.RIGHT_WRIST] == pytest.approx(0.9 * 0.8**3)
    assert not tracked.coasting[JointId.LEFT_WRIST]

    tracked = tracker.step(_moving_pose(8))
    assert not tracked.coasting[JointId.RIGHT_WRIST]
    assert tracked.conf[JointId.RIGHT_WRIST] == pytest.approx(0.9)


def test_lost_after_max_coast():
    tracker = JointTracker(NUM_JOINTS, TrackerConfig(max_coast=2))
    for i in range(3):
        tracker.step(_moving_pose(i))
    for i in range(3, 5):
        tracked = tracker.step(_moving_pose(i, missing=[JointId.NOSE]))
        assert tracked.present[JointId.NOSE]
    tracked = tracker.step(_moving_pose(5, missing=[JointId.NOSE]))
    assert not tracked.present[JointId.NOSE]
    assert tracked.conf[JointId.NOSE] == 0.0

    # reacquired cold
    pose = _moving_pose(6)
    tracked = tracker.step(pose)
    assert tracked.positions[JointId.NOSE] == pytest.approx(
        pose.positions[JointId.NOSE])
    assert np.all(tracked.velocities[JointId.NOSE] == 0.0)


def test_never_seen_joint_is_missing():
    tracker = JointTracker(NUM_JOINTS)
    tracked = tracker.step(_moving_pose(0, missing=[JointId.LEFT_TOE]))
    assert not tracked.present[JointId.LEFT_TOE]


def test_noise_is_reduced():
    rng = np.random.default_rng(11)
    tracker = JointTracker(NUM_JOINTS)
    raw = []
    filtered = []
    for i in range(300):
        positions = np.tile([0.2, 1.2, 0.1], (NUM_JOINTS, 1)) + rng.normal(
            0.0, 0.005, size=(NUM_JOINTS, 3))
        tracked = tracker.step(SkeletonPose(i * DT, positions))
        if i >= 30:
            raw.append(positions[JointId.HEAD])
            filtered.append(tracked.positions[JointId.HEAD])
    assert np.var(filtered, axis=0).sum() < np.var(raw, axis=0).sum()


def test_reset():
    tracker = JointTracker(NUM_JOINTS)
    for i in range(5):
        tracker.step(_moving_pose(i))
    tracker.reset()
    pose = _moving_pose(40)
    pose.positions[3] += 1.0
    tracked = tracker.step(pose)
    assert np.array_equal(tracked.positions, pose.positions)


def test_non_monotonic():
    tracker = JointTracker(NUM_JOINTS)
    tracker.step(_moving_pose(3))
    with pytest.raises(NonMonotonicTimestamp):
        tracker.step(_moving_pose(3))
    with pytest.raises(NonMonotonicTimestamp):
        tracker.step(_moving_pose(2))


def test_config_validation():
    with pytest.raises(ValueError):
        TrackerConfig(alpha=0.0)
    with pytest.raises(ValueError):
        TrackerConfig(beta=1.5)
    with pytest.raises(ValueError):
        TrackerConfig(max_coast=-1)
    with pytest.raises(ValueError):
        TrackerConfig(conf_decay=2.0)


def _noisy_stream(seed, count=60):
    rng = np.random.default_rng(seed)
    poses = []
    for i in range(count):
        pose = _moving_pose(i, missing=rng.choice(NUM_JOINTS, 3))
        pose.positions += rng.normal(0.0, 0.01, size=(NUM_JOINTS, 3))
        poses.append(pose)
    return poses


def test_determinism():
    poses = _noisy_stream(4)
    runs = []
    for _ in range(2):
        tracker = JointTracker(NUM_JOINTS)
        runs.append([tracker.step(p) for p in poses])
    for first, second in zip(*runs):
        assert np.array_equal(first.positions, second.positions,
                              equal_nan=True)
        assert np.array_equal(first.velocities, second.velocities,
                              equal_nan=True)
        assert np.array_equal(first.conf, second.conf)


def test_causality():
    poses = _noisy_stream(5)
    altered = _noisy_stream(5)
    for pose in altered[30:]:
        pose.positions += 0.5
    tracker_a = JointTracker(NUM_JOINTS)
    tracker_b = JointTracker(NUM_JOINTS)
    for i, (pa, pb) in enumerate(zip(poses, altered)):
        ta = tracker_a.step(pa)
        tb = tracker_b.step(pb)
        if i < 30:
            assert np.array_equal(ta.positions, tb.positions,
                                  equal_nan=True)
    assert not np.allclose(ta.positions, tb.positions, equal_nan=True)


def test_predict():
    tracker = JointTracker(NUM_JOINTS, TrackerConfig(max_coast=2))
    assert np.isnan(tracker.predict(0.0)).all()
    for i in range(5):
        tracker.step(_moving_pose(i, missing=[JointId.NOSE]))
    predicted = tracker.predict(5 * DT)
    assert predicted[JointId.HEAD] == pytest.approx(
        _moving_pose(5).positions[JointId.HEAD], abs=1e-9)
    assert np.isnan(predicted[JointId.NOSE]).all()
    # predicting leaves the filter untouched
    assert tracker.last_t == pytest.approx(4 * DT)

    tracker.step(_moving_pose(5, missing=[JointId.HEAD]))
    assert not np.isnan(tracker.predict(6 * DT)[JointId.HEAD]).any()
    tracker.step(_moving_pose(6, missing=[JointId.HEAD]))
    assert np.isnan(tracker.predict(7 * DT)[JointId.HEAD]).all()
