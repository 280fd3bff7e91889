import json

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from pawcap.avatar.retargeting import AvatarPose
from pawcap.behaviour.events import GestureEvent, GestureKind
from pawcap.behaviour.fusion import AUDIO, VISUAL, Emotion, UserState
from pawcap.body.skeleton import SkeletonPose
from pawcap.geometry.stereo import KeypointFrame2D
from pawcap.pipeline.streams import (MalformedRecord, keypoints_to_dict,
                                     pose_to_dict, read_events, read_jsonl,
                                     read_keypoints, read_poses,
                                     read_user_states, split_cameras,
                                     write_jsonl)


def _keypoints(t, cam):
    points = np.tile([960.0, 540.0, 0.9], (32, 1))
    points[14] = np.nan
    return KeypointFrame2D(t, cam, points)


def test_keypoint_stream(tmpdir):
    path = str(tmpdir / 'keypoints.jsonl')
    frames = [_keypoints(0.0, 0), _keypoints(0.0, 1), _keypoints(1 / 30, 0)]
    assert write_jsonl(path, (keypoints_to_dict(f) for f in frames)) == 3

    with open(path) as f:
        first = json.loads(f.readline())
    assert first['pts'][14] is None
    assert first['pts'][0] == [960.0, 540.0, 0.9]

    parsed = read_keypoints(path)
    assert [f.cam for f in parsed] == [0, 1, 0]
    assert not parsed[0].present[14]
    assert np.array_equal(parsed[2].points, frames[2].points, equal_nan=True)


def test_pose_stream(tmpdir):
    positions = np.zeros((32, 3))
    positions[:, 1] = np.arange(32) * 0.05
    positions[7] = np.nan
    conf = np.ones(32)
    conf[7] = 0.0
    path = str(tmpdir / 'poses.jsonl')
    write_jsonl(path, [pose_to_dict(SkeletonPose(0.5, positions, conf))])
    pose = read_poses(path)[0]
    assert pose.t == 0.5
    assert not pose.present[7]
    assert pose.conf[7] == 0.0
    assert pose.positions[31] == pytest.approx([0.0, 1.55, 0.0])


def test_event_stream(tmpdir):
    path = str(tmpdir / 'events.jsonl')
    event = GestureEvent(GestureKind.GREETING_WAVE, 1.0, 1.75, 0.8)
    write_jsonl(path, [event.to_dict()])
    assert read_events(path) == [event]


def test_blank_lines_skipped(tmpdir):
    path = tmpdir / 'events.jsonl'
    path.write_text('\n{"kind": "HeartShape", "t_start": 1.0,'
                    ' "t_end": 2.0}\n\n', 'utf-8')
    assert len(read_events(str(path))) == 1


@pytest.mark.parametrize('bad_line', [
    'not json',
    '[1, 2, 3]',
    '{"kind": "Shrug", "t_start": 1.0, "t_end": 2.0}',
    '{"kind": "HeartShape", "t_start": 1.0}',
])
def test_malformed_event(tmpdir, bad_line):
    path = tmpdir / 'events.jsonl'
    good = '{"kind": "HeartShape", "t_start": 1.0, "t_end": 2.0}'
    path.write_text('\n'.join([good, '', bad_line, good]) + '\n', 'utf-8')
    with pytest.raises(MalformedRecord) as e:
        read_events(str(path))
    assert e.value.line == 3
    assert ':3:' in str(e.value)


def test_malformed_keypoints(tmpdir):
    path = tmpdir / 'keypoints.jsonl'
    path.write_text(json.dumps({'t': 0.0, 'cam': 0, 'pts': [None] * 31}) +
                    '\n', 'utf-8')
    with pytest.raises(MalformedRecord):
        read_keypoints(str(path))

    path.write_text(json.dumps(
        {'t': 0.0, 'cam': 0, 'pts': [[1.0, 2.0, 3.0]] * 32}) + '\n', 'utf-8')
    with pytest.raises(MalformedRecord):
        read_keypoints(str(path))


def test_split_cameras():
    frames = [_keypoints(0.0, 0), _keypoints(0.0, 1), _keypoints(0.0, 7),
              _keypoints(0.1, 1)]
    streams = split_cameras(frames, 0, 1)
    assert [f.t for f in streams[0]] == [0.0]
    assert [f.t for f in streams[1]] == [0.0, 0.1]


def test_user_state_stream(tmpdir):
    path = str(tmpdir / 'user_states.jsonl')
    state = UserState(2.0, Emotion.HAPPY, 0.7, GestureKind.HEART_SHAPE,
                      {AUDIO, VISUAL})
    write_jsonl(path, [state.to_dict()])
    assert read_user_states(path) == [state]


def test_animation_record_error_has_line(tmpdir):
    path = str(tmpdir / 'animation.jsonl')
    pose = AvatarPose(0.5, Rotation.from_euler('y', np.full(26, 20.0),
                                               degrees=True),
                      [0.0, 0.25, 0.0], Rotation.identity())
    good = pose.to_dict()
    bad = pose.to_dict()
    bad['rotations'][3] = [0.0, 0.0, 0.0, 2.0]
    write_jsonl(path, [good, bad])
    with pytest.raises(MalformedRecord) as e:
        read_jsonl(path, AvatarPose.from_dict)
    assert e.value.line == 2
    assert 'norm' in str(e.value)
