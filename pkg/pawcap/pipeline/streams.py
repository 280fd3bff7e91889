"""JSON Lines readers and writers for all stream formats.

One record per line. Missing joints are written as ``null``.
"""
import json
import logging
from typing import (Any, Callable, Dict, Iterable, Iterator, List, Optional,
                    TypeVar)

import numpy as np

from pawcap.behaviour.events import GestureEvent
from pawcap.behaviour.fusion import AudioEmotionEvent, UserState
from pawcap.body.joints import NUM_JOINTS
from pawcap.body.skeleton import SkeletonPose
from pawcap.geometry.stereo import KeypointFrame2D
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

T = TypeVar('T')


class MalformedRecord(PawcapError):
    def __init__(self, path: str, line: int, message: str) -> None:
        super().__init__('{}:{}: {}'.format(path, line, message))
        self.path = path
        self.line = line


def _rows(values: np.ndarray, width: int) -> List[Optional[List[float]]]:
    return [None if np.any(np.isnan(row)) else [float(x) for x in row]
            for row in values.reshape(-1, width)]


def _unrows(rows: Any, width: int) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != NUM_JOINTS:
        raise ValueError('expected {} joint entries'.format(NUM_JOINTS))
    array = np.full((NUM_JOINTS, width), np.nan)
    for j, row in enumerate(rows):
        if row is None:
            continue
        if not isinstance(row, list) or len(row) != width:
            raise ValueError('joint {} needs {} values'.format(j, width))
        array[j] = [float(x) for x in row]
    return array


def keypoints_to_dict(frame: KeypointFrame2D) -> Dict[str, Any]:
    return {'t': frame.t, 'cam': frame.cam, 'pts': _rows(frame.points, 3)}


def keypoints_from_dict(record: Dict[str, Any]) -> KeypointFrame2D:
    return KeypointFrame2D(float(record['t']), int(record['cam']),
                           _unrows(record['pts'], 3))


def pose_to_dict(pose: SkeletonPose) -> Dict[str, Any]:
    rows = np.column_stack([pose.positions, pose.conf])
    rows[~pose.present] = np.nan
    return {'t': pose.t, 'joints': _rows(rows, 4)}


def pose_from_dict(record: Dict[str, Any]) -> SkeletonPose:
    rows = _unrows(record['joints'], 4)
    conf = np.nan_to_num(rows[:, 3], nan=0.0)
    return SkeletonPose(float(record['t']), rows[:, :3], conf)


def read_jsonl(path: str, parse: Callable[[Dict[str, Any]], T]) -> List[T]:
    """Read and parse every record of a JSONL file.

    Blank lines are skipped.

    Raises:
        MalformedRecord: With the line number of the first bad record.
    """
    return list(iter_jsonl(path, parse))


def iter_jsonl(path: str, parse: Callable[[Dict[str, Any]], T]
               ) -> Iterator[T]:
    with open(path) as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError('record is not an object')
                yield parse(record)
            except (ValueError, KeyError, TypeError, PawcapError) as e:
                raise MalformedRecord(path, number, str(e))


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> int:
    """Write records, one per line.

    Returns:
        The number of records written.
    """
    count = 0
    with open(path, 'w') as f:
        for record in records:
            f.write(json.dumps(record))
            f.write('\n')
            count += 1
    _logger.debug('Wrote {} records to {}'.format(count, path))
    return count


def read_keypoints(path: str) -> List[KeypointFrame2D]:
    return read_jsonl(path, keypoints_from_dict)


def split_cameras(frames: List[KeypointFrame2D], left_id: int,
                  right_id: int) -> Dict[int, List[KeypointFrame2D]]:
    """Sort a mixed keypoint stream into per-camera streams."""
    streams = {left_id: [], right_id: []
               }  # type: Dict[int, List[KeypointFrame2D]]
    for frame in frames:
        if frame.cam in streams:
            streams[frame.cam].append(frame)
        else:
            _logger.warning('Ignoring frame of unknown camera {}'.format(
                frame.cam))
    return streams


def read_poses(path: str) -> List[SkeletonPose]:
    return read_jsonl(path, pose_from_dict)


def read_events(path: str) -> List[GestureEvent]:
    return read_jsonl(path, GestureEvent.from_dict)


def read_audio(path: str) -> List[AudioEmotionEvent]:
    return read_jsonl(path, AudioEmotionEvent.from_dict)


def read_user_states(path: str) -> List[UserState]:
    return read_jsonl(path, UserState.from_dict)
