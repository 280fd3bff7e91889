"""Scoring of pipeline output against ground truth."""
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pawcap.avatar.retargeting import AvatarPose
from pawcap.behaviour.events import GestureEvent, GestureKind
from pawcap.body.skeleton import SkeletonPose
from pawcap.geometry.rotations import angle_between
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

MIN_LABEL_OVERLAP = 0.5


class TimeBaseMismatch(PawcapError):
    pass


class GestureScore:
    """Detection quality for one gesture kind.

    With no predictions, precision is reported as 1 and
    ``no_predictions`` is set; with no labels, likewise for recall.
    """

    def __init__(self, kind: GestureKind, true_positives: int,
                 predictions: int, labels: int,
                 timing_errors: List[float]) -> None:
        self.kind = kind
        self.true_positives = true_positives
        self.predictions = predictions
        self.labels = labels
        self.no_predictions = predictions == 0
        self.no_labels = labels == 0
        self.precision = (1.0 if self.no_predictions
                          else true_positives / predictions)
        self.recall = 1.0 if self.no_labels else true_positives / labels
        total = self.precision + self.recall
        self.f1 = 0.0 if total == 0.0 else (
            2.0 * self.precision * self.recall / total)
        self.timing_errors = timing_errors

    def to_dict(self) -> Dict[str, Any]:
        return {
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'true_positives': self.true_positives,
            'predictions': self.predictions,
            'labels': self.labels,
            'no_predictions': self.no_predictions,
            'no_labels': self.no_labels,
        }


class EvalReport:
    """The outcome of an evaluation.

    Attributes:
        mpjpe_mm: Mean per-joint position error (mm) over joints
            present in both prediction and truth, None if there are
            none.
        gestures: Score per gesture kind.
        timing_error_ms: Mean onset error |t_start difference| (ms)
            of matched events, None without matches.
        max_timing_error_ms: Largest onset error (ms), None without
            matches.
        max_angular_velocity: Fastest joint rotation of the avatar
            output (degrees/s), None if not measured.
        throughput_fps: Frames processed per second, if timed.
        realtime_factor: Throughput over the stream's frame rate.
        pose_count: Pose pairs compared.
        joint_count: Joint pairs compared.
    """

    def __init__(self, mpjpe_mm: Optional[float],
                 gestures: Dict[GestureKind, GestureScore],
                 timing_error_ms: Optional[float], pose_count: int,
                 joint_count: int, throughput_fps: Optional[float] = None,
                 realtime_factor: Optional[float] = None,
                 max_timing_error_ms: Optional[float] = None,
                 max_angular_velocity: Optional[float] = None) -> None:
        self.mpjpe_mm = mpjpe_mm
        self.gestures = gestures
        self.timing_error_ms = timing_error_ms
        self.pose_count = pose_count
        self.joint_count = joint_count
        self.throughput_fps = throughput_fps
        self.realtime_factor = realtime_factor
        self.max_timing_error_ms = max_timing_error_ms
        self.max_angular_velocity = max_angular_velocity

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mpjpe_mm': self.mpjpe_mm,
            'gestures': {kind.value: score.to_dict()
                         for kind, score in self.gestures.items()},
            'timing_error_ms': self.timing_error_ms,
            'max_timing_error_ms': self.max_timing_error_ms,
            'max_angular_velocity': self.max_angular_velocity,
            'throughput_fps': self.throughput_fps,
            'realtime_factor': self.realtime_factor,
            'counts': {
                'poses': self.pose_count,
                'joints': self.joint_count,
                'predicted_events': sum(
                    s.predictions for s in self.gestures.values()),
                'labels': sum(s.labels for s in self.gestures.values()),
            },
        }


def label_overlap(event: GestureEvent, label: GestureEvent) -> float:
    """Fraction of the label interval covered by the event."""
    inter = min(event.t_end, label.t_end) - max(event.t_start, label.t_start)
    return max(0.0, inter) / (label.t_end - label.t_start)


def match_events(predicted: Sequence[GestureEvent],
                 labels: Sequence[GestureEvent]
                 ) -> List[Tuple[GestureEvent, GestureEvent]]:
    """Match events to labels one to one, greedily by overlap.

    A pair qualifies if kinds agree and the event covers at least half
    of the label. Ties go to the earlier label, then the earlier event.
    """
    candidates = []
    for i, event in enumerate(predicted):
        for j, label in enumerate(labels):
            if event.kind != label.kind:
                continue
            overlap = label_overlap(event, label)
            if overlap >= MIN_LABEL_OVERLAP:
                candidates.append((-overlap, j, i))
    candidates.sort()
    used_events = set()
    used_labels = set()
    matches = []
    for _, j, i in candidates:
        if i in used_events or j in used_labels:
            continue
        used_events.add(i)
        used_labels.add(j)
        matches.append((predicted[i], labels[j]))
    return matches


def _time_key(t: float) -> int:
    return int(round(t * 1e6))


def pose_error(predicted: Sequence[SkeletonPose],
               truth: Sequence[SkeletonPose]) -> Tuple[Optional[float], int,
                                                       int]:
    """MPJPE (mm) over poses with equal timestamps (to the microsecond).

    Returns:
        (MPJPE or None, number of poses compared, number of joints).

    Raises:
        TimeBaseMismatch: If both streams are non-empty but their time
            spans do not overlap.
    """
    if predicted and truth:
        p0, p1 = min(p.t for p in predicted), max(p.t for p in predicted)
        t0, t1 = min(p.t for p in truth), max(p.t for p in truth)
        if p1 < t0 or t1 < p0:
            raise TimeBaseMismatch(
                'Predicted poses span [{}, {}], truth spans [{}, {}]'.format(
                    p0, p1, t0, t1))
    by_time = {_time_key(p.t): p for p in truth}
    errors = []  # type: List[float]
    poses = 0
    for pose in predicted:
        reference = by_time.get(_time_key(pose.t))
        if reference is None:
            continue
        both = pose.present & reference.present
        if not np.any(both):
            continue
        poses += 1
        errors.extend(np.linalg.norm(
            pose.positions[both] - reference.positions[both], axis=1))
    if not errors:
        return None, poses, 0
    return float(np.mean(errors)) * 1000.0, poses, len(errors)


def max_angular_velocity(avatar: Sequence[AvatarPose]) -> Optional[float]:
    """Fastest rotation of any avatar joint between consecutive poses
    (degrees/s), None for fewer than two poses."""
    fastest = None  # type: Optional[float]
    for before, after in zip(avatar, avatar[1:]):
        dt = after.t - before.t
        if not dt > 0.0:
            continue
        speed = float(np.degrees(np.max(
            angle_between(before.local, after.local)))) / dt
        fastest = speed if fastest is None else max(fastest, speed)
    return fastest


def evaluate(predicted_events: Sequence[GestureEvent],
             labels: Sequence[GestureEvent],
             predicted_poses: Sequence[SkeletonPose] = (),
             truth_poses: Sequence[SkeletonPose] = (),
             elapsed: Optional[float] = None,
             fps: Optional[float] = None,
             avatar: Sequence[AvatarPose] = ()) -> EvalReport:
    """Score predictions against ground truth.

    Args:
        predicted_events: Events from the pipeline.
        labels: Ground-truth gesture intervals.
        predicted_poses: Poses from the pipeline.
        truth_poses: True poses.
        elapsed: Wall-clock seconds the pipeline took, for throughput.
        fps: Frame rate of the input, for the real-time factor.
        avatar: Avatar output poses, for the rotation speed bound.

    Raises:
        TimeBaseMismatch: See pose_error.
    """
    mpjpe, pose_count, joint_count = pose_error(predicted_poses, truth_poses)
    matches = match_events(predicted_events, labels)

    gestures = {}
    timing = []  # type: List[float]
    for kind in GestureKind:
        kind_matches = [(e, lab) for e, lab in matches if e.kind == kind]
        errors = [abs(e.t_start - lab.t_start) for e, lab in kind_matches]
        timing.extend(errors)
        gestures[kind] = GestureScore(
            kind, len(kind_matches),
            sum(1 for e in predicted_events if e.kind == kind),
            sum(1 for lab in labels if lab.kind == kind), errors)

    throughput = None
    realtime = None
    if elapsed is not None and elapsed > 0.0 and predicted_poses:
        throughput = len(predicted_poses) / elapsed
        if fps:
            realtime = throughput / fps

    report = EvalReport(mpjpe, gestures,
                        float(np.mean(timing)) * 1000.0 if timing else None,
                        pose_count, joint_count, throughput, realtime,
                        float(np.max(timing)) * 1000.0 if timing else None,
                        max_angular_velocity(avatar))
    _logger.info('Evaluated {} events against {} labels'.format(
        len(predicted_events), len(labels)))
    return report
