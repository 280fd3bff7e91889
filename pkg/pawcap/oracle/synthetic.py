"""Procedural ground-truth gesture sequences and their rendering
through a virtual stereo rig.

Every pose is built from the human topology with all bones at the
subject's exact lengths and every hinge inside its limits, so
``constrain_pose`` leaves it unchanged.

Labels come from the motion schedule alone. A wave or a petting
stroke is labeled from its first full-amplitude turn of the hand to
the next one, which is where the second reversal completes the
gesture. A heart is labeled over the time the closed hands are held
still. The negative scenarios each break one defining condition:
``low_wave_negative`` swings the hand below the shoulder and behind
the chest box, and ``fast_walk_negative`` swings the arms through the
chest box far faster than a stroke.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from pawcap.behaviour.events import GestureEvent, GestureKind
from pawcap.body.joints import NUM_JOINTS, JointId
from pawcap.body.skeleton import (SkeletonPose, SkeletonProportions,
                                  Topology, load_human_topology)
from pawcap.geometry.stereo import (CameraModel, KeypointFrame2D, StereoRig,
                                    project_points)
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

SCENARIO_KINDS = ('wave', 'petting', 'heart', 'idle', 'low_wave_negative',
                  'fast_walk_negative')

POSITIVE_KINDS = {
    'wave': GestureKind.GREETING_WAVE,
    'petting': GestureKind.AFFECTIONATE_TOUCH,
    'heart': GestureKind.HEART_SHAPE,
}

LEFT, RIGHT = 0, 1

_ARMS = (
    (JointId.LEFT_SHOULDER, JointId.LEFT_ELBOW, JointId.LEFT_WRIST,
     JointId.LEFT_HAND),
    (JointId.RIGHT_SHOULDER, JointId.RIGHT_ELBOW, JointId.RIGHT_WRIST,
     JointId.RIGHT_HAND),
)

_LEGS = (
    (JointId.LEFT_HIP, JointId.LEFT_KNEE, JointId.LEFT_ANKLE,
     JointId.LEFT_FOOT, JointId.LEFT_TOE),
    (JointId.RIGHT_HIP, JointId.RIGHT_KNEE, JointId.RIGHT_ANKLE,
     JointId.RIGHT_FOOT, JointId.RIGHT_TOE),
)

# wrist targets relative to the shoulder, as (outward, up, forward) in T
_HANGING = np.array([0.02, -1.0, 0.05])
_WAVE_CENTER = np.array([0.2, 0.4, 0.3])
_LOW_WAVE_CENTER = np.array([0.2, -0.3, -0.05])
_PET_CENTER = np.array([-0.25, -0.4, 0.45])
_HEART_OPEN = np.array([-0.11, 0.66, 0.1])
_HEART = np.array([-0.31, 0.66, 0.1])

# schedule timings (s) and rates (Hz)
_RAMP = 0.5
_WAVE_FREQUENCY = 1.0
_PET_FREQUENCY = 0.9
_CYCLES = 3.0
_HEART_RAISE = 0.6
_HEART_CLOSE = 0.15
_HEART_HOLD = 1.2

_MIN_FLEXION_MARGIN = 20.0


class SubjectOutOfFrustum(PawcapError):
    pass


class ScenarioSpec:
    def __init__(self, kind: str, duration: float = 6.0, fps: float = 30.0,
                 amplitude: float = 1.0, torso_length: float = 0.5,
                 seed: int = 0) -> None:
        """Parameters of one synthetic sequence.

        Args:
            kind: One of SCENARIO_KINDS.
            duration: Length (s).
            fps: Frame rate, in [10, 120].
            amplitude: Scale factor on the gesture motion amplitudes.
            torso_length: The subject's pelvis to neck distance (m).
            seed: Seed of all random choices.

        Raises:
            ValueError: If a parameter is out of range.
        """
        if kind not in SCENARIO_KINDS:
            raise ValueError('Unknown scenario kind {}'.format(kind))
        if not duration > 0.0:
            raise ValueError('Scenario duration must be positive')
        if not 10.0 <= fps <= 120.0:
            raise ValueError('Scenario fps must be in [10, 120]')
        if not (amplitude > 0.0 and torso_length > 0.0):
            raise ValueError('Amplitude and torso length must be positive')
        self.kind = kind
        self.duration = float(duration)
        self.fps = float(fps)
        self.amplitude = float(amplitude)
        self.torso_length = float(torso_length)
        self.seed = int(seed)

    def __repr__(self) -> str:
        return 'ScenarioSpec({}, {}s @ {}fps, seed={})'.format(
            self.kind, self.duration, self.fps, self.seed)

    @property
    def expected_kind(self) -> Optional[GestureKind]:
        return POSITIVE_KINDS.get(self.kind)


class GroundTruth:
    """A generated sequence: the true poses and the gesture labels."""

    def __init__(self, spec: ScenarioSpec, poses: List[SkeletonPose],
                 labels: List[GestureEvent],
                 proportions: SkeletonProportions) -> None:
        self.spec = spec
        self.poses = poses
        self.labels = labels
        self.proportions = proportions


def _smoothstep(x: float) -> float:
    x = min(1.0, max(0.0, x))
    return x * x * (3.0 - 2.0 * x)


def solve_two_bone(root: np.ndarray, target: np.ndarray, upper: float,
                   lower: float, pole: np.ndarray
                   ) -> Tuple[np.ndarray, np.ndarray]:
    """Place a two-bone limb so its end is as close to target as the
    bone lengths and hinge range allow.

    The limb bends towards ``pole``. The root-to-end distance is kept
    where the hinge flexion is between 0 and 160 degrees.

    Returns:
        (middle joint, end joint) positions.
    """
    offset = target - root
    distance = float(np.linalg.norm(offset))
    direction = offset / distance
    interior = np.radians(_MIN_FLEXION_MARGIN)
    d_min = np.sqrt(upper ** 2 + lower ** 2 -
                    2.0 * upper * lower * np.cos(interior)) * 1.001
    d = min(max(distance, d_min), 0.999 * (upper + lower))
    a = (upper ** 2 - lower ** 2 + d ** 2) / (2.0 * d)
    h = np.sqrt(max(upper ** 2 - a ** 2, 0.0))
    perp = pole - (pole @ direction) * direction
    perp = perp / np.linalg.norm(perp)
    middle = root + a * direction + h * perp
    end = root + d * direction
    return middle, end


class _Body:
    """Builds poses of one subject standing at a fixed spot facing +Z."""

    def __init__(self, topology: Topology, scale: float,
                 origin: np.ndarray) -> None:
        self.topology = topology
        self.scale = scale
        self.torso = float(np.linalg.norm(
            topology.rest_positions[JointId.NECK] -
            topology.rest_positions[JointId.PELVIS])) * scale
        self.rest = topology.rest_positions * scale + origin
        self.lengths = topology.rest_lengths * scale

    def _outward(self, side: int) -> np.ndarray:
        # the subject's left is world +X
        return np.array([1.0, 0.0, 0.0]) if side == LEFT else np.array(
            [-1.0, 0.0, 0.0])

    def wrist_target(self, positions: np.ndarray, side: int,
                     relative: np.ndarray) -> np.ndarray:
        shoulder = positions[_ARMS[side][0]]
        out, up, forward = relative * self.torso
        return shoulder + out * self._outward(side) + np.array(
            [0.0, up, forward])

    def place_arm(self, positions: np.ndarray, side: int,
                  relative: np.ndarray) -> None:
        shoulder, elbow, wrist, hand = _ARMS[side]
        target = self.wrist_target(positions, side, relative)
        mid, end = solve_two_bone(positions[shoulder], target,
                                  self.lengths[elbow], self.lengths[wrist],
                                  self._outward(side))
        positions[elbow] = mid
        positions[wrist] = end
        forearm = (end - mid) / np.linalg.norm(end - mid)
        positions[hand] = end + forearm * self.lengths[hand]

    def place_leg(self, positions: np.ndarray, side: int,
                  lift: float) -> None:
        hip, knee, ankle, foot, toe = _LEGS[side]
        rest_ankle = self.rest[ankle] - self.rest[hip] + positions[hip]
        target = rest_ankle + np.array([0.0, lift, 0.3 * lift])
        mid, end = solve_two_bone(positions[hip], target, self.lengths[knee],
                                  self.lengths[ankle],
                                  np.array([0.0, 0.0, 1.0]))
        positions[knee] = mid
        positions[ankle] = end
        positions[foot] = end + self.rest[foot] - self.rest[ankle]
        positions[toe] = positions[foot] + self.rest[toe] - self.rest[foot]

    def pose(self, shift: np.ndarray) -> np.ndarray:
        """Standing pose with arms hanging, shifted rigidly."""
        positions = self.rest + shift
        for side in (LEFT, RIGHT):
            self.place_arm(positions, side, _HANGING)
        return positions


def _blend(a: np.ndarray, b: np.ndarray, weight: float) -> np.ndarray:
    return a + (b - a) * _smoothstep(weight)


def _one_hand_gesture(t: float, t0: float, center: np.ndarray,
                      oscillation: np.ndarray, frequency: float,
                      start_sign: float) -> np.ndarray:
    """Wrist target of a raise, oscillate, lower schedule.

    The hand reaches ``center + start_sign * oscillation`` at
    t0 + _RAMP, swings through _CYCLES cosine cycles and returns.
    """
    t1 = t0 + _RAMP
    t2 = t1 + _CYCLES / frequency
    phase = 2.0 * np.pi * frequency * (min(max(t, t1), t2) - t1)
    current = center + oscillation * start_sign * np.cos(phase)
    if t < t1:
        return _blend(_HANGING, center + oscillation * start_sign,
                      (t - t0) / _RAMP)
    if t <= t2:
        return current
    return _blend(current, _HANGING, (t - t2) / _RAMP)


def _heart_target(t: float, t0: float) -> np.ndarray:
    """Raise both hands apart, close them quickly, hold, release."""
    closed = t0 + _HEART_RAISE + _HEART_CLOSE
    if t < t0 + _HEART_RAISE:
        return _blend(_HANGING, _HEART_OPEN, (t - t0) / _HEART_RAISE)
    if t < closed:
        weight = (t - t0 - _HEART_RAISE) / _HEART_CLOSE
        return _HEART_OPEN + (_HEART - _HEART_OPEN) * weight
    if t <= closed + _HEART_HOLD:
        return _HEART
    return _blend(_HEART, _HANGING, (t - closed - _HEART_HOLD) / _HEART_RAISE)


def _scenario_pose(spec: ScenarioSpec, body: _Body, t: float, side: int,
                   t0: float) -> np.ndarray:
    amp = spec.amplitude
    kind = spec.kind
    if kind == 'idle':
        sway = 0.01 * body.torso * np.sin(2.0 * np.pi * 0.25 * t)
        return body.pose(np.array([sway, 0.0, 0.0]))

    positions = body.pose(np.zeros(3))
    if kind in ('wave', 'low_wave_negative'):
        center = _WAVE_CENTER if kind == 'wave' else _LOW_WAVE_CENTER
        target = _one_hand_gesture(t, t0, center,
                                   np.array([0.3 * amp, 0.0, 0.0]),
                                   _WAVE_FREQUENCY, -1.0)
        body.place_arm(positions, side, target)
    elif kind == 'petting':
        target = _one_hand_gesture(t, t0, _PET_CENTER,
                                   np.array([0.0, 0.14, 0.0]) * amp,
                                   _PET_FREQUENCY, 1.0)
        body.place_arm(positions, side, target)
    elif kind == 'heart':
        target = _heart_target(t, t0)
        for arm in (LEFT, RIGHT):
            body.place_arm(positions, arm, target)
    elif kind == 'fast_walk_negative':
        for arm in (LEFT, RIGHT):
            phase = 2.0 * np.pi * 2.0 * t + arm * np.pi
            target = np.array([0.05, -0.75, 0.3 + 0.3 * amp * np.sin(phase)])
            body.place_arm(positions, arm, target)
        for leg in (LEFT, RIGHT):
            step = np.sin(2.0 * np.pi * 1.0 * t + leg * np.pi)
            body.place_leg(positions, leg, 0.3 * body.torso * max(0.0, step))
    return positions


def schedule_labels(spec: ScenarioSpec, t0: float) -> List[GestureEvent]:
    """The labeled interval of a scenario whose gesture starts at t0.

    Waves and strokes are labeled between the first two turns of the
    hand after the raise, the heart over its hold. Labels that would
    end after the sequence are left out.
    """
    kind = spec.expected_kind
    if kind is None:
        return []
    if kind == GestureKind.HEART_SHAPE:
        t_start = t0 + _HEART_RAISE + _HEART_CLOSE
        t_end = t_start + _HEART_HOLD
    else:
        frequency = (_WAVE_FREQUENCY if kind == GestureKind.GREETING_WAVE
                     else _PET_FREQUENCY)
        t_start = t0 + _RAMP + 0.5 / frequency
        t_end = t0 + _RAMP + 1.0 / frequency
    last = (int(np.floor(spec.duration * spec.fps + 1e-9)) - 1) / spec.fps
    if t_end > last:
        return []
    return [GestureEvent(kind, t_start, t_end, 1.0)]


def generate_motion(spec: ScenarioSpec, topology: Optional[Topology] = None
                    ) -> GroundTruth:
    """Generate a labeled ground-truth sequence.

    Args:
        spec: What to generate.
        topology: The human topology, defaults to the shipped one.
    """
    if topology is None:
        topology = load_human_topology()
    rng = np.random.default_rng(spec.seed)
    side = int(rng.integers(2))
    t0 = 0.5 + float(rng.uniform(0.0, 0.3))
    origin = np.array([rng.uniform(-0.1, 0.1), 0.0,
                       rng.uniform(-0.1, 0.1)])

    rest_torso = float(np.linalg.norm(
        topology.rest_positions[JointId.NECK] -
        topology.rest_positions[JointId.PELVIS]))
    body = _Body(topology, spec.torso_length / rest_torso, origin)

    n = int(np.floor(spec.duration * spec.fps + 1e-9))
    poses = []
    for k in range(n):
        t = k / spec.fps
        positions = _scenario_pose(spec, body, t, side, t0)
        poses.append(SkeletonPose(t, positions, np.ones(NUM_JOINTS)))

    labels = schedule_labels(spec, t0)
    _logger.info('Generated {} with {} frames and {} labels'.format(
        spec, n, len(labels)))
    return GroundTruth(spec, poses, labels,
                       SkeletonProportions.from_topology(topology).scaled(
                           body.scale))


def _in_image(camera: CameraModel, pixels: np.ndarray) -> np.ndarray:
    with np.errstate(invalid='ignore'):
        return ((0.0 <= pixels[:, 0]) & (pixels[:, 0] <= 2.0 * camera.cx) &
                (0.0 <= pixels[:, 1]) & (pixels[:, 1] <= 2.0 * camera.cy))


def render_views(rig: StereoRig, truth: GroundTruth, noise_px: float = 0.0,
                 dropout: float = 0.0, seed: int = 0,
                 max_outside: float = 0.05
                 ) -> Tuple[List[KeypointFrame2D], List[KeypointFrame2D]]:
    """Project the true poses into both cameras.

    Args:
        rig: The virtual rig.
        truth: Generated motion.
        noise_px: Standard deviation of the pixel noise per axis.
        dropout: Probability that an observation is dropped.
        seed: Seed of the noise and dropout draws.
        max_outside: Largest tolerated fraction of frames with a joint
            outside a camera's view.

    Returns:
        Left and right keypoint streams.

    Raises:
        SubjectOutOfFrustum: If too many frames leave the view.
    """
    if noise_px < 0.0 or not 0.0 <= dropout <= 1.0:
        raise ValueError('Invalid noise or dropout')
    rng = np.random.default_rng(seed)
    conf = min(1.0, max(0.0, 1.0 - noise_px / 4.0))
    streams = ([], [])  # type: Tuple[List[KeypointFrame2D], List[KeypointFrame2D]]
    outside_frames = 0

    for pose in truth.poses:
        present = pose.present
        outside = False
        for cam_index, camera in enumerate((rig.left, rig.right)):
            noise = rng.normal(0.0, 1.0, size=(NUM_JOINTS, 2)) * noise_px
            dropped = rng.random(NUM_JOINTS) < dropout
            pixels, _ = project_points(camera, np.nan_to_num(pose.positions))
            visible = present & _in_image(camera, pixels)
            if np.any(present & ~visible):
                outside = True
            kept = visible & ~dropped
            points = np.full((NUM_JOINTS, 3), np.nan)
            points[kept, :2] = pixels[kept] + noise[kept]
            points[kept, 2] = conf
            streams[cam_index].append(
                KeypointFrame2D(pose.t, camera.id, points))
        if outside:
            outside_frames += 1

    if truth.poses and outside_frames > max_outside * len(truth.poses):
        raise SubjectOutOfFrustum(
            '{} of {} frames leave the camera view'.format(
                outside_frames, len(truth.poses)))
    return streams


def default_corpus(seed: int = 0, duration: float = 6.0,
                   fps: float = 30.0) -> List[ScenarioSpec]:
    """One sequence per scenario kind, with seeds derived from seed."""
    return [ScenarioSpec(kind, duration, fps, seed=seed * 1000 + i)
            for i, kind in enumerate(SCENARIO_KINDS)]
