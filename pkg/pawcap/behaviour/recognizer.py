"""Deterministic detectors for the three interaction gestures.

All distances are in torso units T and all speeds in T/s, taken from
``FeatureFrame``. Each detector is a small state machine; events are
emitted when a gesture completes, never at its onset, so the output
stream is causal.
"""
import logging
from bisect import bisect_left, bisect_right
from collections import deque
from typing import Any, Deque, Dict, List, Optional, Tuple

import numpy as np

from pawcap.behaviour.events import DetectorState, GestureEvent, GestureKind
from pawcap.behaviour.features import FeatureFrame
from pawcap.body.joints import JointId

_EPS = 1e-9

ARMS = (
    (JointId.LEFT_SHOULDER, JointId.LEFT_ELBOW, JointId.LEFT_WRIST),
    (JointId.RIGHT_SHOULDER, JointId.RIGHT_ELBOW, JointId.RIGHT_WRIST),
)
LEFT, RIGHT = 0, 1
RIGHT_AXIS, UP_AXIS, FORWARD_AXIS = 0, 1, 2


class RecognizerConfig:
    """Detector thresholds. Distances in T, speeds in T/s, times in s."""

    DEFAULTS = {
        'wave_amplitude': 0.25,
        'wave_reversals': 2,
        'wave_window': 2.0,
        'touch_forward_min': 0.2,
        'touch_forward_max': 0.8,
        'touch_max_speed': 1.5,
        'touch_min_stroke': 0.1,
        'touch_max_stroke': 0.4,
        'touch_reversals': 2,
        'touch_window': 2.5,
        'heart_max_gap': 0.2,
        'heart_elbow_margin': 0.1,
        'heart_max_speed': 0.2,
        'heart_hold': 0.8,
        'refractory': 1.0,
        'speed_window': 0.2,
        'hold_grace': 0.15,
    }  # type: Dict[str, float]

    def __init__(self, **kwargs: float) -> None:
        """Create a configuration, overriding defaults by keyword.

        Raises:
            ValueError: For unknown names or non-positive values.
        """
        unknown = set(kwargs) - set(self.DEFAULTS)
        if unknown:
            raise ValueError('Unknown recognizer settings: {}'.format(
                ', '.join(sorted(unknown))))
        values = dict(self.DEFAULTS)
        values.update(kwargs)
        for name, value in values.items():
            if not value > 0:
                raise ValueError('Recognizer setting {} must be positive'
                                 .format(name))
        if values['touch_min_stroke'] >= values['touch_max_stroke']:
            raise ValueError('touch_min_stroke must be below'
                             ' touch_max_stroke')
        if values['touch_forward_min'] >= values['touch_forward_max']:
            raise ValueError('touch_forward_min must be below'
                             ' touch_forward_max')
        self._values = values

    def __getattr__(self, name: str) -> Any:
        values = self.__dict__.get('_values', {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def as_dict(self) -> Dict[str, float]:
        return dict(self._values)


class ZigZag:
    """Finds direction reversals of a noisy 1-D signal.

    A reversal is confirmed once the signal has retreated by at least
    ``hysteresis`` from its running extreme; it is reported at the time
    of that extreme, together with the span and duration of the swing
    that ended there.
    """

    def __init__(self, hysteresis: float) -> None:
        self.hysteresis = hysteresis
        self.reset()

    def reset(self) -> None:
        self.direction = 0
        self._lo = self._hi = None  # type: Optional[Tuple[float, float]]
        self._extreme = (0.0, 0.0)
        self._start = (0.0, 0.0)

    def update(self, t: float, x: float
               ) -> Optional[Tuple[float, float, float]]:
        """Feed a sample.

        Returns:
            (time of the extreme, swing span, swing duration) if a
            reversal was confirmed by this sample, else None.
        """
        h = self.hysteresis - _EPS
        if self.direction == 0:
            if self._lo is None or x < self._lo[1]:
                self._lo = (t, x)
            if self._hi is None or x > self._hi[1]:
                self._hi = (t, x)
            if x - self._lo[1] >= h:
                self.direction = 1
                self._start = self._lo
                self._extreme = (t, x)
            elif self._hi[1] - x >= h:
                self.direction = -1
                self._start = self._hi
                self._extreme = (t, x)
            return None

        t_ext, x_ext = self._extreme
        if self.direction * (x - x_ext) > 0.0:
            self._extreme = (t, x)
            return None
        if self.direction * (x_ext - x) >= h:
            t_start, x_start = self._start
            self._start = self._extreme
            self.direction = -self.direction
            self._extreme = (t, x)
            return t_ext, abs(x_ext - x_start), t_ext - t_start
        return None


class _History:
    """Recent feature frames, for windowed measurements."""

    def __init__(self, horizon: float) -> None:
        self.horizon = horizon
        self.frames = []  # type: List[FeatureFrame]
        self._times = []  # type: List[float]

    def push(self, frame: FeatureFrame) -> None:
        self.frames.append(frame)
        self._times.append(frame.t)
        stale = bisect_left(self._times, frame.t - self.horizon)
        if stale:
            del self.frames[:stale]
            del self._times[:stale]

    def span(self, t0: float, t1: float) -> List[FeatureFrame]:
        lo = bisect_left(self._times, t0 - _EPS)
        hi = bisect_right(self._times, t1 + _EPS)
        return self.frames[lo:hi]

    def _track(self, joint: JointId, t0: float, t1: float
               ) -> Tuple[np.ndarray, np.ndarray]:
        frames = [f for f in self.span(t0, t1) if f.has(joint)]
        times = np.array([f.t for f in frames])
        positions = np.array([f.joint(joint) for f in frames]).reshape(-1, 3)
        return times, positions

    def mean_position(self, joint: JointId, t0: float, t1: float
                      ) -> Optional[Tuple[float, np.ndarray]]:
        """Mean time and mean position of a joint over [t0, t1], or
        None if it was never seen."""
        times, positions = self._track(joint, t0, t1)
        if len(times) == 0:
            return None
        return float(np.mean(times)), positions.mean(axis=0)

    def speed(self, joint: JointId, t0: float, t1: float,
              fallback: float) -> float:
        """Mean speed of a joint over [t0, t1].

        Compares the mean position of the later half of the window to
        that of the earlier half, which suppresses frame-to-frame
        jitter. Falls back to the given instantaneous speed when the
        window holds fewer than four samples.
        """
        times, positions = self._track(joint, t0, t1)
        if len(times) < 4:
            return fallback
        second = times >= 0.5 * (times[0] + times[-1])
        if second.all() or not second.any():
            return fallback
        p0 = positions[~second].mean(axis=0)
        p1 = positions[second].mean(axis=0)
        elapsed = float(times[second].mean() - times[~second].mean())
        return float(np.linalg.norm(p1 - p0)) / elapsed

    def mean_conf(self, joints: List[JointId], t0: float,
                  t1: float) -> float:
        frames = self.span(t0, t1)
        if not frames:
            return 0.0
        return float(np.mean([f.conf[joints] for f in frames]))


class _Detector:
    """Bookkeeping shared by the detectors: state, latch, refractory."""

    kind = None  # type: GestureKind

    def __init__(self, config: RecognizerConfig) -> None:
        self._logger = logging.getLogger(__name__)
        self.config = config
        self.state = DetectorState.IDLE
        self.last_end = None  # type: Optional[float]

    def _emit(self, history: _History, joints: List[JointId], t_start: float,
              t_end: float) -> Optional[GestureEvent]:
        if not DetectorState.can_fire(self.state):
            return None
        if (self.last_end is not None and
                t_start - self.last_end < self.config.refractory - _EPS):
            return None
        if not t_start < t_end:
            return None
        event = GestureEvent(self.kind, t_start, t_end,
                             history.mean_conf(joints, t_start, t_end))
        self.last_end = t_end
        self.state = DetectorState.LATCHED
        self._logger.info('Detected {}'.format(event))
        return event

    def release(self) -> None:
        self.state = DetectorState.IDLE


class _WaveDetector(_Detector):
    """A raised hand swinging side to side."""

    kind = GestureKind.GREETING_WAVE

    def __init__(self, config: RecognizerConfig) -> None:
        super().__init__(config)
        self._zigzag = [ZigZag(config.wave_amplitude) for _ in ARMS]
        self._reversals = [deque(), deque()]  # type: List[Deque[float]]

    def _reset_side(self, side: int) -> None:
        self._zigzag[side].reset()
        self._reversals[side].clear()

    def step(self, frame: FeatureFrame,
             history: _History) -> Optional[GestureEvent]:
        cfg = self.config
        any_active = False
        event = None
        for side, (shoulder, _, wrist) in enumerate(ARMS):
            if not (frame.has(shoulder, wrist) and
                    frame.height(wrist) > frame.height(shoulder)):
                self._reset_side(side)
                continue
            any_active = True
            if self.state == DetectorState.IDLE:
                self.state = DetectorState.TRACKING
            reversal = self._zigzag[side].update(
                frame.t, float(frame.joint(wrist)[RIGHT_AXIS]))
            reversals = self._reversals[side]
            if reversal is not None and reversal[1] >= (
                    cfg.wave_amplitude - _EPS):
                reversals.append(reversal[0])
            while reversals and frame.t - reversals[0] > cfg.wave_window:
                reversals.popleft()
            if event is None and len(reversals) >= cfg.wave_reversals:
                event = self._emit(history, list(ARMS[side]), reversals[0],
                                   reversals[-1])
                if event is None and DetectorState.can_fire(self.state):
                    # refractory: let the oldest reversal go
                    reversals.popleft()
        if not any_active:
            self.release()
        return event


class _TouchDetector(_Detector):
    """Slow strokes of a hand in front of the chest.

    The wrist is followed through its mean position over the speed
    window. A swing too long or too fast for a stroke discards the
    reversals counted so far.
    """

    kind = GestureKind.AFFECTIONATE_TOUCH

    def __init__(self, config: RecognizerConfig) -> None:
        super().__init__(config)
        h = config.touch_min_stroke
        self._zigzag = [[ZigZag(h), ZigZag(h)] for _ in ARMS]
        self._reversals = [[deque(), deque()] for _ in ARMS
                           ]  # type: List[List[Deque[float]]]
        self._last_active = [None, None]  # type: List[Optional[float]]

    def _reset_side(self, side: int) -> None:
        for axis in range(2):
            self._zigzag[side][axis].reset()
            self._reversals[side][axis].clear()

    def _in_chest_box(self, frame: FeatureFrame, side: int) -> bool:
        cfg = self.config
        shoulder, _, wrist = ARMS[side]
        if not frame.has(shoulder, wrist):
            return False
        p = frame.joint(wrist)
        return (0.0 <= p[UP_AXIS] <= frame.height(shoulder) and
                cfg.touch_forward_min <= p[FORWARD_AXIS] <=
                cfg.touch_forward_max)

    def _is_stroke(self, span: float, duration: float) -> bool:
        cfg = self.config
        return (cfg.touch_min_stroke - _EPS <= span <=
                cfg.touch_max_stroke + _EPS and
                span <= cfg.touch_max_speed * duration + _EPS)

    def step(self, frame: FeatureFrame,
             history: _History) -> Optional[GestureEvent]:
        cfg = self.config
        event = None
        for side, (_, _, wrist) in enumerate(ARMS):
            active = False
            if self._in_chest_box(frame, side):
                speed = history.speed(
                    wrist, frame.t - cfg.speed_window, frame.t,
                    float(np.linalg.norm(frame.wrist_velocity[side])))
                active = speed <= cfg.touch_max_speed + _EPS

            if not active:
                last = self._last_active[side]
                if last is None or frame.t - last > cfg.hold_grace + _EPS:
                    self._reset_side(side)
                    self._last_active[side] = None
                continue

            self._last_active[side] = frame.t
            if self.state == DetectorState.IDLE:
                self.state = DetectorState.TRACKING
            smoothed = history.mean_position(
                wrist, frame.t - cfg.speed_window, frame.t)
            if smoothed is None:
                continue
            t_mean, p = smoothed
            for axis, coord in enumerate((UP_AXIS, FORWARD_AXIS)):
                reversals = self._reversals[side][axis]
                reversal = self._zigzag[side][axis].update(
                    t_mean, float(p[coord]))
                if reversal is not None:
                    if self._is_stroke(reversal[1], reversal[2]):
                        reversals.append(reversal[0])
                    else:
                        reversals.clear()
                while reversals and frame.t - reversals[0] > cfg.touch_window:
                    reversals.popleft()
                if event is None and len(reversals) >= cfg.touch_reversals:
                    event = self._emit(history, list(ARMS[side]),
                                       reversals[0], reversals[-1])
                    if event is None and DetectorState.can_fire(self.state):
                        reversals.popleft()

        if self._last_active == [None, None]:
            self.release()
        return event


class _HeartDetector(_Detector):
    """Both hands held together, raised, elbows out, and still."""

    kind = GestureKind.HEART_SHAPE

    def __init__(self, config: RecognizerConfig) -> None:
        super().__init__(config)
        self._hold_start = None  # type: Optional[float]
        self._last_ok = None  # type: Optional[float]

    def _geometry_ok(self, frame: FeatureFrame) -> bool:
        cfg = self.config
        joints = [j for arm in ARMS for j in arm] + [JointId.SPINE_HIGH]
        if not frame.has(*joints):
            return False
        lw = frame.joint(JointId.LEFT_WRIST)
        rw = frame.joint(JointId.RIGHT_WRIST)
        chest = frame.height(JointId.SPINE_HIGH)
        margin = cfg.heart_elbow_margin - _EPS
        return bool(
            np.linalg.norm(lw - rw) <= cfg.heart_max_gap + _EPS and
            lw[UP_AXIS] >= chest and rw[UP_AXIS] >= chest and
            (frame.joint(JointId.LEFT_SHOULDER)[RIGHT_AXIS] -
             frame.joint(JointId.LEFT_ELBOW)[RIGHT_AXIS]) >= margin and
            (frame.joint(JointId.RIGHT_ELBOW)[RIGHT_AXIS] -
             frame.joint(JointId.RIGHT_SHOULDER)[RIGHT_AXIS]) >= margin)

    def step(self, frame: FeatureFrame,
             history: _History) -> Optional[GestureEvent]:
        cfg = self.config
        if self._geometry_ok(frame):
            if self._hold_start is None:
                self._hold_start = frame.t
                self.state = DetectorState.TRACKING if DetectorState.can_fire(
                    self.state) else self.state
            self._last_ok = frame.t
        elif (self._last_ok is None or
              frame.t - self._last_ok > cfg.hold_grace + _EPS):
            self._hold_start = None
            self._last_ok = None
            self.release()
            return None

        start = self._hold_start
        if start is None or frame.t - start < cfg.heart_hold - _EPS:
            return None
        for side, wrist in enumerate((JointId.LEFT_WRIST,
                                      JointId.RIGHT_WRIST)):
            speed = history.speed(
                wrist, start, frame.t,
                float(np.linalg.norm(frame.wrist_velocity[side])))
            if speed > cfg.heart_max_speed + _EPS:
                return None
        return self._emit(history, [j for arm in ARMS for j in arm], start,
                          frame.t)


class GestureRecognizer:
    """Runs the three detectors over a stream of feature frames.

    One recognizer belongs to one session; step it from one thread.

    Args:
        config: Detector thresholds.
    """

    def __init__(self, config: Optional[RecognizerConfig] = None) -> None:
        self._logger = logging.getLogger(__name__)
        self.config = config or RecognizerConfig()
        horizon = max(self.config.wave_window, self.config.touch_window,
                      3.0 * self.config.heart_hold) + 1.0
        self._history = _History(horizon)
        self._detectors = [
            _WaveDetector(self.config),
            _TouchDetector(self.config),
            _HeartDetector(self.config),
        ]  # type: List[_Detector]
        self._last_t = None  # type: Optional[float]

    def step(self, frame: FeatureFrame) -> List[GestureEvent]:
        """Feed one feature frame.

        Frames that do not advance time are ignored.

        Returns:
            Events completed by this frame, possibly none.
        """
        if self._last_t is not None and not frame.t > self._last_t:
            self._logger.warning('Skipping non-monotonic frame at t={}'
                                 .format(frame.t))
            return []
        self._last_t = frame.t
        self._history.push(frame)
        events = []
        for detector in self._detectors:
            event = detector.step(frame, self._history)
            if event is not None:
                events.append(event)
        return events

    def states(self) -> Dict[GestureKind, DetectorState]:
        return {d.kind: d.state for d in self._detectors}
