import logging
from typing import Optional

import numpy as np

from pawcap.body.skeleton import SkeletonPose
from pawcap.util import PawcapError


class NonMonotonicTimestamp(PawcapError):
    pass


class TrackerConfig:
    def __init__(self, alpha: float = 0.5, beta: float = 0.1,
                 max_coast: int = 10, conf_decay: float = 0.8) -> None:
        """Settings of the per-joint alpha-beta filter.

        Args:
            alpha: Position gain, in (0, 1].
            beta: Velocity gain, in (0, 1].
            max_coast: Frames a joint may be predicted without a
                measurement before it is reported missing.
            conf_decay: Confidence factor per coasted frame.
        """
        if not (0.0 < alpha <= 1.0 and 0.0 < beta <= 1.0):
            raise ValueError('Tracker gains must be in (0, 1]')
        if max_coast < 0:
            raise ValueError('max_coast must be non-negative')
        if not 0.0 <= conf_decay <= 1.0:
            raise ValueError('conf_decay must be in [0, 1]')
        self.alpha = alpha
        self.beta = beta
        self.max_coast = max_coast
        self.conf_decay = conf_decay


class TrackedPose(SkeletonPose):
    """A filtered pose, with velocities and coasting flags.

    Args:
        t: Timestamp (s).
        positions: (N, 3) positions, NaN where missing.
        conf: (N,) confidences.
        velocities: (N, 3) velocities (m/s), NaN where missing.
        coasting: (N,) True where the position is a prediction.
    """

    def __init__(self, t: float, positions: np.ndarray, conf: np.ndarray,
                 velocities: np.ndarray, coasting: np.ndarray) -> None:
        super().__init__(t, positions, conf)
        self.velocities = np.array(velocities, dtype=float)
        self.coasting = np.array(coasting, dtype=bool)


class JointTracker:
    """Smooths a pose stream joint by joint and bridges short
    occlusions.

    Each joint runs an alpha-beta filter: its first measurement sets
    the position, its second also sets the velocity by finite
    difference, and later measurements are blended into the
    constant-velocity prediction. A missing joint is predicted
    (coasted) for up to ``max_coast`` frames with decaying confidence.

    A tracker belongs to one session and must not be stepped from two
    threads at once.

    Args:
        num_joints: Number of joints per pose.
        config: Filter settings.
    """

    def __init__(self, num_joints: int,
                 config: Optional[TrackerConfig] = None) -> None:
        self._logger = logging.getLogger(__name__)
        self.config = config or TrackerConfig()
        self.num_joints = num_joints
        self.reset()

    def reset(self) -> 'JointTracker':
        """Forget all history; the next step starts cold."""
        n = self.num_joints
        self.position = np.zeros((n, 3))
        """Position estimates (m)."""
        self.velocity = np.zeros((n, 3))
        """Velocity estimates (m/s)."""
        self.conf = np.zeros(n)
        """Confidence of the last emitted value per joint."""
        self.measurements = np.zeros(n, dtype=int)
        """Measurements seen since the joint was (re)acquired."""
        self.frames_since_measurement = np.zeros(n, dtype=int)
        self.last_t = None  # type: Optional[float]
        return self

    def predict(self, t: float) -> np.ndarray:
        """Positions the filter expects at t, without changing state.

        Returns:
            (N, 3) predictions, NaN for joints that are not tracked or
            have coasted for ``max_coast`` frames already.
        """
        dt = 0.0 if self.last_t is None else max(t - self.last_t, 0.0)
        alive = ((self.measurements > 0) &
                 (self.frames_since_measurement < self.config.max_coast))
        predicted = np.full((self.num_joints, 3), np.nan)
        predicted[alive] = (self.position[alive] +
                            self.velocity[alive] * dt)
        return predicted

    def step(self, pose: SkeletonPose, t: Optional[float] = None
             ) -> TrackedPose:
        """Filter one pose.

        Args:
            pose: The measured pose; missing joints are NaN.
            t: Timestamp, defaults to pose.t.

        Returns:
            The tracked pose at t.

        Raises:
            NonMonotonicTimestamp: If t does not exceed the previous
                step's time.
        """
        if t is None:
            t = pose.t
        if self.last_t is not None and not t > self.last_t:
            raise NonMonotonicTimestamp(
                'Tracker got t={} after t={}'.format(t, self.last_t))
        dt = 0.0 if self.last_t is None else t - self.last_t
        cfg = self.config

        measured = pose.present
        z = pose.positions
        first = measured & ((self.measurements == 0) | (dt == 0.0))
        second = measured & ~first & (self.measurements == 1)
        steady = measured & ~first & ~second
        coast = (~measured & (self.measurements > 0) &
                 (self.frames_since_measurement < cfg.max_coast))
        lost = ~measured & ~coast

        self.position[first] = z[first]
        self.velocity[first] = 0.0
        if dt > 0.0:
            self.velocity[second] = (z[second] - self.position[second]) / dt
            self.position[second] = z[second]

            predicted = self.position[steady] + self.velocity[steady] * dt
            residual = z[steady] - predicted
            self.position[steady] = predicted + cfg.alpha * residual
            self.velocity[steady] += (cfg.beta / dt) * residual

            self.position[coast] += self.velocity[coast] * dt
        self.measurements[measured] += 1
        self.frames_since_measurement[measured] = 0
        self.conf[measured] = pose.conf[measured]
        self.frames_since_measurement[coast] += 1
        self.conf[coast] *= cfg.conf_decay

        dropped = lost & (self.measurements > 0)
        if np.any(dropped):
            self._logger.debug('Joints {} lost at t={} after coasting'
                               .format(list(np.flatnonzero(dropped)), t))
        self.measurements[lost] = 0
        self.conf[lost] = 0.0

        out_pos = np.where(lost[:, None], np.nan, self.position)
        out_vel = np.where(lost[:, None], np.nan, self.velocity)
        out_conf = np.where(lost, 0.0, self.conf)
        self.last_t = t
        return TrackedPose(t, out_pos, out_conf, out_vel, coast)
