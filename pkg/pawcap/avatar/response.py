"""Avatar responses: keyframed clips triggered by gestures, played
over the live retargeted pose with cross-fades."""
import copy
import json
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from pawcap.avatar.retargeting import AvatarPose
from pawcap.behaviour.events import GestureKind
from pawcap.behaviour.fusion import UserState
from pawcap.body.skeleton import Topology
from pawcap.geometry.rotations import (rotations_from_quats, scale_rotation,
                                       slerp)
from pawcap.util import PawcapError

DEFAULT_RESPONSES = {
    GestureKind.GREETING_WAVE: 'mimic_wave',
    GestureKind.AFFECTIONATE_TOUCH: 'victory_smile',
    GestureKind.HEART_SHAPE: 'shy',
}  # type: Dict[GestureKind, str]

IDLE_CLIP = 'idle'


class UnknownClip(PawcapError):
    pass


class ClipError(PawcapError):
    pass


def blend_poses(a: AvatarPose, b: AvatarPose, weight: float) -> AvatarPose:
    """Cross-fade from pose a (weight 0) to pose b (weight 1)."""
    if weight <= 0.0:
        return a
    if weight >= 1.0:
        return b
    return AvatarPose(
        b.t, slerp(a.local, b.local, weight),
        (1.0 - weight) * a.root_position + weight * b.root_position,
        slerp(a.root_rotation, b.root_rotation, weight))


class AnimationClip:
    """A keyframed animation of the target skeleton.

    Args:
        clip_id: Name of the clip.
        duration: Length (s).
        times: Keyframe times, sorted, from 0 to duration.
        keyframes: One stack of local rotations per keyframe.
        loop: Whether the clip repeats.

    Raises:
        ClipError: If the keyframe times are invalid.
    """

    def __init__(self, clip_id: str, duration: float, times: List[float],
                 keyframes: List[Rotation], loop: bool = False) -> None:
        if duration <= 0.0:
            raise ClipError('Clip {} has no duration'.format(clip_id))
        if len(times) < 2 or len(times) != len(keyframes):
            raise ClipError('Clip {} needs two or more keyframes'.format(
                clip_id))
        if times[0] != 0.0 or abs(times[-1] - duration) > 1e-9:
            raise ClipError('Keyframes of {} must span 0 to {}'.format(
                clip_id, duration))
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ClipError('Keyframes of {} are not sorted'.format(clip_id))
        self.clip_id = clip_id
        self.duration = float(duration)
        self.times = np.array(times, dtype=float)
        self.keyframes = keyframes
        self.loop = loop

    def sample(self, t: float) -> Rotation:
        """Local rotations at clip time t, wrapping for looped clips
        and holding the ends otherwise."""
        if self.loop:
            t = t % self.duration
        if t <= 0.0:
            return self.keyframes[0]
        k = int(np.searchsorted(self.times, t, side='right')) - 1
        if k >= len(self.times) - 1:
            return self.keyframes[-1]
        weight = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return slerp(self.keyframes[k], self.keyframes[k + 1], weight)

    @staticmethod
    def from_dict(record: Dict[str, Any], target: Topology
                  ) -> 'AnimationClip':
        """Read a clip record; joints left out of a keyframe are at rest.

        Raises:
            ClipError: On unknown joints or malformed records.
            UnnormalizedRotation: On non-unit quaternions.
        """
        try:
            times = []
            keyframes = []
            for keyframe in record['keyframes']:
                quats = np.tile([0.0, 0.0, 0.0, 1.0], (len(target), 1))
                for name, quat in keyframe.get('rotations', {}).items():
                    if not target.has_joint(name):
                        raise ClipError('Clip {} animates unknown joint {}'
                                        .format(record['id'], name))
                    quats[target.index(name)] = quat
                times.append(float(keyframe['t']))
                keyframes.append(rotations_from_quats(quats))
            return AnimationClip(record['id'], float(record['duration']),
                                 times, keyframes,
                                 bool(record.get('loop', False)))
        except (KeyError, TypeError, ValueError) as e:
            raise ClipError('Invalid clip record: {}'.format(e))


class ClipLibrary:
    def __init__(self, clips: List[AnimationClip]) -> None:
        self.clips = {clip.clip_id: clip for clip in clips}

    def __contains__(self, clip_id: str) -> bool:
        return clip_id in self.clips

    def get(self, clip_id: str) -> AnimationClip:
        """Look up a clip.

        Raises:
            UnknownClip: If there is no such clip.
        """
        if clip_id not in self.clips:
            raise UnknownClip('No clip named {} in the library'.format(
                clip_id))
        return self.clips[clip_id]


def load_clip_library(path: str, target: Topology) -> ClipLibrary:
    """Load a clip library file: a JSON array of clip records."""
    with open(path) as f:
        records = json.load(f)
    if not isinstance(records, list):
        raise ClipError('Clip library {} is not a list'.format(path))
    return ClipLibrary([AnimationClip.from_dict(r, target) for r in records])


class PlaybackConfig:
    def __init__(self, blend: float = 0.25,
                 max_angular_velocity: float = 720.0,
                 responses: Optional[Dict[GestureKind, str]] = None) -> None:
        """Playback settings.

        Args:
            blend: Cross-fade window (s).
            max_angular_velocity: Limit on joint rotation speed of the
                output, live mimicry included (degrees/s).
            responses: Clip to play per gesture.
        """
        if blend <= 0.0 or max_angular_velocity <= 0.0:
            raise ValueError('Blend window and angular velocity limit'
                             ' must be positive')
        self.blend = blend
        self.max_angular_velocity = max_angular_velocity
        self.responses = dict(responses or DEFAULT_RESPONSES)


class PlaybackState:
    """Where the player is.

    Attributes:
        clip_id: The active clip, or None.
        clock: Time into the active clip (s).
        blend: Cross-fade window (s).
        fade_clock: Time since the current cross-fade began (s).
        from_pose: The pose being faded out of, or None.
        intensity: Amplitude factor of the active clip.
    """

    def __init__(self, blend: float) -> None:
        self.clip_id = None  # type: Optional[str]
        self.clock = 0.0
        self.blend = blend
        self.fade_clock = 0.0
        self.from_pose = None  # type: Optional[AvatarPose]
        self.intensity = 1.0

    def blend_weight(self) -> float:
        if self.from_pose is None:
            return 1.0
        return min(1.0, max(0.0, self.fade_clock / self.blend))


class ResponsePlayer:
    """Plays response clips for one session.

    Ticking is driven by the caller; there are no timers.

    Args:
        library: Available clips.
        config: Playback settings.
    """

    def __init__(self, library: ClipLibrary,
                 config: Optional[PlaybackConfig] = None) -> None:
        self._logger = logging.getLogger(__name__)
        self.library = library
        self.config = config or PlaybackConfig()
        self.state = PlaybackState(self.config.blend)
        self._last_gesture = None  # type: Optional[GestureKind]
        self._last_output = None  # type: Optional[AvatarPose]

    def on_event(self, user_state: UserState) -> PlaybackState:
        """Start the response to a newly active gesture, if any.

        Raises:
            UnknownClip: If the response clip is not in the library.
        """
        gesture = user_state.active_gesture
        if gesture is not None and gesture != self._last_gesture:
            clip_id = self.config.responses.get(gesture)
            if clip_id is not None:
                self.library.get(clip_id)
                state = self.state
                state.from_pose = self._last_output
                state.fade_clock = 0.0
                state.clip_id = clip_id
                state.clock = 0.0
                state.intensity = min(1.0, max(0.0, user_state.intensity))
                self._logger.info('Playing {} for {} at t={}'.format(
                    clip_id, gesture.value, user_state.t))
        self._last_gesture = gesture
        return copy.copy(self.state)

    def idle_pose(self, target: Topology, t: float) -> AvatarPose:
        """The library's idle loop at time t, for when no live pose
        is available."""
        pose = AvatarPose.rest(target, t)
        if IDLE_CLIP in self.library:
            pose.local = self.library.get(IDLE_CLIP).sample(t)
        return pose

    def _limit(self, previous: AvatarPose, pose: AvatarPose,
               dt: float) -> AvatarPose:
        max_angle = np.radians(self.config.max_angular_velocity) * dt
        relative = previous.local.inv() * pose.local
        angles = relative.magnitude()
        if not np.any(angles > max_angle):
            return pose
        factors = np.minimum(1.0, max_angle / np.maximum(angles, 1e-12))
        local = previous.local * scale_rotation(relative, factors)
        return AvatarPose(pose.t, local, pose.root_position,
                          pose.root_rotation)

    def tick(self, dt: float, idle_pose: AvatarPose
             ) -> Tuple[AvatarPose, PlaybackState]:
        """Advance playback by dt and produce the output pose.

        Args:
            dt: Time step (s), positive.
            idle_pose: The pose shown when no clip plays, normally the
                live retargeted mimic pose.
        """
        if not dt > 0.0:
            raise ValueError('tick needs a positive time step')
        state = self.state
        state.fade_clock += dt
        output = idle_pose

        if state.clip_id is not None:
            clip = self.library.get(state.clip_id)
            state.clock += dt
            overrun = 0.0
            if not clip.loop and state.clock >= clip.duration:
                overrun = state.clock - clip.duration
                state.clock = clip.duration
            local = clip.sample(state.clock)
            if state.intensity < 1.0:
                local = scale_rotation(local, state.intensity)
            clip_pose = AvatarPose(idle_pose.t, local,
                                   idle_pose.root_position,
                                   idle_pose.root_rotation)
            output = clip_pose
            if state.from_pose is not None:
                output = blend_poses(state.from_pose, clip_pose,
                                     state.blend_weight())
            if not clip.loop and state.clock >= clip.duration:
                self._logger.debug('Clip {} finished'.format(state.clip_id))
                state.clip_id = None
                state.clock = 0.0
                state.from_pose = output
                state.fade_clock = overrun

        elif state.from_pose is not None:
            if state.fade_clock >= state.blend - 1e-9:
                state.from_pose = None
            else:
                output = blend_poses(state.from_pose, idle_pose,
                                     state.blend_weight())

        if self._last_output is not None:
            output = self._limit(self._last_output, output, dt)
        self._last_output = output
        return output, copy.copy(self.state)
