"""The streaming pipeline: keypoints in, tracked poses, gesture
events, user states and avatar poses out.

A ``Session`` holds all per-subject state. Feeding it a stream in one
``process`` call or in any number of chunks gives the same output.
"""
import logging
from collections import deque
from typing import Deque, Iterable, List, Optional, Tuple

import numpy as np

from pawcap.avatar.response import (ClipLibrary, PlaybackConfig,
                                    ResponsePlayer, load_clip_library)
from pawcap.avatar.retargeting import (AvatarPose, BoneMap, auto_map,
                                       retarget_pose)
from pawcap.behaviour.events import GestureEvent
from pawcap.behaviour.features import DegenerateBasis, FeatureExtractor
from pawcap.behaviour.fusion import (AudioEmotionEvent, EmotionFusion,
                                     FusionConfig, UserState)
from pawcap.behaviour.recognizer import GestureRecognizer, RecognizerConfig
from pawcap.body.joints import NUM_JOINTS
from pawcap.body.skeleton import (DegenerateDirection,
                                  InsufficientObservations, JointRotations,
                                  MissingRoot, SkeletonPose,
                                  SkeletonProportions, Topology,
                                  constrain_pose, estimate_proportions,
                                  load_human_topology, load_topology,
                                  pose_to_rotations, update_proportions)
from pawcap.body.tracker import JointTracker, TrackedPose, TrackerConfig
from pawcap.config import Config, ConfigError
from pawcap.geometry.stereo import (FramePairer, KeypointFrame2D, RawPose3D,
                                    StereoRig, default_rig, load_rig,
                                    triangulate_frame)
from pawcap.pipeline.streams import split_cameras
from pawcap.util import PawcapError

NOMINAL_FRAME_INTERVAL = 1.0 / 30.0


class PipelineError(PawcapError):
    """A module error, tagged with the time of the frame it hit."""

    def __init__(self, t: float, cause: Exception) -> None:
        super().__init__('At t={}: {}: {}'.format(
            t, type(cause).__name__, cause))
        self.t = t
        self.cause = cause


class SessionOutput:
    """Everything a session produced, in time order."""

    def __init__(self) -> None:
        self.tracked = []  # type: List[TrackedPose]
        self.events = []  # type: List[GestureEvent]
        self.user_states = []  # type: List[UserState]
        self.avatar = []  # type: List[AvatarPose]

    def extend(self, other: 'SessionOutput') -> None:
        self.tracked.extend(other.tracked)
        self.events.extend(other.events)
        self.user_states.extend(other.user_states)
        self.avatar.extend(other.avatar)


class Tracking:
    """Pairs stereo frames and turns them into tracked poses.

    The first ``warm_up`` triangulated frames are held back until the
    subject's proportions can be estimated from them; they are then
    replayed, so no frame is lost.

    A joint that fails to triangulate is stood in for by the tracker's
    prediction while the pose is constrained, so its children can
    still be placed. The stand-in itself is not fed back to the
    tracker, which coasts that joint.
    """

    def __init__(self, rig: StereoRig, topology: Topology,
                 tracker_config: TrackerConfig, sync_tolerance: float = 0.002,
                 max_reproj_error: Optional[float] = None,
                 warm_up: int = 15, proportions_alpha: float = 0.02,
                 proportions_min_conf: float = 0.5) -> None:
        self._logger = logging.getLogger(__name__)
        self.rig = rig
        self.topology = topology
        self.sync_tolerance = sync_tolerance
        self.max_reproj_error = max_reproj_error
        self.warm_up = warm_up
        self.proportions_alpha = proportions_alpha
        self.proportions_min_conf = proportions_min_conf
        self.tracker = JointTracker(NUM_JOINTS, tracker_config)

        self.proportions = None  # type: Optional[SkeletonProportions]
        """Current subject proportions, None during warm-up."""
        self._warm_up_frames = []  # type: List[RawPose3D]
        self._pairer = FramePairer(sync_tolerance)

    def _fill_gaps(self, raw: RawPose3D) -> Tuple[RawPose3D, np.ndarray]:
        missing = ~raw.present
        if not np.any(missing):
            return raw, missing
        predicted = self.tracker.predict(raw.t)
        filled = missing & ~np.any(np.isnan(predicted), axis=1)
        if not np.any(filled):
            return raw, filled
        positions = raw.positions.copy()
        positions[filled] = predicted[filled]
        return RawPose3D(raw.t, positions, raw.conf, raw.reproj_err), filled

    def _track(self, raw: RawPose3D) -> TrackedPose:
        assert self.proportions is not None
        self.proportions = update_proportions(
            self.proportions, raw, self.topology, self.proportions_alpha,
            self.proportions_min_conf)
        filled_raw, filled = self._fill_gaps(raw)
        try:
            pose = constrain_pose(self.topology, self.proportions,
                                  filled_raw)
            pose.positions[filled] = np.nan
            pose.conf[filled] = 0.0
        except MissingRoot:
            self._logger.warning('No pelvis at t={}, coasting'.format(raw.t))
            pose = SkeletonPose(raw.t, np.full((NUM_JOINTS, 3), np.nan))
        try:
            return self.tracker.step(pose)
        except PawcapError as e:
            raise PipelineError(raw.t, e)

    def _consume(self, pairs: List[Tuple[KeypointFrame2D, KeypointFrame2D]]
                 ) -> List[TrackedPose]:
        tracked = []
        for left, right in pairs:
            try:
                raw = triangulate_frame(self.rig, left, right,
                                        self.sync_tolerance,
                                        self.max_reproj_error)
            except PawcapError as e:
                raise PipelineError(left.t, e)

            if self.proportions is None:
                if np.any(raw.present):
                    self._warm_up_frames.append(raw)
                if len(self._warm_up_frames) < self.warm_up:
                    continue
                try:
                    self.proportions = estimate_proportions(
                        self._warm_up_frames, self.topology, self.warm_up)
                except InsufficientObservations as e:
                    self._logger.debug(str(e))
                    continue
                self._logger.info('Estimated proportions from {} frames'
                                  .format(len(self._warm_up_frames)))
                backlog, self._warm_up_frames = self._warm_up_frames, []
                tracked.extend(self._track(r) for r in backlog)
                continue

            tracked.append(self._track(raw))
        return tracked

    def step(self, frames: Iterable[KeypointFrame2D]) -> List[TrackedPose]:
        """Consume keypoint frames of both cameras.

        A frame is held until its partner is certain, so the last
        frames of a chunk may only come out of a later call or of
        ``finish``.

        Returns:
            Tracked poses that became available.
        """
        left_id, right_id = self.rig.left.id, self.rig.right.id
        streams = split_cameras(list(frames), left_id, right_id)
        return self._consume(self._pairer.push(streams[left_id],
                                               streams[right_id]))

    def finish(self) -> List[TrackedPose]:
        """Process the frames still held at the end of input.

        Returns:
            The remaining tracked poses.
        """
        tracked = self._consume(self._pairer.flush())
        if self._warm_up_frames:
            self._logger.warning(
                'Input ended during warm-up, dropping {} frames'.format(
                    len(self._warm_up_frames)))
        return tracked


class Recognition:
    """Gesture recognition and emotion fusion over tracked poses."""

    def __init__(self, recognizer_config: RecognizerConfig,
                 fusion_config: FusionConfig) -> None:
        self._logger = logging.getLogger(__name__)
        self.features = FeatureExtractor()
        self.recognizer = GestureRecognizer(recognizer_config)
        self.fusion = EmotionFusion(fusion_config)
        self._audio = deque()  # type: Deque[AudioEmotionEvent]

    def add_audio(self, audio: Iterable[AudioEmotionEvent]) -> None:
        self._audio.extend(audio)

    def step(self, pose: SkeletonPose
             ) -> Tuple[List[GestureEvent], UserState]:
        """Recognise gestures in one pose and update the user state."""
        events = []  # type: List[GestureEvent]
        try:
            frame = self.features.step(pose)
            events = self.recognizer.step(frame)
        except DegenerateBasis as e:
            self._logger.warning('Skipping frame at t={}: {}'.format(
                pose.t, e))
        due = []
        while self._audio and self._audio[0].t <= pose.t:
            due.append(self._audio.popleft())
        return events, self.fusion.step(events, due, pose.t)


class Animation:
    """Drives the avatar: live mimicry plus response clips."""

    def __init__(self, human: Topology, bone_map: BoneMap,
                 library: ClipLibrary, playback: PlaybackConfig,
                 idle_amplitude: float = 10.0) -> None:
        self._logger = logging.getLogger(__name__)
        self.human = human
        self.bone_map = bone_map
        self.player = ResponsePlayer(library, playback)
        self.idle_amplitude = idle_amplitude
        self._mimic = None  # type: Optional[AvatarPose]
        self._rotations = None  # type: Optional[JointRotations]
        self._last_t = None  # type: Optional[float]

    def mimic(self, pose: SkeletonPose,
              proportions: Optional[SkeletonProportions] = None
              ) -> AvatarPose:
        """Retarget a pose, or hold the last one if it is incomplete."""
        target = self.bone_map.target
        if np.all(pose.present):
            try:
                rotations = pose_to_rotations(self.human, pose,
                                              self._rotations)
                self._rotations = rotations
                self._mimic = retarget_pose(self.bone_map, rotations,
                                            proportions, self.idle_amplitude)
                return self._mimic
            except DegenerateDirection as e:
                self._logger.debug('Cannot retarget t={}: {}'.format(
                    pose.t, e))
        if self._mimic is None:
            return self.player.idle_pose(target, pose.t)
        return AvatarPose(pose.t, self._mimic.local,
                          self._mimic.root_position,
                          self._mimic.root_rotation)

    def step(self, pose: SkeletonPose, user_state: Optional[UserState],
             proportions: Optional[SkeletonProportions] = None
             ) -> AvatarPose:
        idle = self.mimic(pose, proportions)
        if user_state is not None:
            self.player.on_event(user_state)
        dt = (NOMINAL_FRAME_INTERVAL if self._last_t is None
              else pose.t - self._last_t)
        self._last_t = pose.t
        output, _ = self.player.tick(dt, idle)
        return output


class Session:
    """One subject in front of one rig, start to finish.

    Args:
        config: The session configuration.
        rig: The stereo rig.
        human: The human topology.
        target: The avatar skeleton.
        library: The avatar's clips.
    """

    def __init__(self, config: Config, rig: StereoRig, human: Topology,
                 target: Topology, library: ClipLibrary) -> None:
        self._logger = logging.getLogger(__name__)
        self.config = config
        self.tracking = Tracking(
            rig, human, config.get_tracker_config(),
            config.get_sync_tolerance(), config.get_max_reproj_error(),
            config.get_warm_up_frames(), config.get_proportions_alpha(),
            config.get_proportions_min_conf())
        """Triangulation, proportions, constraints and filtering."""
        self.recognition = Recognition(config.get_recognizer_config(),
                                       config.get_fusion_config())
        """Gesture detection and fusion."""
        self.animation = Animation(human, auto_map(human, target), library,
                                   config.get_playback_config(),
                                   config.get_idle_amplitude())
        """Avatar mimicry and responses."""

    def _run(self, poses: List[TrackedPose]) -> SessionOutput:
        output = SessionOutput()
        for pose in poses:
            try:
                events, state = self.recognition.step(pose)
                avatar = self.animation.step(pose, state,
                                             self.tracking.proportions)
            except PipelineError:
                raise
            except PawcapError as e:
                raise PipelineError(pose.t, e)
            output.tracked.append(pose)
            output.events.extend(events)
            output.user_states.append(state)
            output.avatar.append(avatar)
        return output

    def process(self, frames: Iterable[KeypointFrame2D],
                audio: Iterable[AudioEmotionEvent] = ()) -> SessionOutput:
        """Run a chunk of input through the whole pipeline.

        Args:
            frames: Keypoint frames of both cameras, time-sorted per
                camera.
            audio: Audio emotion events, time-sorted.

        Raises:
            PipelineError: If a stage fails on a frame.
        """
        self.recognition.add_audio(audio)
        return self._run(self.tracking.step(frames))

    def finish(self) -> SessionOutput:
        """End the input and run the frames still held back.

        Raises:
            PipelineError: If a stage fails on a frame.
        """
        return self._run(self.tracking.finish())


def load_session(config: Config) -> Session:
    """Load the files a configuration refers to and start a session.

    Raises:
        ConfigError: If a referenced file is missing or invalid.
    """
    try:
        path = config.get_calibration_path()
        rig = default_rig() if path is None else load_rig(path)
        human = load_human_topology(config.get_topology_path())
        target = load_topology(config.get_target_skeleton_path())
        library = load_clip_library(config.get_clip_library_path(), target)
        return Session(config, rig, human, target, library)
    except (OSError, ValueError, PawcapError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError('Could not set up session: {}'.format(e))
