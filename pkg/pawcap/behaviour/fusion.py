"""Windowed fusion of gesture events with audio-emotion events."""
import logging
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

from pawcap.behaviour.events import GestureEvent, GestureKind
from pawcap.util import PawcapError

VISUAL = 'visual'
AUDIO = 'audio'


class FusionOutOfOrder(PawcapError):
    """A fusion query went back in time."""


class Emotion(Enum):
    HAPPY = 'happy'
    NEUTRAL = 'neutral'
    SAD = 'sad'
    DISTRESSED = 'distressed'


class AudioEmotionEvent:
    """An emotion estimate coming from the audio model.

    Args:
        t: Timestamp (s).
        label: The estimated emotion.
        confidence: Model confidence in [0, 1].
    """

    def __init__(self, t: float, label: Emotion, confidence: float) -> None:
        if not 0.0 <= confidence <= 1.0:
            raise ValueError('Audio confidence must be in [0, 1]')
        self.t = float(t)
        self.label = label
        self.confidence = float(confidence)

    def __repr__(self) -> str:
        return 'AudioEmotionEvent({:.3f}, {}, {:.2f})'.format(
            self.t, self.label.value, self.confidence)

    def to_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'label': self.label.value,
                'confidence': self.confidence}

    @staticmethod
    def from_dict(record: Dict[str, Any]) -> 'AudioEmotionEvent':
        return AudioEmotionEvent(record['t'], Emotion(record['label']),
                                 record['confidence'])


class UserState:
    """What the system believes about the user at time t."""

    def __init__(self, t: float, emotion: Emotion, intensity: float,
                 active_gesture: Optional[GestureKind],
                 sources: Set[str]) -> None:
        self.t = float(t)
        self.emotion = emotion
        self.intensity = float(intensity)
        self.active_gesture = active_gesture
        self.sources = set(sources)

    def __repr__(self) -> str:
        return 'UserState({:.3f}, {}, {:.2f}, {}, {})'.format(
            self.t, self.emotion.value, self.intensity,
            self.active_gesture.value if self.active_gesture else None,
            sorted(self.sources))

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, UserState) and (
            self.to_dict() == other.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'emotion': self.emotion.value,
            'intensity': self.intensity,
            'active_gesture': (self.active_gesture.value
                               if self.active_gesture else None),
            'sources': sorted(self.sources),
        }

    @staticmethod
    def from_dict(record: Dict[str, Any]) -> 'UserState':
        gesture = record.get('active_gesture')
        return UserState(
            record['t'], Emotion(record['emotion']), record['intensity'],
            GestureKind.from_label(gesture) if gesture else None,
            set(record.get('sources', [])))


class FusionConfig:
    def __init__(
            self, window: float = 1.0, hold: Optional[float] = None,
            min_audio_confidence: float = 0.5,
            gesture_table: Optional[Dict[GestureKind,
                                         Tuple[Emotion, float]]] = None,
            audio_adjustments: Optional[Dict[Emotion, float]] = None
            ) -> None:
        """Settings of the fusion stage.

        Args:
            window: Length w of the fusion window ending at the query
                time (s).
            hold: How long after its end a gesture stays active;
                defaults to the window.
            min_audio_confidence: Audio events below this are ignored.
            gesture_table: Base emotion and intensity per gesture.
            audio_adjustments: Intensity change per audio emotion.
        """
        if window <= 0.0:
            raise ValueError('Fusion window must be positive')
        self.window = window
        self.hold = window if hold is None else hold
        if self.hold <= 0.0:
            raise ValueError('Gesture hold time must be positive')
        self.min_audio_confidence = min_audio_confidence
        self.gesture_table = gesture_table or {
            GestureKind.GREETING_WAVE: (Emotion.HAPPY, 0.6),
            GestureKind.AFFECTIONATE_TOUCH: (Emotion.HAPPY, 0.7),
            GestureKind.HEART_SHAPE: (Emotion.HAPPY, 0.9),
        }
        self.audio_adjustments = audio_adjustments or {
            Emotion.HAPPY: 0.1,
            Emotion.NEUTRAL: 0.0,
            Emotion.SAD: -0.2,
            Emotion.DISTRESSED: -0.2,
        }


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


class EmotionFusion:
    """Keeps the recent gesture and audio events of a session and
    combines them into a UserState on request.

    Events may be handed in before their time has come; they are only
    considered once the query time reaches them.
    """

    def __init__(self, config: Optional[FusionConfig] = None) -> None:
        self._logger = logging.getLogger(__name__)
        self.config = config or FusionConfig()
        self._gestures = []  # type: List[GestureEvent]
        self._audio = []  # type: List[AudioEmotionEvent]
        self._last_t = None  # type: Optional[float]

    def step(self, gesture_events: Iterable[GestureEvent],
             audio_events: Iterable[AudioEmotionEvent],
             t: float) -> UserState:
        """Add new events and compute the state at t.

        Raises:
            FusionOutOfOrder: If t is before the previous query.
        """
        if self._last_t is not None and t < self._last_t:
            raise FusionOutOfOrder(
                'Fusion queried at t={} after t={}'.format(t, self._last_t))
        self._last_t = t
        cfg = self.config
        self._gestures.extend(gesture_events)
        self._audio.extend(audio_events)

        horizon = t - max(cfg.window, cfg.hold)
        self._gestures = [g for g in self._gestures if g.t_end >= horizon]
        self._audio = [a for a in self._audio if a.t >= t - cfg.window]

        visual = [g for g in self._gestures
                  if t - cfg.window <= g.t_end <= t]
        audio = [a for a in self._audio
                 if a.t <= t and a.confidence >= cfg.min_audio_confidence]
        held = [g for g in self._gestures if t - cfg.hold <= g.t_end <= t]

        gesture = max(visual, key=lambda g: g.t_end) if visual else None
        heard = max(audio, key=lambda a: a.t) if audio else None
        active = (max(held, key=lambda g: g.t_end).kind if held else None)

        sources = set()  # type: Set[str]
        if gesture is not None:
            emotion, intensity = cfg.gesture_table[gesture.kind]
            sources.add(VISUAL)
            if heard is not None:
                intensity = intensity + cfg.audio_adjustments[heard.label]
                if heard.label == Emotion.DISTRESSED:
                    emotion = Emotion.DISTRESSED
                sources.add(AUDIO)
        elif heard is not None:
            emotion, intensity = heard.label, heard.confidence
            sources.add(AUDIO)
        else:
            emotion, intensity = Emotion.NEUTRAL, 0.0

        state = UserState(t, emotion, _clamp(intensity), active, sources)
        self._logger.debug('Fused {}'.format(state))
        return state
