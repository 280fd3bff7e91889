from enum import Enum
from typing import Any, Dict


class GestureKind(Enum):
    """The interaction gestures the recognizer knows."""
    GREETING_WAVE = 'GreetingWave'
    AFFECTIONATE_TOUCH = 'AffectionateTouch'
    HEART_SHAPE = 'HeartShape'

    @staticmethod
    def from_label(label: str) -> 'GestureKind':
        """Parse a label as written in event files.

        Raises:
            ValueError: If the label is unknown.
        """
        return GestureKind(label)


class DetectorState(Enum):
    """Progress of a single gesture detector."""
    IDLE = 'Idle'
    TRACKING = 'Tracking'
    LATCHED = 'Latched'

    @staticmethod
    def can_fire(state: 'DetectorState') -> bool:
        """Whether a detector in this state may emit an event.

        A latched detector has fired for the current performance and
        waits for the gesture to end before re-arming.
        """
        return state != DetectorState.LATCHED


class GestureEvent:
    def __init__(self, kind: GestureKind, t_start: float, t_end: float,
                 confidence: float) -> None:
        """A recognised gesture.

        Args:
            kind: What was recognised.
            t_start: Start of the defining motion (s).
            t_end: Time the gesture was complete (s).
            confidence: Mean confidence of the joints involved.
        """
        if not t_start < t_end:
            raise ValueError('Gesture event must have t_start < t_end')
        self.kind = kind
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.confidence = float(min(1.0, max(0.0, confidence)))

    def __repr__(self) -> str:
        return 'GestureEvent({}, {:.3f}, {:.3f}, {:.3f})'.format(
            self.kind.value, self.t_start, self.t_end, self.confidence)

    def __eq__(self, other: Any) -> bool:
        return (isinstance(other, GestureEvent) and
                self.to_dict() == other.to_dict())

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            't_start': self.t_start,
            't_end': self.t_end,
            'confidence': self.confidence,
        }

    @staticmethod
    def from_dict(record: Dict[str, Any]) -> 'GestureEvent':
        return GestureEvent(GestureKind.from_label(record['kind']),
                            record['t_start'], record['t_end'],
                            record.get('confidence', 1.0))
