import numpy as np
import pytest

from pawcap.behaviour.events import GestureEvent, GestureKind
from pawcap.behaviour.fusion import (AUDIO, VISUAL, AudioEmotionEvent,
                                     Emotion, EmotionFusion, FusionConfig,
                                     FusionOutOfOrder, UserState)


def _heart(t_end):
    return GestureEvent(GestureKind.HEART_SHAPE, t_end - 1.0, t_end, 1.0)


def test_no_events():
    state = EmotionFusion().step([], [], 5.0)
    assert state.emotion == Emotion.NEUTRAL
    assert state.intensity == 0.0
    assert state.active_gesture is None
    assert state.sources == set()


def test_gesture_only():
    state = EmotionFusion().step([_heart(4.0)], [], 4.5)
    assert state.emotion == Emotion.HAPPY
    assert state.intensity == pytest.approx(0.9)
    assert state.active_gesture == GestureKind.HEART_SHAPE
    assert state.sources == {VISUAL}


def test_distressed_audio_overrides():
    fusion = EmotionFusion()
    audio = AudioEmotionEvent(4.3, Emotion.DISTRESSED, 0.9)
    state = fusion.step([_heart(4.0)], [audio], 4.5)
    assert state.emotion == Emotion.DISTRESSED
    assert state.intensity == pytest.approx(0.7)
    assert state.sources == {VISUAL, AUDIO}


def test_happy_audio_clamped():
    fusion = EmotionFusion()
    audio = AudioEmotionEvent(4.3, Emotion.HAPPY, 0.8)
    state = fusion.step([_heart(4.0)], [audio], 4.5)
    assert state.emotion == Emotion.HAPPY
    assert state.intensity == 1.0


def test_audio_alone():
    state = EmotionFusion().step(
        [], [AudioEmotionEvent(2.0, Emotion.SAD, 0.6)], 2.5)
    assert state.emotion == Emotion.SAD
    assert state.intensity == pytest.approx(0.6)
    assert state.sources == {AUDIO}
    assert state.active_gesture is None


def test_weak_audio_ignored():
    state = EmotionFusion().step(
        [], [AudioEmotionEvent(2.0, Emotion.DISTRESSED, 0.3)], 2.5)
    assert state.emotion == Emotion.NEUTRAL
    assert state.sources == set()


def test_staleness():
    fusion = EmotionFusion()
    fusion.step([_heart(4.0)], [AudioEmotionEvent(4.0, Emotion.HAPPY, 0.9)],
                4.0)
    state = fusion.step([], [], 5.01)
    assert state.emotion == Emotion.NEUTRAL
    assert state.active_gesture is None
    assert state.sources == set()


def test_future_events_wait():
    fusion = EmotionFusion()
    state = fusion.step([_heart(6.0)], [], 5.0)
    assert state.active_gesture is None
    state = fusion.step([], [], 6.2)
    assert state.active_gesture == GestureKind.HEART_SHAPE


def test_most_recent_gesture_wins():
    wave = GestureEvent(GestureKind.GREETING_WAVE, 3.0, 4.2, 1.0)
    state = EmotionFusion().step([_heart(4.0), wave], [], 4.5)
    assert state.active_gesture == GestureKind.GREETING_WAVE
    assert state.intensity == pytest.approx(0.6)


def test_hold_longer_than_window():
    fusion = EmotionFusion(FusionConfig(window=1.0, hold=3.0))
    state = fusion.step([_heart(4.0)], [], 6.0)
    assert state.active_gesture == GestureKind.HEART_SHAPE
    assert state.emotion == Emotion.NEUTRAL


def test_non_monotonic():
    fusion = EmotionFusion()
    fusion.step([], [], 2.0)
    fusion.step([], [], 2.0)
    with pytest.raises(FusionOutOfOrder):
        fusion.step([], [], 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(window=0.0)
    with pytest.raises(ValueError):
        FusionConfig(hold=-1.0)
    with pytest.raises(ValueError):
        AudioEmotionEvent(0.0, Emotion.HAPPY, 1.5)


def _random_streams(rng, duration=30.0):
    gestures = []
    t = 0.0
    kinds = list(GestureKind)
    while t < duration:
        t += rng.uniform(0.2, 3.0)
        gestures.append(GestureEvent(kinds[rng.integers(3)],
                                     t - rng.uniform(0.3, 2.0), t, 1.0))
    labels = list(Emotion)
    audio = [AudioEmotionEvent(t, labels[rng.integers(4)], rng.uniform())
             for t in np.sort(rng.uniform(0.0, duration, size=60))]
    return gestures, audio


def _replay(gestures, audio, config=None, dt=0.1, duration=30.0):
    """Feed each event once its time has come."""
    fusion = EmotionFusion(config)
    states = []
    g = a = 0
    for k in range(int(duration / dt)):
        t = k * dt
        new_g = []
        while g < len(gestures) and gestures[g].t_end <= t:
            new_g.append(gestures[g])
            g += 1
        new_a = []
        while a < len(audio) and audio[a].t <= t:
            new_a.append(audio[a])
            a += 1
        states.append(fusion.step(new_g, new_a, t))
    return states


def test_intensity_bounds_fuzz():
    rng = np.random.default_rng(9)
    for _ in range(10):
        gestures, audio = _random_streams(rng)
        for state in _replay(gestures, audio):
            assert 0.0 <= state.intensity <= 1.0


def test_determinism():
    gestures, audio = _random_streams(np.random.default_rng(10))
    assert _replay(gestures, audio) == _replay(gestures, audio)


def test_audio_absent_equivalence():
    gestures, audio = _random_streams(np.random.default_rng(12))
    config = FusionConfig()
    for with_audio, without in zip(_replay(gestures, audio),
                                   _replay(gestures, [])):
        assert with_audio.active_gesture == without.active_gesture
        if without.sources:
            expected = config.gesture_table[without.active_gesture][0]
            assert without.emotion == expected
        else:
            assert without.emotion == Emotion.NEUTRAL


def test_user_state_dict():
    state = UserState(1.5, Emotion.HAPPY, 0.6, GestureKind.GREETING_WAVE,
                      {AUDIO, VISUAL})
    record = state.to_dict()
    assert record['sources'] == ['audio', 'visual']
    assert UserState.from_dict(record) == state
    assert UserState.from_dict(
        UserState(0.0, Emotion.NEUTRAL, 0.0, None, set()).to_dict()
    ).active_gesture is None
