import numpy as np
import pytest

from pawcap.behaviour.events import GestureKind
from pawcap.body.joints import JointId
from pawcap.body.skeleton import constrain_pose, hinge_angles
from pawcap.geometry.stereo import (RawPose3D, pair_frames, project_points,
                                    triangulate_frame)
from pawcap.oracle.synthetic import (SCENARIO_KINDS, ScenarioSpec,
                                     SubjectOutOfFrustum, default_corpus,
                                     generate_motion, render_views,
                                     solve_two_bone)
from pawcap.test.helpers import parallel_rig


def _bone_lengths(topology, positions):
    return np.array([
        np.linalg.norm(positions[j] - positions[p]) if p >= 0 else 0.0
        for j, p in enumerate(topology.parents)])


def test_scenario_spec():
    spec = ScenarioSpec('heart', seed=4)
    assert spec.expected_kind == GestureKind.HEART_SHAPE
    assert ScenarioSpec('idle').expected_kind is None
    with pytest.raises(ValueError):
        ScenarioSpec('cartwheel')
    with pytest.raises(ValueError):
        ScenarioSpec('wave', fps=5.0)
    with pytest.raises(ValueError):
        ScenarioSpec('wave', duration=0.0)
    with pytest.raises(ValueError):
        ScenarioSpec('wave', torso_length=-0.5)


def test_default_corpus():
    corpus = default_corpus(seed=2)
    assert [spec.kind for spec in corpus] == list(SCENARIO_KINDS)
    assert len({spec.seed for spec in corpus}) == len(corpus)


def test_frame_times(wave):
    assert len(wave.poses) == 180
    assert wave.poses[0].t == 0.0
    assert wave.poses[30].t == pytest.approx(1.0)


def test_determinism(human):
    a = generate_motion(ScenarioSpec('petting', seed=8), human)
    b = generate_motion(ScenarioSpec('petting', seed=8), human)
    for pa, pb in zip(a.poses, b.poses):
        assert np.array_equal(pa.positions, pb.positions)
    assert [e.to_dict() for e in a.labels] == [e.to_dict() for e in b.labels]


@pytest.mark.parametrize('kind', SCENARIO_KINDS)
def test_bone_lengths_exact(human, kind):
    truth = generate_motion(ScenarioSpec(kind, seed=1), human)
    expected = truth.proportions.bone_lengths
    for pose in truth.poses[::10]:
        assert _bone_lengths(human, pose.positions) == pytest.approx(
            expected, abs=1e-9)


@pytest.mark.parametrize('kind', SCENARIO_KINDS)
def test_constraint_fixpoint(human, kind):
    truth = generate_motion(ScenarioSpec(kind, seed=1), human)
    for pose in truth.poses[::10]:
        constrained = constrain_pose(human, truth.proportions,
                                     RawPose3D(pose.t, pose.positions))
        assert constrained.positions == pytest.approx(pose.positions,
                                                      abs=1e-9)
        for angle in hinge_angles(human, pose).values():
            assert 0.0 <= angle <= 160.0


def test_torso_length(human):
    truth = generate_motion(ScenarioSpec('idle', torso_length=0.6), human)
    ratio = truth.proportions.bone_lengths[1:] / human.rest_lengths[1:]
    assert ratio == pytest.approx(np.full(len(ratio), 0.6 / 0.5))


def _waving_coordinate(truth, axis):
    wrists = np.array([[p.positions[JointId.LEFT_WRIST, axis],
                        p.positions[JointId.RIGHT_WRIST, axis]]
                       for p in truth.poses])
    return wrists[:, int(np.argmax(np.ptp(wrists, axis=0)))]


def _is_turn(signal, k, reach=3):
    window = signal[max(k - reach, 0):k + reach + 1]
    return signal[k] in (window.max(), window.min())


def test_labels(wave):
    assert len(wave.labels) == 1
    label = wave.labels[0]
    assert label.kind == GestureKind.GREETING_WAVE
    assert 0.0 < label.t_start < label.t_end < 6.0
    assert label.t_end - label.t_start == pytest.approx(0.5)


@pytest.mark.parametrize('kind,axis', [('wave', 0), ('petting', 1)])
def test_labels_span_two_turns(human, kind, axis):
    truth = generate_motion(ScenarioSpec(kind, seed=5), human)
    label, = truth.labels
    lateral = _waving_coordinate(truth, axis)
    fps = truth.spec.fps
    assert _is_turn(lateral, int(round(label.t_start * fps)))
    assert _is_turn(lateral, int(round(label.t_end * fps)))
    assert label.t_end - label.t_start <= 2.0


def test_heart_label_is_hold(human):
    truth = generate_motion(ScenarioSpec('heart', seed=5), human)
    label, = truth.labels
    assert label.kind == GestureKind.HEART_SHAPE
    assert label.t_end - label.t_start == pytest.approx(1.2)
    held = [p for p in truth.poses
            if label.t_start + 1e-9 <= p.t <= label.t_end - 1e-9]
    for pose in held:
        gap = np.linalg.norm(pose.positions[JointId.LEFT_WRIST] -
                             pose.positions[JointId.RIGHT_WRIST])
        assert gap <= 0.2 * truth.spec.torso_length
        assert pose.positions == pytest.approx(held[0].positions, abs=1e-12)


def test_labels_follow_schedule_not_detector(human):
    a = generate_motion(ScenarioSpec('wave', seed=5), human)
    b = generate_motion(ScenarioSpec('wave', seed=5, amplitude=0.5), human)
    assert [e.to_dict() for e in a.labels] == [e.to_dict() for e in b.labels]


def test_label_beyond_sequence_dropped(human):
    truth = generate_motion(ScenarioSpec('heart', duration=1.5), human)
    assert truth.labels == []


@pytest.mark.parametrize('kind', ['idle', 'low_wave_negative',
                                  'fast_walk_negative'])
def test_negatives_have_no_labels(human, kind):
    assert generate_motion(ScenarioSpec(kind), human).labels == []


def test_zero_noise_triangulation(room_rig, wave):
    left, right = render_views(room_rig, wave)
    assert len(left) == len(right) == len(wave.poses)
    pairs = pair_frames(left, right)
    assert len(pairs) == len(wave.poses)
    for (frame_l, frame_r), pose in zip(pairs[::15], wave.poses[::15]):
        raw = triangulate_frame(room_rig, frame_l, frame_r)
        assert raw.present.all()
        assert raw.positions == pytest.approx(pose.positions, abs=1e-6)


def test_noise_lowers_confidence(room_rig, wave):
    left, _ = render_views(room_rig, wave, noise_px=2.0, seed=1)
    assert np.all(left[0].points[:, 2] == 0.5)


def test_pixel_noise_level(room_rig, wave):
    left, _ = render_views(room_rig, wave, noise_px=2.0, seed=2)
    residuals = []
    for frame, pose in zip(left, wave.poses):
        pixels, _ = project_points(room_rig.left, pose.positions)
        kept = frame.present
        residuals.append(frame.points[kept, :2] - pixels[kept])
    residuals = np.concatenate(residuals)
    assert np.std(residuals) == pytest.approx(2.0, rel=0.05)
    assert np.abs(np.mean(residuals)) < 0.05


def test_triangulation_error_grows_with_noise(room_rig, wave):
    errors = []
    for noise in (0.5, 1.0, 2.0, 4.0):
        left, right = render_views(room_rig, wave, noise_px=noise, seed=3)
        total = []
        for frame_l, frame_r, pose in zip(left, right, wave.poses):
            raw = triangulate_frame(room_rig, frame_l, frame_r)
            present = raw.present
            total.extend(np.linalg.norm(
                raw.positions[present] - pose.positions[present], axis=1))
        errors.append(np.mean(total))
    assert np.all(np.diff(errors) > 0.0)
    assert errors[-1] == pytest.approx(8.0 * errors[0], rel=0.25)

def test_dropout_fraction(human, room_rig):
    truth = generate_motion(ScenarioSpec('idle'), human)
    left, right = render_views(room_rig, truth, dropout=0.2, seed=5)
    missing = [np.mean(~frame.present) for frame in left + right]
    assert 0.18 <= np.mean(missing) <= 0.22


def test_render_determinism(room_rig, wave):
    a, _ = render_views(room_rig, wave, noise_px=1.0, dropout=0.1, seed=6)
    b, _ = render_views(room_rig, wave, noise_px=1.0, dropout=0.1, seed=6)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.points, fb.points, equal_nan=True)


def test_out_of_frustum(wave):
    with pytest.raises(SubjectOutOfFrustum):
        render_views(parallel_rig(), wave)


def test_render_validation(room_rig, wave):
    with pytest.raises(ValueError):
        render_views(room_rig, wave, noise_px=-1.0)
    with pytest.raises(ValueError):
        render_views(room_rig, wave, dropout=1.5)


def test_solve_two_bone_reachable():
    root = np.zeros(3)
    target = np.array([0.0, -0.4, 0.1])
    pole = np.array([0.0, 0.0, 1.0])
    middle, end = solve_two_bone(root, target, 0.3, 0.25, pole)
    assert end == pytest.approx(target)
    assert np.linalg.norm(middle - root) == pytest.approx(0.3)
    assert np.linalg.norm(end - middle) == pytest.approx(0.25)
    assert (middle - root) @ pole > 0.0


def test_solve_two_bone_out_of_reach():
    root = np.zeros(3)
    pole = np.array([0.0, 0.0, 1.0])
    _, end = solve_two_bone(root, np.array([0.0, -2.0, 0.0]), 0.3, 0.25,
                            pole)
    assert np.linalg.norm(end) == pytest.approx(0.999 * 0.55)

    middle, end = solve_two_bone(root, np.array([0.0, -0.01, 0.0]), 0.3,
                                 0.25, pole)
    upper = middle - root
    lower = end - middle
    cos_flexion = upper @ lower / (np.linalg.norm(upper) *
                                   np.linalg.norm(lower))
    assert np.degrees(np.arccos(cos_flexion)) < 160.0
    assert np.linalg.norm(lower) == pytest.approx(0.25)
