"""Feature frame builders for the behaviour tests."""
import numpy as np

from pawcap.behaviour.features import FeatureExtractor, FeatureFrame
from pawcap.body.joints import JointId


def features_of(poses):
    extractor = FeatureExtractor()
    return [extractor.step(pose) for pose in poses]


def rest_frame(human, t=0.0):
    """Rest pose features, built by hand."""
    pelvis = human.rest_positions[JointId.PELVIS]
    basis = np.diag([-1.0, 1.0, 1.0])
    positions = (human.rest_positions - pelvis) @ basis / 0.5
    return FeatureFrame(t, 0.5, pelvis, basis, positions,
                        np.ones(len(human)), np.zeros((2, 3)))


def wave_frame(human, t, lateral, raised=True):
    """Rest features with the left wrist up (or down) at a lateral
    position, in T."""
    frame = rest_frame(human, t)
    height = 1.5 if raised else 0.3
    frame.positions[JointId.LEFT_WRIST] = [lateral, height, 0.3]
    return frame


def stroke_frame(human, t, height, forward=0.4):
    """Rest features with the left wrist lowered in front of the chest
    at the given height, in T."""
    frame = rest_frame(human, t)
    frame.positions[JointId.LEFT_WRIST] = [-0.3, height, forward]
    return frame
