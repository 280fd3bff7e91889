"""Rotation helpers on top of scipy's Rotation.

Quaternions are stored scalar-last, (x, y, z, w), as scipy does. The
batched helpers work on stacks of 3x3 matrices, which is what the
skeleton code composes level by level.
"""
from typing import Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation

from pawcap.util import PawcapError


def _skew(k: np.ndarray) -> np.ndarray:
    out = np.zeros(k.shape[:-1] + (3, 3))
    out[..., 0, 1] = -k[..., 2]
    out[..., 0, 2] = k[..., 1]
    out[..., 1, 0] = k[..., 2]
    out[..., 1, 2] = -k[..., 0]
    out[..., 2, 0] = -k[..., 1]
    out[..., 2, 1] = k[..., 0]
    return out


def shortest_arc_matrices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotations taking each row of a to the same row of b.

    Args:
        a: (N, 3) source directions, non-zero.
        b: (N, 3) target directions, non-zero.

    Returns:
        (N, 3, 3) rotation matrices R with R a/|a| = b/|b|. Opposite
        directions get a half turn about a perpendicular axis.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    a = a / np.linalg.norm(a, axis=1)[:, None]
    b = b / np.linalg.norm(b, axis=1)[:, None]
    axis = np.cross(a, b)
    sin_angle = np.linalg.norm(axis, axis=1)
    cos_angle = np.clip(np.sum(a * b, axis=1), -1.0, 1.0)

    turning = sin_angle >= 1e-15
    k = np.zeros_like(axis)
    k[turning] = axis[turning] / sin_angle[turning, None]
    skew = _skew(k)
    matrices = (np.eye(3) + sin_angle[:, None, None] * skew +
                (1.0 - cos_angle)[:, None, None] * (skew @ skew))
    matrices[~turning & (cos_angle > 0.0)] = np.eye(3)

    for i in np.flatnonzero(~turning & (cos_angle <= 0.0)):
        perp = np.cross(a[i], [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a[i], [0.0, 1.0, 0.0])
        perp = perp / np.linalg.norm(perp)
        matrices[i] = 2.0 * np.outer(perp, perp) - np.eye(3)
    return matrices


def shortest_arc(a: np.ndarray, b: np.ndarray) -> Rotation:
    """The minimal rotation taking direction a to direction b.

    Args:
        a: Source direction, non-zero.
        b: Target direction, non-zero.

    Returns:
        A rotation R with R(a/|a|) = b/|b|.
    """
    return Rotation.from_matrix(shortest_arc_matrices(a, b)[0])


def twist_angles(rotations: Rotation, axes: np.ndarray) -> np.ndarray:
    """Angle of the twist part of each rotation about its axis.

    The twist about a unit axis u is the rotation about u closest to
    the given rotation.

    Args:
        rotations: N rotations.
        axes: (N, 3) unit axes.

    Returns:
        (N,) angles in radians, in (-2 pi, 2 pi].
    """
    quats = rotations.as_quat().reshape(-1, 4)
    along = np.sum(quats[:, :3] * np.asarray(axes).reshape(-1, 3), axis=1)
    return 2.0 * np.arctan2(along, quats[:, 3])


def slerp(q0: Rotation, q1: Rotation,
          weight: Union[float, np.ndarray]) -> Rotation:
    """Spherical interpolation; weight 0 gives q0, 1 gives q1.

    Stacks are interpolated rotation by rotation, with either one
    weight for all or one weight per rotation.
    """
    if np.ndim(weight) == 0:
        if weight <= 0.0:
            return q0
        if weight >= 1.0:
            return q1
    return q0 * scale_rotation(q0.inv() * q1, weight)


def scale_rotation(rotation: Rotation,
                   factor: Union[float, np.ndarray]) -> Rotation:
    """Slerp from identity towards rotation by factor.

    For a stack of rotations, factor may be one value per rotation.
    """
    rotvec = rotation.as_rotvec()
    if rotvec.ndim == 2:
        factor = np.asarray(factor, dtype=float).reshape(-1, 1)
    return Rotation.from_rotvec(rotvec * factor)


def angle_between(q0: Rotation, q1: Rotation) -> Union[float, np.ndarray]:
    """The angle (rad) of the rotation taking q0 to q1, per rotation
    for stacks."""
    angles = (q0.inv() * q1).magnitude()
    return angles if np.ndim(angles) else float(angles)


def check_unit(quats: Union[np.ndarray, Sequence],
               tolerance: float = 1e-6) -> np.ndarray:
    """Which (x, y, z, w) quaternions have unit norm within tolerance.

    Returns:
        One boolean per quaternion.
    """
    array = np.asarray(quats, dtype=float).reshape(-1, 4)
    return np.abs(np.linalg.norm(array, axis=1) - 1.0) <= tolerance


def canonical_quat(rotation: Rotation) -> np.ndarray:
    """Quaternion with non-negative w, for stable serialisation."""
    q = rotation.as_quat()
    if q[3] < 0.0:
        q = -q
    return q


class UnnormalizedRotation(PawcapError):
    pass


def rotations_from_quats(quats: Union[Rotation, np.ndarray, Sequence],
                         tolerance: float = 1e-6) -> Rotation:
    """Build rotations from (x, y, z, w) quaternions without silently
    normalising them.

    Args:
        quats: A Rotation (passed through) or an (N, 4) array.
        tolerance: Allowed deviation of each norm from 1.

    Raises:
        UnnormalizedRotation: If a quaternion is not unit length.
    """
    if isinstance(quats, Rotation):
        return quats
    array = np.asarray(quats, dtype=float).reshape(-1, 4)
    bad = np.flatnonzero(~check_unit(array, tolerance))
    if bad.size:
        raise UnnormalizedRotation(
            'Quaternion {} has norm {}'.format(
                int(bad[0]), float(np.linalg.norm(array[bad[0]]))))
    return Rotation.from_quat(array)
