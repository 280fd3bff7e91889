"""Pinhole cameras with two-term radial distortion, and two-view
triangulation of labelled keypoints.

Conventions: the world frame is right-handed, +Y up, in meters. Each
camera maps world points to its own frame with ``X_c = R X_w + t``; in
the camera frame +Z is the viewing direction, +X maps to +u (right) and
+Y to +v (down), with the image origin at the top-left corner.
"""
import json
import logging
import math
from collections import deque
from typing import (Any, Deque, Dict, Iterable, List, Optional, Sequence,
                    Tuple)

import numpy as np

from pawcap.body.joints import NUM_JOINTS
from pawcap.util import PawcapError

_logger = logging.getLogger(__name__)

DEFAULT_SYNC_TOLERANCE = 0.002
"""Maximum timestamp difference between paired left/right frames (s)."""


class NonPositiveDepth(PawcapError):
    pass


class NoConvergence(PawcapError):
    pass


class DegenerateRays(PawcapError):
    pass


class BehindCamera(PawcapError):
    pass


class FrameSyncError(PawcapError):
    pass


class CalibrationError(PawcapError):
    pass


class CameraModel:
    """A calibrated pinhole camera with radial distortion.

    Args:
        cam_id: Camera index, as used in keypoint streams.
        fx, fy: Focal lengths in pixels.
        cx, cy: Principal point in pixels.
        k1, k2: Radial distortion coefficients.
        rotation: 3x3 world-to-camera rotation matrix.
        translation: World-to-camera translation in meters.

    Raises:
        CalibrationError: If the focal lengths are not positive or the
            rotation is not a proper rotation.
    """

    def __init__(self, cam_id: int, fx: float, fy: float, cx: float,
                 cy: float, k1: float = 0.0, k2: float = 0.0,
                 rotation: Optional[Sequence] = None,
                 translation: Optional[Sequence] = None) -> None:
        if not (fx > 0.0 and fy > 0.0):
            raise CalibrationError(
                'Camera {}: focal lengths must be positive'.format(cam_id))

        if rotation is None:
            rotation = np.eye(3)
        if translation is None:
            translation = np.zeros(3)
        rot = np.asarray(rotation, dtype=float).reshape(3, 3)
        if (np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-9
                or abs(np.linalg.det(rot) - 1.0) > 1e-9):
            raise CalibrationError(
                'Camera {}: rotation is not orthonormal with'
                ' determinant +1'.format(cam_id))

        self.id = int(cam_id)
        self.fx = float(fx)
        self.fy = float(fy)
        self.cx = float(cx)
        self.cy = float(cy)
        self.k1 = float(k1)
        self.k2 = float(k2)
        self.rotation = rot
        """World-to-camera rotation."""
        self.translation = np.asarray(translation, dtype=float).reshape(3)
        """World-to-camera translation (m)."""

    @property
    def center(self) -> np.ndarray:
        """The camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, p: np.ndarray) -> np.ndarray:
        """Transform a world point into this camera's frame."""
        return self.rotation @ np.asarray(p, dtype=float) + self.translation

    def distortion_factor(self, r2: np.ndarray) -> np.ndarray:
        """Radial scale of normalised coordinates at squared radius r2."""
        return 1.0 + self.k1 * r2 + self.k2 * r2 * r2

    def to_dict(self) -> Dict[str, Any]:
        """Serialise to the calibration file camera record."""
        return {
            'id': self.id,
            'fx': self.fx, 'fy': self.fy,
            'cx': self.cx, 'cy': self.cy,
            'k1': self.k1, 'k2': self.k2,
            'R': [float(x) for x in self.rotation.flatten()],
            't': [float(x) for x in self.translation],
        }

    @staticmethod
    def from_dict(record: Dict[str, Any]) -> 'CameraModel':
        """Create a camera from a calibration file record.

        Raises:
            CalibrationError: If required keys are missing.
        """
        try:
            return CameraModel(
                record['id'], record['fx'], record['fy'], record['cx'],
                record['cy'], record.get('k1', 0.0), record.get('k2', 0.0),
                record['R'], record['t'])
        except (KeyError, TypeError, ValueError) as e:
            raise CalibrationError(
                'Invalid camera record: {}'.format(e))


class StereoRig:
    """A pair of calibrated cameras.

    Raises:
        CalibrationError: If both cameras have the same center or id.
    """

    def __init__(self, left: CameraModel, right: CameraModel) -> None:
        if left.id == right.id:
            raise CalibrationError('Stereo cameras must have distinct ids')
        if np.linalg.norm(left.center - right.center) <= 0.0:
            raise CalibrationError('Stereo baseline must be positive')
        self.left = left
        self.right = right

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.left.center - self.right.center))

    def camera(self, cam_id: int) -> CameraModel:
        """Returns the camera with the given id.

        Raises:
            CalibrationError: If neither camera has that id.
        """
        for cam in (self.left, self.right):
            if cam.id == cam_id:
                return cam
        raise CalibrationError('No camera with id {} in rig'.format(cam_id))

    def to_dict(self) -> Dict[str, Any]:
        return {'cameras': [self.left.to_dict(), self.right.to_dict()]}


def load_rig(path: str) -> StereoRig:
    """Load a stereo rig from a calibration JSON file.

    The first camera listed is the left one.

    Args:
        path: Path of the calibration file.

    Returns:
        The rig.

    Raises:
        CalibrationError: If the file is invalid or does not list
            exactly two cameras.
    """
    try:
        with open(path) as f:
            calibration = json.load(f)
    except (OSError, ValueError) as e:
        raise CalibrationError(
            'Could not read calibration file {}: {}'.format(path, e))

    cameras = calibration.get('cameras') if isinstance(
        calibration, dict) else None
    if not isinstance(cameras, list) or len(cameras) != 2:
        raise CalibrationError(
            'Calibration file {} must list exactly two cameras'.format(path))
    return StereoRig(CameraModel.from_dict(cameras[0]),
                     CameraModel.from_dict(cameras[1]))


def looking_at(cam_id: int, position: Sequence[float], target: Sequence[float],
               f: float = 1000.0, width: int = 1920, height: int = 1080,
               k1: float = 0.0, k2: float = 0.0) -> CameraModel:
    """Make an upright camera at position, looking at target.

    The camera's image 'down' direction is world -Y, projected to be
    perpendicular to the viewing direction.
    """
    pos = np.asarray(position, dtype=float)
    forward = np.asarray(target, dtype=float) - pos
    forward /= np.linalg.norm(forward)
    down = np.array([0.0, -1.0, 0.0])
    down = down - forward * float(down @ forward)
    down /= np.linalg.norm(down)
    right = np.cross(down, forward)
    rotation = np.vstack([right, down, forward])
    return CameraModel(cam_id, f, f, width / 2.0, height / 2.0, k1, k2,
                       rotation, -rotation @ pos)


def default_rig(baseline: float = 0.5, distance: float = 2.5,
                f: float = 1000.0, height: float = 1.0) -> StereoRig:
    """The living-room rig used for synthetic corpora.

    Two parallel cameras at the given height, ``distance`` meters in
    front of the subject (along world +Z), looking along world -Z.
    """
    half = baseline / 2.0
    left = looking_at(0, (-half, height, distance), (-half, height, 0.0), f)
    right = looking_at(1, (half, height, distance), (half, height, 0.0), f)
    return StereoRig(left, right)


def project_points(camera: CameraModel, points: np.ndarray
                   ) -> Tuple[np.ndarray, np.ndarray]:
    """Project world points to distorted pixel coordinates.

    Args:
        camera: The camera to project through.
        points: (N, 3) world points (m).

    Returns:
        (N, 2) pixels and (N,) camera-frame depths. Pixels of points
        not in front of the camera are NaN.
    """
    pc = np.asarray(points, dtype=float).reshape(-1, 3) @ (
        camera.rotation.T) + camera.translation
    depth = pc[:, 2]
    front = depth > 1e-9
    xy = np.full((len(pc), 2), np.nan)
    xy[front] = pc[front, :2] / depth[front, None]
    r2 = np.sum(xy * xy, axis=1)
    factor = camera.distortion_factor(r2)
    pixels = np.column_stack([camera.fx * xy[:, 0] * factor + camera.cx,
                              camera.fy * xy[:, 1] * factor + camera.cy])
    return pixels, depth


def project(camera: CameraModel, p: Sequence[float]
            ) -> Tuple[np.ndarray, float]:
    """Project a world point to distorted pixel coordinates.

    Args:
        camera: The camera to project through.
        p: A world point (m).

    Returns:
        The pixel (u, v) and the camera-frame depth Z.

    Raises:
        NonPositiveDepth: If the point is not in front of the camera.
    """
    pixels, depths = project_points(camera, np.asarray(p, dtype=float))
    depth = float(depths[0])
    if depth <= 1e-9:
        raise NonPositiveDepth(
            'Point has depth {} in camera {}'.format(depth, camera.id))
    return pixels[0], depth


def undistort_points(camera: CameraModel, pixels: np.ndarray,
                     max_iterations: int = 20, tolerance: float = 1e-12
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Invert the distortion model for finite pixels.

    Runs a fixed-point iteration on all rows at once; rows drop out as
    they settle.

    Args:
        camera: The camera the pixels were observed in.
        pixels: (N, 2) distorted pixel coordinates.

    Returns:
        (N, 2) normalised undistorted coordinates, and an (N,) mask of
        rows whose iteration converged. The viewing ray of a row in
        the camera frame is (x, y, 1).
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    xd = (pixels[:, 0] - camera.cx) / camera.fx
    yd = (pixels[:, 1] - camera.cy) / camera.fy
    if camera.k1 == 0.0 and camera.k2 == 0.0:
        return np.column_stack([xd, yd]), np.ones(len(pixels), dtype=bool)

    x, y = xd.copy(), yd.copy()
    converged = np.zeros(len(pixels), dtype=bool)
    failed = np.zeros(len(pixels), dtype=bool)
    for _ in range(max_iterations):
        active = np.flatnonzero(~(converged | failed))
        if len(active) == 0:
            break
        r2 = x[active] ** 2 + y[active] ** 2
        factor = camera.distortion_factor(r2)
        bad = ~(np.isfinite(factor) & (factor > 0.0))
        failed[active[bad]] = True
        good = active[~bad]
        x_new = xd[good] / factor[~bad]
        y_new = yd[good] / factor[~bad]
        step = np.maximum(np.abs(x_new - x[good]), np.abs(y_new - y[good]))
        x[good] = x_new
        y[good] = y_new
        converged[good[step < tolerance]] = True
    return np.column_stack([x, y]), converged


def undistort_normalize(camera: CameraModel, pixel: Sequence[float],
                        max_iterations: int = 20,
                        tolerance: float = 1e-12) -> np.ndarray:
    """Invert the distortion model for a pixel.

    Args:
        camera: The camera the pixel was observed in.
        pixel: Distorted pixel coordinates (u, v).

    Returns:
        Normalised undistorted coordinates (x, y); the viewing ray in
        the camera frame is (x, y, 1).

    Raises:
        NoConvergence: If the fixed-point iteration does not settle,
            which means the distortion is outside the supported range.
    """
    u, v = float(pixel[0]), float(pixel[1])
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ValueError('Pixel coordinates must be finite')
    xy, converged = undistort_points(camera, np.array([u, v]),
                                     max_iterations, tolerance)
    if not converged[0]:
        raise NoConvergence(
            'Undistortion did not converge for pixel ({}, {}) in camera'
            ' {}'.format(u, v, camera.id))
    return xy[0]


def _rays(camera: CameraModel, pixels: np.ndarray
          ) -> Tuple[np.ndarray, np.ndarray]:
    """World-frame unit directions of the pixels' viewing rays, and
    the mask of rows whose undistortion converged."""
    xy, converged = undistort_points(camera, pixels)
    rays = np.column_stack([xy, np.ones(len(xy))]) @ camera.rotation
    return rays / np.linalg.norm(rays, axis=1)[:, None], converged


def _reprojection_sq(camera: CameraModel, p: np.ndarray,
                     pixel: Sequence[float]) -> float:
    projected, _ = project(camera, p)
    return float(np.sum((projected - np.asarray(pixel, dtype=float))**2))


TRIANGULATION_FAILURES = (NoConvergence, DegenerateRays, BehindCamera)
"""Failure kinds of triangulate_points, indexed by failure code - 1."""


def triangulate_points(rig: StereoRig, pixels_l: np.ndarray,
                       pixels_r: np.ndarray
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Locate world points from their pixels in both views.

    Each point is the midpoint of the shortest segment between its two
    viewing rays.

    Args:
        rig: The calibrated rig.
        pixels_l: (N, 2) finite pixels in the left view.
        pixels_r: (N, 2) finite pixels in the right view.

    Returns:
        (N, 3) points, (N,) RMS reprojection errors over both views in
        pixels, and (N,) failure codes: 0 for success, else one plus
        the index of the failure in TRIANGULATION_FAILURES. Failed
        rows are NaN.
    """
    dir_l, ok_l = _rays(rig.left, pixels_l)
    dir_r, ok_r = _rays(rig.right, pixels_r)
    origin_l, origin_r = rig.left.center, rig.right.center

    w0 = origin_l - origin_r
    b = np.sum(dir_l * dir_r, axis=1)
    d = dir_l @ w0
    e = dir_r @ w0
    denom = 1.0 - b * b

    failure = np.zeros(len(b), dtype=int)
    failure[~(ok_l & ok_r)] = 1
    failure[(failure == 0) & ~(denom >= 1e-12)] = 2
    solvable = failure == 0

    points = np.full((len(b), 3), np.nan)
    s = (b[solvable] * e[solvable] - d[solvable]) / denom[solvable]
    t = (e[solvable] - b[solvable] * d[solvable]) / denom[solvable]
    points[solvable] = 0.5 * ((origin_l + s[:, None] * dir_l[solvable]) +
                              (origin_r + t[:, None] * dir_r[solvable]))

    err_sq = np.zeros(len(b))
    for camera, pixels in ((rig.left, pixels_l), (rig.right, pixels_r)):
        projected, depth = project_points(camera, points)
        failure[solvable & ~(depth > 1e-9)] = 3
        err_sq += np.sum((projected - pixels) ** 2, axis=1)
    points[failure != 0] = np.nan
    errors = np.where(failure == 0, np.sqrt(err_sq / 2.0), np.nan)
    return points, errors, failure


def triangulate_point(rig: StereoRig, pixel_l: Sequence[float],
                      pixel_r: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Locate a world point from its pixels in both views.

    Uses the midpoint of the shortest segment between the two viewing
    rays.

    Returns:
        The world point and the RMS reprojection error over both views
        in pixels.

    Raises:
        NoConvergence: If a pixel cannot be undistorted.
        DegenerateRays: If the rays are parallel.
        BehindCamera: If the solution is not in front of both cameras.
    """
    points, errors, failure = triangulate_points(
        rig, np.asarray(pixel_l, dtype=float).reshape(1, 2),
        np.asarray(pixel_r, dtype=float).reshape(1, 2))
    if failure[0]:
        error = TRIANGULATION_FAILURES[failure[0] - 1]
        raise error('Cannot triangulate pixels {} and {}'.format(
            list(pixel_l), list(pixel_r)))
    return points[0], float(errors[0])


class KeypointFrame2D:
    """One camera's observations of the 32 landmarks at one instant.

    Missing observations are rows of NaN.

    Args:
        t: Timestamp (s).
        cam: Camera index.
        points: Array of shape (32, 3) with rows (u, v, conf).
    """

    def __init__(self, t: float, cam: int, points: np.ndarray) -> None:
        points = np.asarray(points, dtype=float)
        if points.shape != (NUM_JOINTS, 3):
            raise ValueError('Keypoint frame needs {} rows of (u, v, conf),'
                             ' got shape {}'.format(NUM_JOINTS, points.shape))
        conf = points[:, 2]
        present = ~np.isnan(conf)
        if np.any((conf[present] < 0.0) | (conf[present] > 1.0)):
            raise ValueError('Keypoint confidences must be in [0, 1]')
        self.t = float(t)
        self.cam = int(cam)
        self.points = points

    @property
    def present(self) -> np.ndarray:
        """Boolean mask of observed joints."""
        return ~np.any(np.isnan(self.points), axis=1)

    @staticmethod
    def empty(t: float, cam: int) -> 'KeypointFrame2D':
        return KeypointFrame2D(t, cam, np.full((NUM_JOINTS, 3), np.nan))


class RawPose3D:
    """Triangulated joints at one instant, before any constraints.

    Args:
        t: Timestamp (s).
        positions: (32, 3) world positions, NaN rows where missing.
        conf: (32,) confidences, 0 where missing.
        reproj_err: (32,) reprojection errors in pixels, NaN where
            missing.
    """

    def __init__(self, t: float, positions: np.ndarray,
                 conf: Optional[np.ndarray] = None,
                 reproj_err: Optional[np.ndarray] = None) -> None:
        self.t = float(t)
        self.positions = np.asarray(positions, dtype=float).reshape(
            NUM_JOINTS, 3)
        present = ~np.any(np.isnan(self.positions), axis=1)
        if conf is None:
            conf = np.where(present, 1.0, 0.0)
        if reproj_err is None:
            reproj_err = np.where(present, 0.0, np.nan)
        self.conf = np.asarray(conf, dtype=float)
        self.reproj_err = np.asarray(reproj_err, dtype=float)

    @property
    def present(self) -> np.ndarray:
        return ~np.any(np.isnan(self.positions), axis=1)


def triangulate_frame(rig: StereoRig, frame_l: KeypointFrame2D,
                      frame_r: KeypointFrame2D,
                      sync_tolerance: float = DEFAULT_SYNC_TOLERANCE,
                      max_reproj_err: Optional[float] = None) -> RawPose3D:
    """Triangulate every joint seen by both cameras.

    Joints seen in at most one view, joints whose rays are degenerate
    or land behind a camera, and (if max_reproj_err is given) joints
    reprojecting worse than that are missing in the result.

    Args:
        rig: The calibrated rig.
        frame_l: Observations of the left camera.
        frame_r: Observations of the right camera.
        sync_tolerance: Maximum timestamp difference (s).
        max_reproj_err: Optional reprojection quality gate (px).

    Returns:
        The raw pose, stamped with the left frame's time.

    Raises:
        FrameSyncError: If the frames are not simultaneous, or come from
            the same camera.
    """
    if frame_l.cam == frame_r.cam:
        raise FrameSyncError(
            'Both frames come from camera {}'.format(frame_l.cam))
    if abs(frame_l.t - frame_r.t) > sync_tolerance + 1e-12:
        raise FrameSyncError(
            'Frames at t={} and t={} differ by more than {} s'.format(
                frame_l.t, frame_r.t, sync_tolerance))

    positions = np.full((NUM_JOINTS, 3), np.nan)
    conf = np.zeros(NUM_JOINTS)
    errors = np.full(NUM_JOINTS, np.nan)

    both = np.flatnonzero(frame_l.present & frame_r.present)
    points, err, failure = triangulate_points(
        rig, frame_l.points[both, :2], frame_r.points[both, :2])
    keep = failure == 0
    if not np.all(keep):
        _logger.debug('Dropping joints {} at t={}: {}'.format(
            list(both[~keep]), frame_l.t,
            [TRIANGULATION_FAILURES[f - 1].__name__
             for f in failure[~keep]]))
    if max_reproj_err is not None:
        gated = keep & (err > max_reproj_err)
        if np.any(gated):
            _logger.debug('Joints {} at t={} reproject worse than {} px,'
                          ' gated'.format(list(both[gated]), frame_l.t,
                                          max_reproj_err))
        keep &= ~gated
    joints = both[keep]
    positions[joints] = points[keep]
    conf[joints] = np.minimum(frame_l.points[joints, 2],
                              frame_r.points[joints, 2])
    errors[joints] = err[keep]

    return RawPose3D(frame_l.t, positions, conf, errors)


def verify_rig(rig: StereoRig,
               correspondences: Iterable[Tuple[Sequence[float],
                                               Sequence[float],
                                               Sequence[float]]]) -> float:
    """Check a calibration against known world/pixel correspondences.

    Args:
        rig: The rig to check.
        correspondences: (world point, left pixel, right pixel) triples.

    Returns:
        The RMS reprojection error (px) over both views of all points.

    Raises:
        ValueError: If there are no correspondences.
        NonPositiveDepth: If a point is not in front of a camera.
    """
    total = 0.0
    count = 0
    for point, pixel_l, pixel_r in correspondences:
        p = np.asarray(point, dtype=float)
        total += _reprojection_sq(rig.left, p, pixel_l)
        total += _reprojection_sq(rig.right, p, pixel_r)
        count += 2
    if count == 0:
        raise ValueError('verify_rig needs at least one correspondence')
    return math.sqrt(total / count)


class FramePairer:
    """Pairs left and right frames by nearest timestamp as they arrive.

    A left frame is paired, or dropped for want of a partner within the
    tolerance, only once a later right frame shows that no nearer
    partner can follow. Feeding the streams in chunks therefore gives
    the same pairs as feeding them at once. Both streams must be
    time-sorted.

    Args:
        sync_tolerance: Maximum timestamp difference (s).
    """

    def __init__(self, sync_tolerance: float = DEFAULT_SYNC_TOLERANCE
                 ) -> None:
        self._logger = logging.getLogger(__name__)
        self.sync_tolerance = sync_tolerance
        self._left = deque()  # type: Deque[KeypointFrame2D]
        self._right = deque()  # type: Deque[KeypointFrame2D]

    @property
    def pending(self) -> int:
        """Number of frames waiting for a decision."""
        return len(self._left) + len(self._right)

    def push(self, left: Iterable[KeypointFrame2D] = (),
             right: Iterable[KeypointFrame2D] = ()
             ) -> List[Tuple[KeypointFrame2D, KeypointFrame2D]]:
        """Add frames and return the pairs that became certain."""
        self._left.extend(left)
        self._right.extend(right)
        return self._pairs(final=False)

    def flush(self) -> List[Tuple[KeypointFrame2D, KeypointFrame2D]]:
        """Pair what is left at the end of input."""
        pairs = self._pairs(final=True)
        if self._right:
            self._logger.debug('No partner for {} right frames'.format(
                len(self._right)))
        self._right.clear()
        return pairs

    def _pairs(self, final: bool
               ) -> List[Tuple[KeypointFrame2D, KeypointFrame2D]]:
        pairs = []
        while self._left:
            frame_l = self._left[0]
            right = self._right
            while (len(right) > 1 and abs(right[1].t - frame_l.t) <=
                   abs(right[0].t - frame_l.t)):
                right.popleft()
            if not final and (not right or (
                    len(right) == 1 and right[0].t < frame_l.t)):
                break
            self._left.popleft()
            if right and (abs(right[0].t - frame_l.t) <=
                          self.sync_tolerance + 1e-12):
                pairs.append((frame_l, right.popleft()))
            else:
                self._logger.debug('No partner for left frame at t={}'
                                   .format(frame_l.t))
        return pairs


def pair_frames(stream_l: List[KeypointFrame2D],
                stream_r: List[KeypointFrame2D],
                sync_tolerance: float = DEFAULT_SYNC_TOLERANCE
                ) -> List[Tuple[KeypointFrame2D, KeypointFrame2D]]:
    """Pair left and right frames by nearest timestamp.

    Both streams must be time-sorted. Frames with no partner within
    the tolerance are dropped.
    """
    pairer = FramePairer(sync_tolerance)
    return pairer.push(stream_l, stream_r) + pairer.flush()
