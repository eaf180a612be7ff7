"""Pinhole camera model and rotation conversions.

Conventions used throughout the package:

* extrinsics map world to camera, ``x_cam = R @ x_world + t``, so the camera
  centre is ``-R.T @ t``;
* camera axes follow the detector convention: +x right, +y down, +z forward;
* pixels have their origin at the top-left corner of the image;
* Euler angles are Z-Y-X intrinsic, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, CalibrationError, InputError

ORTHO_TOL = 1e-9
GIMBAL_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class CameraView:
    """One calibrated camera.

    ``intrinsics`` is the 3x3 ``K`` matrix in pixels, ``rotation`` and
    ``translation`` the world-to-camera extrinsics and ``image_size`` is
    ``(width, height)``.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    image_size: tuple[int, int]
    view_id: int = 0

    def __post_init__(self):
        K = np.array(self.intrinsics, dtype=float).reshape(3, 3)
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        for arr in (K, R, t):
            arr.setflags(write=False)
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        validate_view(self)

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    def moved(self, rotation=None, translation=None) -> "CameraView":
        """Copy with replaced extrinsics."""
        return CameraView(
            self.intrinsics,
            self.rotation if rotation is None else rotation,
            self.translation if translation is None else translation,
            self.image_size,
            self.view_id,
        )


def validate_view(view: CameraView) -> None:
    K, R, t = view.intrinsics, view.rotation, view.translation
    vid = view.view_id
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
        raise CalibrationError("non-finite camera parameters", vid)
    if np.max(np.abs(R.T @ R - np.eye(3))) >= ORTHO_TOL:
        raise CalibrationError("rotation is not orthonormal", vid)
    if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
        raise CalibrationError(f"rotation determinant {np.linalg.det(R):.6g} != 1", vid)
    if K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0 or K[2, 2] != 1:
        raise CalibrationError("intrinsics must be upper triangular with bottom row (0, 0, 1)", vid)
    if not (K[0, 0] > 0 and K[1, 1] > 0):
        raise CalibrationError("focal lengths must be strictly positive", vid)
    if view.image_size[0] <= 0 or view.image_size[1] <= 0:
        raise CalibrationError(f"invalid image size {view.image_size}", vid)


@dataclass(frozen=True)
class Detection2D:
    """A single 2D keypoint reported by the pose detector."""

    pixel: tuple[float, float]
    confidence: float
    joint_id: int
    view_id: int
    frame_id: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")
        if not 0 <= self.joint_id < 25:
            raise InputError(f"joint id {self.joint_id} outside BODY-25 range")


@dataclass(frozen=True, eq=False)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.array(self.origin, dtype=float).reshape(3)
        d = np.array(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise InputError("ray direction must have unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, lam: float) -> np.ndarray:
        return self.origin + lam * self.direction


def camera_center(view: CameraView) -> np.ndarray:
    return -view.rotation.T @ view.translation


def back_project(view: CameraView, pixel) -> Ray:
    """World-space ray through ``pixel``, starting at the camera centre."""
    pixel = np.asarray(pixel, dtype=float).reshape(2)
    if not np.all(np.isfinite(pixel)):
        raise InputError("pixel must be finite")
    homog = np.array([pixel[0], pixel[1], 1.0])
    try:
        cam_dir = np.linalg.solve(view.intrinsics, homog)
    except np.linalg.LinAlgError as exc:
        raise CalibrationError("singular intrinsics", view.view_id) from exc
    d = view.rotation.T @ cam_dir
    d = d / np.linalg.norm(d)
    return Ray(camera_center(view), d)


def project(view: CameraView, point) -> np.ndarray:
    """Pixel coordinates of a world point; raises if it is not in front."""
    cam = view.rotation @ np.asarray(point, dtype=float).reshape(3) + view.translation
    if not cam[2] > 0:
        raise BehindCameraError(f"depth {cam[2]:.6g} is not positive in view {view.view_id}")
    uvw = view.intrinsics @ cam
    return uvw[:2] / uvw[2]


def project_points(view: CameraView, points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of ``(n, 3)`` points.

    Returns ``(pixels, in_front)``; pixels of points with non-positive depth
    are NaN.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = pts @ view.rotation.T + view.translation
    in_front = cam[:, 2] > 0
    uvw = cam @ view.intrinsics.T
    with np.errstate(divide="ignore", invalid="ignore"):
        px = uvw[:, :2] / uvw[:, 2:3]
    px[~in_front] = np.nan
    return px, in_front


class EulerAngles(NamedTuple):
    yaw: float
    pitch: float
    roll: float
    gimbal_lock: bool = False


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_to_euler(R) -> EulerAngles:
    """Z-Y-X intrinsic decomposition of a rotation matrix.

    At gimbal lock (pitch within ``GIMBAL_TOL`` of +-pi/2) roll is set to
    zero, the remaining rotation is folded into yaw and the result is
    flagged.
    """
    R = np.asarray(R, dtype=float).reshape(3, 3)
    cos_pitch = np.hypot(R[0, 0], R[1, 0])
    pitch = np.arctan2(-R[2, 0], cos_pitch)
    if abs(abs(pitch) - np.pi / 2) < GIMBAL_TOL:
        yaw = np.arctan2(-R[0, 1], R[1, 1])
        return EulerAngles(float(yaw), float(pitch), 0.0, True)
    yaw = np.arctan2(R[1, 0], R[0, 0])
    roll = np.arctan2(R[2, 1], R[2, 2])
    return EulerAngles(float(yaw), float(pitch), float(roll), False)


def look_at_rotation(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera rotation for a camera at ``eye`` facing ``target``.

    The camera's +y (image down) axis is aligned with ``-up`` projected onto
    the image plane.
    """
    eye = np.asarray(eye, dtype=float)
    forward = np.asarray(target, dtype=float) - eye
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise InputError("camera position coincides with its target")
    forward /= norm
    right = np.cross(forward, np.asarray(up, dtype=float))
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-12:
        raise InputError("viewing direction is parallel to the up vector")
    right /= rnorm
    down = np.cross(forward, right)
    return np.stack([right, down, forward])


def intrinsics_matrix(fx: float, fy: float, cx: float, cy: float, skew: float = 0.0) -> np.ndarray:
    return np.array([[fx, skew, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
