"""Synthetic circular camera rig, articulated motion and noisy detections.

All randomness is drawn from ``numpy.random.Philox`` (a counter-based
generator) seeded explicitly, so fixtures are reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InputError
from .geometry import CameraView, Detection2D, intrinsics_matrix, look_at_rotation, project_points

# standing BODY-25 pose in metres, z up, facing +y
REST_POSE = np.array([
    [0.00, 0.08, 1.62],   # Nose
    [0.00, 0.00, 1.45],   # Neck
    [-0.18, 0.00, 1.43],  # RShoulder
    [-0.22, 0.02, 1.16],  # RElbow
    [-0.24, 0.06, 0.92],  # RWrist
    [0.18, 0.00, 1.43],   # LShoulder
    [0.22, 0.02, 1.16],   # LElbow
    [0.24, 0.06, 0.92],   # LWrist
    [0.00, 0.00, 0.95],   # MidHip
    [-0.10, 0.00, 0.94],  # RHip
    [-0.11, 0.02, 0.52],  # RKnee
    [-0.12, 0.00, 0.09],  # RAnkle
    [0.10, 0.00, 0.94],   # LHip
    [0.11, 0.02, 0.52],   # LKnee
    [0.12, 0.00, 0.09],   # LAnkle
    [-0.04, 0.07, 1.67],  # REye
    [0.04, 0.07, 1.67],   # LEye
    [-0.08, 0.00, 1.65],  # REar
    [0.08, 0.00, 1.65],   # LEar
    [0.11, 0.17, 0.02],   # LBigToe
    [0.15, 0.15, 0.02],   # LSmallToe
    [0.12, -0.05, 0.03],  # LHeel
    [-0.11, 0.17, 0.02],  # RBigToe
    [-0.15, 0.15, 0.02],  # RSmallToe
    [-0.12, -0.05, 0.03], # RHeel
])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class RigSpec:
    camera_count: int = 16
    radius: float = 3.0
    heights: tuple[float, ...] = (1.0,)
    look_at: tuple[float, float, float] = (0.0, 0.0, 0.9)
    focal: float = 600.0
    image_size: tuple[int, int] = (384, 512)

    def __post_init__(self):
        if self.camera_count < 2:
            raise InputError("a rig needs at least two cameras")
        if not self.radius > 0:
            raise InputError("rig radius must be positive")
        if len(self.heights) == 0:
            raise InputError("at least one camera height is required")


def generate_rig(spec: RigSpec = RigSpec()) -> list[CameraView]:
    """Cameras evenly spaced on a horizontal circle, each facing ``look_at``.

    Camera ``i`` sits at angle ``2*pi*i/n`` around the z axis at height
    ``heights[i % len(heights)]``.
    """
    w, h = spec.image_size
    K = intrinsics_matrix(spec.focal, spec.focal, w / 2.0, h / 2.0)
    views = []
    for i in range(spec.camera_count):
        angle = 2.0 * np.pi * i / spec.camera_count
        center = np.array([
            spec.radius * np.cos(angle),
            spec.radius * np.sin(angle),
            spec.heights[i % len(spec.heights)],
        ])
        R = look_at_rotation(center, spec.look_at)
        views.append(CameraView(K, R, -R @ center, (w, h), view_id=i))
    return views


@dataclass(frozen=True, eq=False)
class MotionSpec:
    """Per-joint sinusoidal motion around a rest pose.

    Joint ``j`` moves as ``rest[j] + amplitude[j] * sin(2*pi*frequency[j]*t/T + phase[j])``
    with ``T = frame_count``; frequencies are cycles per sequence.  Unset
    amplitudes and frequencies are drawn from ``seed``; phases always are.
    """

    frame_count: int = 100
    seed: int = 0
    template: np.ndarray = field(default_factory=lambda: REST_POSE.copy())
    amplitude: np.ndarray | float | None = None
    frequency: np.ndarray | float | None = None
    amplitude_range: tuple[float, float] = (0.02, 0.10)
    frequency_range: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self):
        if self.frame_count < 1:
            raise InputError("frame_count must be at least 1")
        if np.asarray(self.template).shape != (25, 3):
            raise InputError("template must hold 25 joints")
        if self.amplitude is not None and not np.all(np.isfinite(self.amplitude)):
            raise InputError("amplitudes must be finite")

    def parameters(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(amplitude (25, 3), frequency (25,), phase (25, 3))``."""
        rng = make_rng(self.seed)
        amp = rng.uniform(*self.amplitude_range, size=(25, 3))
        freq = rng.uniform(*self.frequency_range, size=25)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=(25, 3))
        if self.amplitude is not None:
            amp = np.broadcast_to(np.asarray(self.amplitude, dtype=float), (25, 3)).copy()
        if self.frequency is not None:
            freq = np.broadcast_to(np.asarray(self.frequency, dtype=float), (25,)).copy()
        return amp, freq, phase


def generate_motion(spec: MotionSpec = MotionSpec()) -> np.ndarray:
    """Ground-truth landmarks of shape ``(frame_count, 25, 3)``."""
    amp, freq, phase = spec.parameters()
    t = np.arange(spec.frame_count, dtype=float)
    arg = 2.0 * np.pi * freq[None, :, None] * t[:, None, None] / spec.frame_count + phase[None]
    return np.asarray(spec.template, dtype=float)[None] + amp[None] * np.sin(arg)


def default_confidence(pixel_error: np.ndarray, sigma: float, eps: float = 1e-6) -> np.ndarray:
    scale = 3.0 * sigma + eps
    return np.clip(np.exp(-(pixel_error ** 2) / (2.0 * scale ** 2)), 0.0, 1.0)


@dataclass(frozen=True)
class ObservationSpec:
    pixel_noise_sigma: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0
    confidence_model: Callable[[np.ndarray, float], np.ndarray] = default_confidence

    def __post_init__(self):
        if self.pixel_noise_sigma < 0:
            raise InputError("noise sigma must be non-negative")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise InputError("dropout probability must lie in [0, 1]")


def observe_arrays(views: Sequence[CameraView], gt_landmarks, spec: ObservationSpec):
    """Array form of :func:`observe`.

    Returns ``(pixels, confidence, present)`` of shapes ``(F, V, J, 2)``,
    ``(F, V, J)`` and ``(F, V, J)``.  Random draws have a fixed shape, so
    dropout does not shift the noise sequence.
    """
    gt = np.asarray(gt_landmarks, dtype=float)
    if gt.ndim == 2:
        gt = gt[None]
    F, J = gt.shape[:2]
    V = len(views)
    rng = make_rng(spec.seed)
    noise = rng.standard_normal((F, V, J, 2)) * spec.pixel_noise_sigma
    keep = rng.random((F, V, J)) >= spec.dropout_prob
    pixels = np.empty((F, V, J, 2))
    in_front = np.empty((F, V, J), dtype=bool)
    for v, view in enumerate(views):
        px, front = project_points(view, gt.reshape(-1, 3))
        pixels[:, v] = px.reshape(F, J, 2)
        in_front[:, v] = front.reshape(F, J)
    pixels = pixels + noise
    conf = spec.confidence_model(np.linalg.norm(noise, axis=-1), spec.pixel_noise_sigma)
    present = keep & in_front
    return pixels, np.where(present, conf, 0.0), present


def observe(views: Sequence[CameraView], gt_landmarks, spec: ObservationSpec = ObservationSpec()) -> list[Detection2D]:
    """Noisy detections of every visible landmark in every view.

    Frame ids are positions along the first axis of ``gt_landmarks``.
    """
    pixels, conf, present = observe_arrays(views, gt_landmarks, spec)
    out = []
    for f, v, j in zip(*np.nonzero(present)):
        out.append(Detection2D(
            (float(pixels[f, v, j, 0]), float(pixels[f, v, j, 1])),
            float(conf[f, v, j]), int(j), views[v].view_id, int(f),
        ))
    return out


def mpjpe(estimated, ground_truth, include=None) -> float:
    """Mean Euclidean distance over included (frame, joint) entries.

    ``include`` is an optional boolean mask with the leading shape of the
    inputs; excluded entries are typically invalid or synthesized frames.
    """
    est = np.asarray(estimated, dtype=float)
    gt = np.asarray(ground_truth, dtype=float)
    if est.shape != gt.shape or est.shape[-1] != 3:
        raise InputError(f"shape mismatch: {est.shape} vs {gt.shape}")
    err = np.linalg.norm(est - gt, axis=-1)
    if include is not None:
        include = np.asarray(include, dtype=bool)
        if include.shape != err.shape:
            raise InputError("include mask does not match the landmark array")
        err = err[include]
    if err.size == 0:
        raise InputError("no entries to score")
    return float(err.mean())


def frame_jitter(positions) -> float:
    """Mean frame-to-frame displacement of ``(F, ..., 3)`` landmarks."""
    p = np.asarray(positions, dtype=float)
    return float(np.linalg.norm(np.diff(p, axis=0), axis=-1).mean())
