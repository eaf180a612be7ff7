"""Conditioning tokens for camera extrinsics and 3D landmarks.

A frame seen from one view becomes a ``27 x 192`` float block:

* row 0: camera rotation.  The rotation is split into Z-Y-X Euler angles
  ``(yaw, pitch, roll)``; real spherical harmonics ``Y_l^m`` for all
  ``l <= d`` are evaluated at polar angle ``yaw`` and azimuth ``pitch``
  (ordered ``Y_0^0, Y_1^-1, Y_1^0, Y_1^1, ...``), followed by
  ``sin(n*roll), cos(n*roll)`` for ``n = 1..roll_harmonics``;
* row 1: camera translation, Fourier encoded;
* rows 2-26: the 25 BODY-25 joints, Fourier encoded.

Fourier features are ordered component-major, frequency-minor, sine before
cosine: ``sin(pi x), cos(pi x), sin(2 pi x), cos(2 pi x), ..., sin(pi y), ...``.
Unused width is zero padded.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import InputError, InvalidSpecError, ParseError
from .geometry import CameraView, rotation_to_euler

TOKEN_WIDTH = 192
TOKEN_COUNT = 27
NUM_JOINTS = 25


@dataclass(frozen=True)
class RotationEncodingConfig:
    max_degree: int = 12
    roll_harmonics: int = 8

    def __post_init__(self):
        if self.max_degree < 0 or self.roll_harmonics < 0:
            raise InvalidSpecError("degree and roll harmonics must be non-negative")
        if self.width > TOKEN_WIDTH:
            raise InvalidSpecError(
                f"(d+1)^2 + 2*roll_harmonics = {self.width} exceeds token width {TOKEN_WIDTH}"
            )

    @property
    def width(self) -> int:
        return (self.max_degree + 1) ** 2 + 2 * self.roll_harmonics


@dataclass(frozen=True)
class FourierConfig:
    depth: int = 32

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidSpecError("Fourier depth must be at least 1")
        if self.width > TOKEN_WIDTH:
            raise InvalidSpecError(f"6*F = {self.width} exceeds token width {TOKEN_WIDTH}")

    @property
    def width(self) -> int:
        return 6 * self.depth


@dataclass(eq=False)
class ConditioningTokenSet:
    tokens: np.ndarray
    frame_id: int = 0
    view_id: int = 0

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens)
        if self.tokens.shape != (TOKEN_COUNT, TOKEN_WIDTH):
            raise InputError(f"token block must be {TOKEN_COUNT}x{TOKEN_WIDTH}, got {self.tokens.shape}")
        if not np.all(np.isfinite(self.tokens)):
            raise InputError("token block contains non-finite entries")


# -- spherical harmonics -----------------------------------------------------


def sh_index(l: int, m: int) -> int:
    return l * l + l + m


def real_sh_all(max_degree: int, theta, phi) -> np.ndarray:
    """All real spherical harmonics up to ``max_degree``.

    ``theta`` is the polar angle, ``phi`` the azimuth; both broadcast.
    Returns an array of shape ``((max_degree+1)**2, *broadcast_shape)`` in
    ``sh_index`` order.  Orthonormal over the sphere, without the
    Condon-Shortley phase, so ``Y_1^1`` is proportional to ``+x``.

    The associated Legendre factor uses the signed ``sin(theta)``, which is
    the same as evaluating at the direction ``(sin t cos p, sin t sin p, cos t)``;
    polar angles outside ``[0, pi]`` are therefore well defined.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    x = np.cos(theta)
    s = np.sin(theta)
    L = max_degree
    out = np.empty(((L + 1) ** 2,) + x.shape)
    # unnormalised P_l^m without the (-1)^m phase
    P = {}
    pmm = np.ones_like(x)
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * (2 * m - 1) * s
        P[m, m] = pmm
        if m + 1 <= L:
            P[m + 1, m] = x * (2 * m + 1) * pmm
        for l in range(m + 2, L + 1):
            P[l, m] = ((2 * l - 1) * x * P[l - 1, m] - (l + m - 1) * P[l - 2, m]) / (l - m)
    for l in range(L + 1):
        for m in range(l + 1):
            norm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.exp(math.lgamma(l - m + 1) - math.lgamma(l + m + 1)))
            if m == 0:
                out[sh_index(l, 0)] = norm * P[l, 0]
            else:
                base = math.sqrt(2.0) * norm * P[l, m]
                out[sh_index(l, m)] = base * np.cos(m * phi)
                out[sh_index(l, -m)] = base * np.sin(m * phi)
    return out


def real_sh(l: int, m: int, theta, phi):
    """Single real spherical harmonic ``Y_l^m(theta, phi)``."""
    if l < 0 or abs(m) > l:
        raise InvalidSpecError(f"invalid spherical harmonic index l={l}, m={m}")
    val = real_sh_all(l, theta, phi)[sh_index(l, m)]
    return float(val) if val.ndim == 0 else val


def sh_bound(max_degree: int) -> float:
    """Upper bound on ``|Y_l^m|`` for ``l <= max_degree`` (addition theorem)."""
    return math.sqrt((2 * max_degree + 1) / (4 * math.pi))


# -- encoders ----------------------------------------------------------------


def encode_rotation(R, config: RotationEncodingConfig = RotationEncodingConfig()) -> np.ndarray:
    yaw, pitch, roll, _ = rotation_to_euler(R)
    out = np.zeros(TOKEN_WIDTH)
    n_sh = (config.max_degree + 1) ** 2
    out[:n_sh] = real_sh_all(config.max_degree, yaw, pitch)
    k = np.arange(1, config.roll_harmonics + 1)
    roll_block = out[n_sh : n_sh + 2 * config.roll_harmonics].reshape(-1, 2)
    roll_block[:, 0] = np.sin(k * roll)
    roll_block[:, 1] = np.cos(k * roll)
    return out


def encode_fourier(v, config: FourierConfig = FourierConfig()) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise InputError("Fourier input must be finite")
    freqs = np.pi * 2.0 ** np.arange(config.depth)
    angles = v[:, None] * freqs[None, :]
    feats = np.stack([np.sin(angles), np.cos(angles)], axis=-1).reshape(-1)
    out = np.zeros(TOKEN_WIDTH)
    out[: feats.size] = feats
    return out


# -- scene normalisation -----------------------------------------------------


def scene_bbox(points, margin: float = 0.05) -> np.ndarray:
    """Axis-aligned box ``(xmin, ymin, zmin, xmax, ymax, zmax)`` enclosing
    ``points``, grown by ``margin`` of its extent on every side."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if len(pts) == 0:
        raise InputError("cannot compute a bounding box without finite points")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = hi - lo
    pad = np.where(extent > 0, margin * extent, 0.5)
    return np.concatenate([lo - pad, hi + pad])


def normalize_to_bbox(points, bbox) -> np.ndarray:
    """Affine map of the box onto ``[-1, 1]^3``."""
    bbox = np.asarray(bbox, dtype=float).reshape(6)
    lo, hi = bbox[:3], bbox[3:]
    if np.any(hi <= lo):
        raise InputError("bounding box must have positive extent on every axis")
    return 2.0 * (np.asarray(points, dtype=float) - lo) / (hi - lo) - 1.0


def assemble_tokens(
    view: CameraView,
    landmarks,
    rot_cfg: RotationEncodingConfig = RotationEncodingConfig(),
    fourier_cfg: FourierConfig = FourierConfig(),
    bbox=None,
    frame_id: int = 0,
) -> ConditioningTokenSet:
    """Token block for one (frame, view).

    With ``bbox`` given, camera translation and landmarks are normalised by
    it first; otherwise they are assumed to be normalised already.
    """
    lm = np.asarray(landmarks, dtype=float)
    if lm.shape != (NUM_JOINTS, 3):
        raise InputError(f"expected {NUM_JOINTS} landmarks of dimension 3, got shape {lm.shape}")
    t = view.translation
    if bbox is not None:
        t = normalize_to_bbox(t, bbox)
        lm = normalize_to_bbox(lm, bbox)
    tokens = np.empty((TOKEN_COUNT, TOKEN_WIDTH))
    tokens[0] = encode_rotation(view.rotation, rot_cfg)
    tokens[1] = encode_fourier(t, fourier_cfg)
    for i in range(NUM_JOINTS):
        tokens[2 + i] = encode_fourier(lm[i], fourier_cfg)
    return ConditioningTokenSet(tokens, frame_id, view.view_id)


# -- token file --------------------------------------------------------------

TOKEN_MAGIC = b"MVTK"
TOKEN_VERSION = 1
EULER_ZYX_SH_YAW_PITCH = 1
# magic, version, convention, frames, views, token count, token width,
# sh degree, roll harmonics, fourier depth, first frame id, bbox[6]
_HEADER = struct.Struct("<4sHHIIIIIIIi6d")


@dataclass(eq=False)
class TokenFile:
    """In-memory contents of a token file.

    ``tokens`` has shape ``(frames, views, 27, 192)`` and dtype float32.
    """

    tokens: np.ndarray
    view_ids: Sequence[int]
    bbox: np.ndarray
    first_frame: int = 0
    rot_cfg: RotationEncodingConfig = RotationEncodingConfig()
    fourier_cfg: FourierConfig = FourierConfig()
    convention: int = EULER_ZYX_SH_YAW_PITCH

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype="<f4")
        self.bbox = np.asarray(self.bbox, dtype=float).reshape(6)
        self.view_ids = [int(v) for v in self.view_ids]
        if self.tokens.ndim != 4 or self.tokens.shape[2:] != (TOKEN_COUNT, TOKEN_WIDTH):
            raise InputError(f"token array must be (frames, views, 27, 192), got {self.tokens.shape}")
        if self.tokens.shape[1] != len(self.view_ids):
            raise InputError("view id list does not match token array")


def write_token_file(f: BinaryIO | str | Path, tf: TokenFile) -> None:
    """Little-endian header, ``int32`` view ids, then frame-major, view-major
    ``27 x 192`` float32 blocks."""
    if isinstance(f, (str, Path)):
        with open(f, "wb") as fh:
            return write_token_file(fh, tf)
    frames, views = tf.tokens.shape[:2]
    f.write(
        _HEADER.pack(
            TOKEN_MAGIC, TOKEN_VERSION, tf.convention, frames, views, TOKEN_COUNT, TOKEN_WIDTH,
            tf.rot_cfg.max_degree, tf.rot_cfg.roll_harmonics, tf.fourier_cfg.depth,
            tf.first_frame, *tf.bbox,
        )
    )
    f.write(np.asarray(tf.view_ids, dtype="<i4").tobytes())
    f.write(np.ascontiguousarray(tf.tokens, dtype="<f4").tobytes())


def read_token_file(f: BinaryIO | str | Path) -> TokenFile:
    if isinstance(f, (str, Path)):
        with open(f, "rb") as fh:
            return read_token_file(fh)
    data = f.read()
    if len(data) < _HEADER.size:
        raise ParseError("token file shorter than its header", offset=len(data))
    (magic, version, convention, frames, views, count, width,
     degree, roll, depth, first, *bbox) = _HEADER.unpack_from(data)
    if magic != TOKEN_MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != TOKEN_VERSION:
        raise ParseError(f"unsupported token file version {version}", offset=4)
    if (count, width) != (TOKEN_COUNT, TOKEN_WIDTH):
        raise ParseError(f"unexpected token shape {count}x{width}", offset=12)
    pos = _HEADER.size
    expected = pos + 4 * views + 4 * frames * views * count * width
    if len(data) != expected:
        raise ParseError(f"token file is {len(data)} bytes, expected {expected}", offset=min(len(data), expected))
    view_ids = np.frombuffer(data, dtype="<i4", count=views, offset=pos).tolist()
    pos += 4 * views
    tokens = np.frombuffer(data, dtype="<f4", offset=pos).reshape(frames, views, count, width).copy()
    return TokenFile(
        tokens, view_ids, np.array(bbox), first,
        RotationEncodingConfig(degree, roll), FourierConfig(depth), convention,
    )
