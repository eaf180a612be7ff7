"""Readers and writers for calibration, detection and trajectory files.

Calibration (JSON)::

    {"views": [{"view_id": 0,
                "intrinsics": [[fx, s, cx], [0, fy, cy], [0, 0, 1]],
                "rotation": [[...], [...], [...]],      # world -> camera, row-major
                "translation": [tx, ty, tz],            # x_cam = R x_world + t
                "width": 384, "height": 512}, ...]}

Detections use the pose detector's per-image JSON: ``people`` is a list of
objects whose ``pose_keypoints_2d`` holds 25 flat ``x, y, c`` triples.

Trajectory files are little-endian binary: the header ``"MVTJ"``, ``uint16``
version, ``uint16`` reserved, ``uint32`` joint count, ``uint32`` frame count,
``int32`` first frame id, ``float64`` frame rate, followed by joint-major,
frame-major records ``(x, y, z: float64, valid: uint8, synthesized: uint8)``.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CalibrationError, InputError, ParseError
from .geometry import CameraView, Detection2D
from .smoothing import LandmarkTrajectory

NUM_JOINTS = 25


class MultiplePeopleWarning(UserWarning):
    pass


def _load_json(data: bytes | str):
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", offset=exc.start) from exc
    else:
        text = data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset=offset) from exc


# -- calibration -------------------------------------------------------------


def _field(obj, name, where):
    if not isinstance(obj, dict) or name not in obj:
        raise ParseError(f"{where}: missing field {name!r}", field=name)
    return obj[name]


def parse_calibration(data: bytes | str) -> list[CameraView]:
    doc = _load_json(data)
    views_doc = _field(doc, "views", "calibration")
    if not isinstance(views_doc, list):
        raise ParseError("calibration: 'views' must be a list", field="views")
    views = []
    for i, entry in enumerate(views_doc):
        where = f"views[{i}]"
        vid, K, R, t, w, h = (
            _field(entry, name, where)
            for name in ("view_id", "intrinsics", "rotation", "translation", "width", "height")
        )
        try:
            K, R, t = (np.array(a, dtype=float) for a in (K, R, t))
            w, h = int(w), int(h)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from exc
        if K.shape != (3, 3) or R.shape != (3, 3) or t.shape != (3,):
            raise ParseError(f"{where}: intrinsics/rotation must be 3x3 and translation a 3-vector")
        views.append(CameraView(K, R, t, (w, h), vid))
    ids = [v.view_id for v in views]
    if len(set(ids)) != len(ids):
        raise CalibrationError("duplicate view ids in calibration")
    return views


def dump_calibration(views: Sequence[CameraView]) -> str:
    """One JSON object per view and line; floats keep full precision."""

    def mat(a):
        return (np.asarray(a, dtype=float) + 0.0).tolist()  # drops negative zeros

    lines = [
        json.dumps({
            "view_id": v.view_id,
            "intrinsics": mat(v.intrinsics),
            "rotation": mat(v.rotation),
            "translation": mat(v.translation),
            "width": v.width,
            "height": v.height,
        })
        for v in views
    ]
    return '{"views": [\n  ' + ",\n  ".join(lines) + "\n]}\n"


# -- detector output ---------------------------------------------------------


def _keypoints(person, index):
    kp = person.get("pose_keypoints_2d") if isinstance(person, dict) else None
    if kp is None:
        raise ParseError(f"people[{index}]: missing field 'pose_keypoints_2d'", field="pose_keypoints_2d")
    try:
        arr = np.array(kp, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"people[{index}]: non-numeric keypoints") from exc
    if arr.shape != (3 * NUM_JOINTS,):
        raise ParseError(
            f"people[{index}]: expected {3 * NUM_JOINTS} keypoint values, got {arr.size}",
            field="pose_keypoints_2d",
        )
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"people[{index}]: non-finite keypoint values")
    return arr.reshape(NUM_JOINTS, 3)


def parse_openpose_frame(data: bytes | str, view_id: int = 0, frame_id: int = 0) -> list[Detection2D]:
    """Detections of the single subject in one detector output file.

    Joints reported as ``(0, 0, 0)`` are kept with zero confidence.  When
    several people are present, the one with the highest summed confidence is
    used and a :class:`MultiplePeopleWarning` is issued.  Confidences are
    clipped to ``[0, 1]``.
    """
    doc = _load_json(data)
    people = _field(doc, "people", "detector output")
    if not isinstance(people, list):
        raise ParseError("'people' must be a list", field="people")
    if not people:
        return []
    arrays = [_keypoints(p, i) for i, p in enumerate(people)]
    best = 0
    if len(arrays) > 1:
        totals = [a[:, 2].sum() for a in arrays]
        best = int(np.argmax(totals))
        warnings.warn(
            f"frame {frame_id} view {view_id}: {len(arrays)} people detected, using person {best}",
            MultiplePeopleWarning,
            stacklevel=2,
        )
    kp = arrays[best]
    return [
        Detection2D((float(x), float(y)), float(min(max(c, 0.0), 1.0)), j, view_id, frame_id)
        for j, (x, y, c) in enumerate(kp)
    ]


def dump_openpose_frame(pixels, confidence) -> str:
    """Detector-style JSON for one subject; absent joints are ``0, 0, 0``."""
    flat = []
    for (x, y), c in zip(np.asarray(pixels, dtype=float), np.asarray(confidence, dtype=float)):
        flat.extend([float(x), float(y), float(c)] if c > 0 else [0.0, 0.0, 0.0])
    return json.dumps({"version": 1.3, "people": [{"person_id": [-1], "pose_keypoints_2d": flat}]}) + "\n"


# -- trajectories ------------------------------------------------------------

TRAJ_MAGIC = b"MVTJ"
TRAJ_VERSION = 1
_TRAJ_HEADER = struct.Struct("<4sHHIIid")
_TRAJ_RECORD = np.dtype([("xyz", "<f8", (3,)), ("valid", "u1"), ("synthesized", "u1")])


@dataclass(eq=False)
class TrajectorySet:
    """All joints of a sequence, as stored in a trajectory file."""

    positions: np.ndarray  # (frames, joints, 3)
    valid: np.ndarray  # (frames, joints)
    synthesized: np.ndarray  # (frames, joints)
    frame_rate: float = 25.0
    first_frame: int = 0

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float)
        F, J = self.positions.shape[:2]
        self.valid = np.array(self.valid, dtype=bool).reshape(F, J)
        self.synthesized = np.array(self.synthesized, dtype=bool).reshape(F, J)

    @property
    def frame_count(self) -> int:
        return self.positions.shape[0]

    @property
    def joint_count(self) -> int:
        return self.positions.shape[1]

    def trajectory(self, joint: int) -> LandmarkTrajectory:
        return LandmarkTrajectory(
            joint, self.positions[:, joint], self.valid[:, joint], self.frame_rate, self.synthesized[:, joint]
        )

    @classmethod
    def from_trajectories(cls, trajs: Sequence[LandmarkTrajectory], first_frame: int = 0) -> "TrajectorySet":
        if not trajs:
            raise InputError("no trajectories")
        return cls(
            np.stack([t.positions for t in trajs], axis=1),
            np.stack([t.valid for t in trajs], axis=1),
            np.stack([t.synthesized for t in trajs], axis=1),
            trajs[0].frame_rate,
            first_frame,
        )


def trajectory_bytes(ts: TrajectorySet) -> bytes:
    head = _TRAJ_HEADER.pack(TRAJ_MAGIC, TRAJ_VERSION, 0, ts.joint_count, ts.frame_count,
                             ts.first_frame, ts.frame_rate)
    rec = np.zeros((ts.joint_count, ts.frame_count), dtype=_TRAJ_RECORD)
    pos = np.where(ts.valid[..., None], ts.positions, 0.0)
    rec["xyz"] = pos.transpose(1, 0, 2)
    rec["valid"] = ts.valid.T
    rec["synthesized"] = ts.synthesized.T
    return head + rec.tobytes()


def parse_trajectory(data: bytes) -> TrajectorySet:
    if len(data) < _TRAJ_HEADER.size:
        raise ParseError("trajectory file shorter than its header", offset=len(data))
    magic, version, _, joints, frames, first, rate = _TRAJ_HEADER.unpack_from(data)
    if magic != TRAJ_MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != TRAJ_VERSION:
        raise ParseError(f"unsupported trajectory version {version}", offset=4)
    expected = _TRAJ_HEADER.size + joints * frames * _TRAJ_RECORD.itemsize
    if len(data) != expected:
        raise ParseError(f"trajectory file is {len(data)} bytes, expected {expected}", offset=min(len(data), expected))
    rec = np.frombuffer(data, dtype=_TRAJ_RECORD, offset=_TRAJ_HEADER.size).reshape(joints, frames)
    valid = rec["valid"].T.astype(bool)
    pos = rec["xyz"].transpose(1, 0, 2).copy()
    pos[~valid] = np.nan
    return TrajectorySet(pos, valid, rec["synthesized"].T.astype(bool), rate, first)


def write_trajectory(path, ts: TrajectorySet) -> None:
    Path(path).write_bytes(trajectory_bytes(ts))


def read_trajectory(path) -> TrajectorySet:
    return parse_trajectory(Path(path).read_bytes())
