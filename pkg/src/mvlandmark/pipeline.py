"""Sequence orchestration: detections -> 3D trajectories -> tokens and maps.

Workers are pure and may run on a thread pool; every output file is written
afterwards by a single serial stage, so output bytes do not depend on the
thread count.  Wall-clock timings go to ``timing.json``; ``report.json`` only
holds deterministic content.
"""

from __future__ import annotations

import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateGeometryError,
    EmptyTrajectoryError,
    InputError,
    ParseError,
    PipelineIOError,
)
from .formats import (
    TrajectorySet,
    parse_calibration,
    parse_openpose_frame,
    read_trajectory,
    write_trajectory,
)
from .geometry import CameraView, Detection2D
from .skeleton import DEFAULT_SIZE, render_skeleton_map, skeleton_map_name
from .smoothing import fill_gaps, sg_coefficients, smooth_trajectory
from .synthetic import mpjpe
from .tokens import (
    FourierConfig,
    RotationEncodingConfig,
    TokenFile,
    assemble_tokens,
    scene_bbox,
    write_token_file,
)
from .triangulate import LMConfig, triangulate_batch

log = logging.getLogger(__name__)

NUM_JOINTS = 25
OUTPUT_ENV = "MVLANDMARK_OUTPUT_DIR"
DEFAULT_DETECTION_PATTERN = "detections/{frame:06d}_{view:03d}_keypoints.json"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "mvlandmark_out"))


@dataclass
class SequenceManifest:
    sequence_id: str
    frame_start: int
    frame_count: int
    view_ids: list[int]
    calibration: Path
    detection_pattern: str = DEFAULT_DETECTION_PATTERN
    root: Path = Path(".")
    frame_rate: float = 25.0
    scene_bbox: list[float] | None = None
    ground_truth: Path | None = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise InputError("manifest frame range is empty")
        if not self.view_ids:
            raise InputError("manifest lists no views")

    @property
    def frames(self) -> range:
        return range(self.frame_start, self.frame_start + self.frame_count)

    def detection_path(self, frame: int, view: int) -> Path:
        return self.root / self.detection_pattern.format(frame=frame, view=view)

    def calibration_path(self) -> Path:
        return self.root / self.calibration

    def ground_truth_path(self) -> Path | None:
        return None if self.ground_truth is None else self.root / self.ground_truth

    def to_json(self) -> str:
        doc = {
            "sequence_id": self.sequence_id,
            "frame_start": self.frame_start,
            "frame_count": self.frame_count,
            "view_ids": list(self.view_ids),
            "calibration": str(self.calibration),
            "detection_pattern": self.detection_pattern,
            "frame_rate": self.frame_rate,
            "scene_bbox": self.scene_bbox,
            "ground_truth": None if self.ground_truth is None else str(self.ground_truth),
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def load(cls, path) -> "SequenceManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise PipelineIOError(path, exc.strerror or str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: malformed manifest: {exc.msg}", offset=exc.pos) from exc
        try:
            return cls(
                sequence_id=str(doc["sequence_id"]),
                frame_start=int(doc["frame_start"]),
                frame_count=int(doc["frame_count"]),
                view_ids=[int(v) for v in doc["view_ids"]],
                calibration=Path(doc["calibration"]),
                detection_pattern=doc.get("detection_pattern", DEFAULT_DETECTION_PATTERN),
                root=path.parent,
                frame_rate=float(doc.get("frame_rate", 25.0)),
                scene_bbox=doc.get("scene_bbox"),
                ground_truth=Path(doc["ground_truth"]) if doc.get("ground_truth") else None,
            )
        except KeyError as exc:
            raise ParseError(f"{path}: missing field {exc.args[0]!r}", field=exc.args[0]) from exc


@dataclass
class PipelineConfig:
    lm: LMConfig = field(default_factory=LMConfig)
    sg_half_window: int = 5
    sg_degree: int = 3
    rotation: RotationEncodingConfig = field(default_factory=RotationEncodingConfig)
    fourier: FourierConfig = field(default_factory=FourierConfig)
    output_dir: Path = field(default_factory=default_output_dir)
    threads: int = 1
    render_maps: bool = True
    map_size: tuple[int, int] = DEFAULT_SIZE
    map_thickness: int = 4


def read_input(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise PipelineIOError(path, exc.strerror or str(exc)) from exc


def load_views(manifest: SequenceManifest) -> list[CameraView]:
    views = parse_calibration(read_input(manifest.calibration_path()))
    by_id = {v.view_id: v for v in views}
    missing = [v for v in manifest.view_ids if v not in by_id]
    if missing:
        raise InputError(f"manifest views {missing} are not in the calibration")
    return [by_id[v] for v in manifest.view_ids]


def _parse_detection_file(path: Path, data: bytes, view: int, frame: int):
    try:
        return parse_openpose_frame(data, view, frame)
    except ParseError as exc:
        return exc


def load_detections(manifest: SequenceManifest, threads: int = 1):
    """Detections grouped per (frame index, joint), plus failed files.

    A malformed file invalidates its whole frame; the failure is returned,
    not raised.  Unreadable files raise :class:`PipelineIOError`.
    """
    jobs = [(fi, frame, view) for fi, frame in enumerate(manifest.frames) for view in manifest.view_ids]
    raw = [(fi, frame, view, manifest.detection_path(frame, view)) for fi, frame, view in jobs]
    blobs = [read_input(path) for *_, path in raw]

    def work(args):
        (fi, frame, view, path), data = args
        return _parse_detection_file(path, data, view, frame)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parsed = list(pool.map(work, zip(raw, blobs)))
    else:
        parsed = [work(a) for a in zip(raw, blobs)]

    F = manifest.frame_count
    groups: list[list[list[Detection2D]]] = [[[] for _ in range(NUM_JOINTS)] for _ in range(F)]
    failed = []
    failed_frames = set()
    for (fi, frame, view, path), result in zip(raw, parsed):
        if isinstance(result, ParseError):
            failed.append({"frame": frame, "view": view, "path": str(path), "error": str(result)})
            failed_frames.add(fi)
            continue
        for det in result:
            groups[fi][det.joint_id].append(det)
    for fi in failed_frames:
        groups[fi] = [[] for _ in range(NUM_JOINTS)]
    return groups, failed


def triangulate_sequence(manifest: SequenceManifest, views: Sequence[CameraView], config: PipelineConfig):
    """Raw (unsmoothed) trajectories and per-entry statistics."""
    groups, failed = load_detections(manifest, config.threads)
    F = manifest.frame_count
    flat = [groups[f][j] for f in range(F) for j in range(NUM_JOINTS)]
    results = triangulate_batch(flat, views, config.lm, config.threads)
    positions = np.full((F, NUM_JOINTS, 3), np.nan)
    valid = np.zeros((F, NUM_JOINTS), dtype=bool)
    stats = {"insufficient_views": 0, "degenerate": 0, "not_converged": 0, "condition_warnings": 0}
    for k, res in enumerate(results):
        f, j = divmod(k, NUM_JOINTS)
        if res is None:
            stats["insufficient_views"] += 1
        elif isinstance(res, DegenerateGeometryError):
            stats["degenerate"] += 1
        else:
            positions[f, j] = res.point
            valid[f, j] = True
            stats["not_converged"] += int(not res.converged)
            stats["condition_warnings"] += int(res.condition_warning)
    raw = TrajectorySet(positions, valid, np.zeros_like(valid), manifest.frame_rate, manifest.frame_start)
    return raw, stats, failed


def smooth_set(raw: TrajectorySet, half_window: int = 5, degree: int = 3) -> tuple[TrajectorySet, list[int]]:
    """Gap-fill and smooth every joint.  Joints with no valid frame at all are
    returned unchanged (still invalid) and listed."""
    spec = sg_coefficients(half_window, degree)
    trajs, empty = [], []
    for j in range(raw.joint_count):
        traj = raw.trajectory(j)
        try:
            trajs.append(smooth_trajectory(fill_gaps(traj), spec))
        except EmptyTrajectoryError:
            empty.append(j)
            trajs.append(traj)
    return TrajectorySet.from_trajectories(trajs, raw.first_frame), empty


def sequence_bbox(ts: TrajectorySet, views: Sequence[CameraView]) -> np.ndarray:
    pts = [ts.positions[ts.valid]] + [v.translation[None] for v in views]
    return scene_bbox(np.concatenate(pts))


def _landmarks_for_tokens(ts: TrajectorySet, frame_index: int, bbox) -> np.ndarray:
    lm = ts.positions[frame_index].copy()
    centre = (np.asarray(bbox[:3]) + np.asarray(bbox[3:])) / 2
    # joints that never triangulated sit at the box centre
    lm[~ts.valid[frame_index]] = centre
    return lm


def tokenize_sequence(
    ts: TrajectorySet,
    views: Sequence[CameraView],
    rot_cfg: RotationEncodingConfig = RotationEncodingConfig(),
    fourier_cfg: FourierConfig = FourierConfig(),
    bbox=None,
) -> TokenFile:
    if bbox is None:
        bbox = sequence_bbox(ts, views)
    bbox = np.asarray(bbox, dtype=float)
    tokens = np.empty((ts.frame_count, len(views), 27, 192), dtype="<f4")
    for f in range(ts.frame_count):
        lm = _landmarks_for_tokens(ts, f, bbox)
        for v, view in enumerate(views):
            tokens[f, v] = assemble_tokens(view, lm, rot_cfg, fourier_cfg, bbox, ts.first_frame + f).tokens
    return TokenFile(tokens, [v.view_id for v in views], bbox, ts.first_frame, rot_cfg, fourier_cfg)


def render_maps(
    ts: TrajectorySet,
    views: Sequence[CameraView],
    size=DEFAULT_SIZE,
    thickness: int = 4,
    threads: int = 1,
) -> list[tuple[str, bytes]]:
    """PNG-encoded skeleton maps as ``(file name, bytes)`` in frame, view order."""
    jobs = [(f, view) for f in range(ts.frame_count) for view in views]

    def work(job):
        f, view = job
        lm = _mask_invalid(ts.positions[f], ts.valid[f], view)
        m = render_skeleton_map(view, lm, size, thickness)
        buf = io.BytesIO()
        m.save(buf)
        return skeleton_map_name(ts.first_frame + f, view.view_id), buf.getvalue()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, jobs))
    return [work(j) for j in jobs]


def _mask_invalid(landmarks, valid, view: CameraView) -> np.ndarray:
    # invalid joints are moved behind the camera so their limbs are skipped
    lm = np.array(landmarks, dtype=float)
    behind = view.rotation.T @ (np.array([0.0, 0.0, -1.0]) - view.translation)
    lm[~valid] = behind
    return lm


def run_pipeline(manifest: SequenceManifest, config: PipelineConfig = PipelineConfig()) -> dict:
    """Triangulate, fill, smooth, tokenize and render one sequence.

    Writes ``raw.traj``, ``smoothed.traj``, ``tokens.bin``, ``maps/*.png``,
    ``report.json`` and ``timing.json`` into ``config.output_dir`` and returns
    the report.  ``report["status"]`` is ``"empty"`` when no landmark could be
    triangulated; only the raw trajectory and the report are written then.
    """
    out = Path(config.output_dir)
    timing = {}
    t0 = time.perf_counter()
    views = load_views(manifest)
    raw, stats, failed = triangulate_sequence(manifest, views, config)
    timing["triangulate_s"] = time.perf_counter() - t0

    F = manifest.frame_count
    report = {
        "sequence_id": manifest.sequence_id,
        "frames": F,
        "views": len(views),
        "joints": NUM_JOINTS,
        "triangulated": int(raw.valid.sum()),
        **stats,
        "invalid_entries": int((~raw.valid).sum()),
        "invalid_frames": int((~raw.valid).any(axis=1).sum()),
        "failed_files": failed,
    }
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"raw_trajectory": "raw.traj"}
    files: list[tuple[str, bytes]] = []

    if not raw.valid.any():
        report["status"] = "empty"
        write_trajectory(out / "raw.traj", raw)
        report["outputs"] = outputs
        _write_report(out, report, timing)
        return report

    t1 = time.perf_counter()
    smoothed, empty_joints = smooth_set(raw, config.sg_half_window, config.sg_degree)
    timing["smooth_s"] = time.perf_counter() - t1
    report["synthesized_entries"] = int(smoothed.synthesized.sum())
    report["empty_joints"] = empty_joints

    bbox = manifest.scene_bbox if manifest.scene_bbox is not None else sequence_bbox(smoothed, views)
    report["scene_bbox"] = [float(b) for b in bbox]
    t2 = time.perf_counter()
    token_file = tokenize_sequence(smoothed, views, config.rotation, config.fourier, bbox)
    buf = io.BytesIO()
    write_token_file(buf, token_file)
    files.append(("tokens.bin", buf.getvalue()))
    outputs.update(smoothed_trajectory="smoothed.traj", tokens="tokens.bin")
    timing["tokenize_s"] = time.perf_counter() - t2

    if config.render_maps:
        t3 = time.perf_counter()
        maps = render_maps(smoothed, views, config.map_size, config.map_thickness, config.threads)
        files.extend((f"maps/{name}", data) for name, data in maps)
        outputs["maps"] = f"maps/ ({len(maps)} files)"
        timing["render_s"] = time.perf_counter() - t3

    gt_path = manifest.ground_truth_path()
    if gt_path is not None:
        gt = read_trajectory(gt_path)
        include = raw.valid & gt.valid
        if include.any():
            report["mpjpe_raw"] = mpjpe(raw.positions[include], gt.positions[include])
        keep = smoothed.valid & ~smoothed.synthesized & gt.valid
        if keep.any():
            report["mpjpe_smoothed"] = mpjpe(smoothed.positions[keep], gt.positions[keep])
    report["status"] = "ok"
    report["outputs"] = outputs

    # single serial write stage
    write_trajectory(out / "raw.traj", raw)
    write_trajectory(out / "smoothed.traj", smoothed)
    if config.render_maps:
        (out / "maps").mkdir(exist_ok=True)
    for name, data in files:
        (out / name).write_bytes(data)
    timing["total_s"] = time.perf_counter() - t0
    _write_report(out, report, timing)
    log.info("sequence %s: %d/%d landmarks triangulated", manifest.sequence_id, report["triangulated"], F * NUM_JOINTS)
    return report


def _write_report(out: Path, report: dict, timing: dict) -> None:
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")


def simulate_sequence(out_dir, rig_spec, motion_spec, obs_spec, frame_rate: float = 25.0) -> SequenceManifest:
    """Write a synthetic sequence in the same formats as real captures:
    ``calibration.json``, per-(frame, view) detector JSON, ``ground_truth.traj``
    and ``manifest.json``."""
    from .formats import dump_calibration, dump_openpose_frame
    from .synthetic import generate_motion, generate_rig, observe_arrays

    out = Path(out_dir)
    views = generate_rig(rig_spec)
    gt = generate_motion(motion_spec)
    pixels, conf, _ = observe_arrays(views, gt, obs_spec)
    manifest = SequenceManifest(
        sequence_id=f"synthetic-seed{motion_spec.seed}",
        frame_start=0,
        frame_count=len(gt),
        view_ids=[v.view_id for v in views],
        calibration=Path("calibration.json"),
        root=out,
        frame_rate=frame_rate,
        ground_truth=Path("ground_truth.traj"),
    )
    (out / "detections").mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(dump_calibration(views))
    for f in range(len(gt)):
        for v, view in enumerate(views):
            manifest.detection_path(f, view.view_id).write_text(dump_openpose_frame(pixels[f, v], conf[f, v]))
    ones = np.ones(gt.shape[:2], dtype=bool)
    write_trajectory(out / "ground_truth.traj", TrajectorySet(gt, ones, ~ones, frame_rate, 0))
    (out / "manifest.json").write_text(manifest.to_json())
    return manifest
