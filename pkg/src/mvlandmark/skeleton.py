"""Rasterised BODY-25 skeleton control maps."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .geometry import CameraView, project_points

BODY25_NAMES = (
    "Nose", "Neck", "RShoulder", "RElbow", "RWrist", "LShoulder", "LElbow",
    "LWrist", "MidHip", "RHip", "RKnee", "RAnkle", "LHip", "LKnee", "LAnkle",
    "REye", "LEye", "REar", "LEar", "LBigToe", "LSmallToe", "LHeel",
    "RBigToe", "RSmallToe", "RHeel",
)

# limb pairs in the detector's render order
BODY25_LIMBS = (
    (1, 8), (1, 2), (1, 5), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9), (9, 10),
    (10, 11), (8, 12), (12, 13), (13, 14), (1, 0), (0, 15), (15, 17), (0, 16),
    (16, 18), (14, 19), (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
)

# per-joint RGB; a limb takes the colour of its second joint
BODY25_COLORS = (
    (255, 0, 85), (255, 0, 0), (255, 85, 0), (255, 170, 0), (255, 255, 0),
    (170, 255, 0), (85, 255, 0), (0, 255, 0), (255, 0, 0), (0, 255, 85),
    (0, 255, 170), (0, 255, 255), (0, 170, 255), (0, 85, 255), (0, 0, 255),
    (255, 0, 170), (170, 0, 255), (255, 0, 255), (85, 0, 255), (0, 0, 255),
    (0, 0, 255), (0, 0, 255), (0, 255, 255), (0, 255, 255), (0, 255, 255),
)

LIMB_COLORS = tuple(BODY25_COLORS[b] for _, b in BODY25_LIMBS)

DEFAULT_SIZE = (384, 512)


@dataclass(eq=False)
class SkeletonMap:
    image: np.ndarray  # (height, width, 3) uint8
    thickness: int = 4
    limb_colors: tuple = LIMB_COLORS

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[1], self.image.shape[0]

    def save(self, fp) -> None:
        """Write a PNG to a path or binary file object."""
        if isinstance(fp, (str, Path)):
            fp = Path(fp)
        Image.fromarray(self.image, "RGB").save(fp, format="PNG")


def _clip_segment(p0, p1, xmin, ymin, xmax, ymax):
    """Liang-Barsky clipping; returns the clipped segment or None."""
    x0, y0 = p0
    dx, dy = p1[0] - x0, p1[1] - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return (x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)


def render_skeleton_map(
    view: CameraView,
    landmarks,
    size: tuple[int, int] = DEFAULT_SIZE,
    thickness: int = 4,
) -> SkeletonMap:
    """Project the landmarks into ``view`` and draw the BODY-25 limbs.

    Limbs with an endpoint behind the camera are skipped; the rest are
    clipped to the image.  Pixel coordinates are scaled from the camera's
    image size to ``size`` when they differ.
    """
    width, height = int(size[0]), int(size[1])
    img = Image.new("RGB", (width, height), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    px, in_front = project_points(view, landmarks)
    px = px * np.array([width / view.width, height / view.height])
    margin = thickness + 2
    for (a, b), color in zip(BODY25_LIMBS, LIMB_COLORS):
        if not (in_front[a] and in_front[b]):
            continue
        seg = _clip_segment(px[a], px[b], -margin, -margin, width - 1 + margin, height - 1 + margin)
        if seg is None:
            continue
        (x0, y0), (x1, y1) = seg
        draw.line([(round(x0), round(y0)), (round(x1), round(y1))], fill=color, width=thickness)
    return SkeletonMap(np.asarray(img, dtype=np.uint8).copy(), thickness)


def skeleton_map_name(frame_id: int, view_id: int) -> str:
    return f"{frame_id:06d}_{view_id:03d}.png"
