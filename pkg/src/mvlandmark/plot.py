"""Diagnostic SVG plots of landmark trajectories.

The SVG is written by hand so that output is byte-stable and every trace is
a plain ``<polyline>``.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import InputError
from .formats import TrajectorySet, read_trajectory
from .skeleton import BODY25_NAMES

AXIS_COLORS = ("#d62728", "#2ca02c", "#1f77b4")
PANEL_W, PANEL_H, PAD = 220, 120, 24
COLUMNS = 5


def _runs(mask):
    """Maximal runs of consecutive True entries as (start, stop)."""
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int), [0]])))
    return list(zip(idx[::2], idx[1::2]))


def _panel(ts: TrajectorySet, joint: int, x0: float, y0: float, lo: float, hi: float, style: str):
    n = ts.frame_count
    span = hi - lo if hi > lo else 1.0
    xs = x0 + (np.arange(n) / max(n - 1, 1)) * PANEL_W
    parts = []
    for axis, color in enumerate(AXIS_COLORS):
        vals = ts.positions[:, joint, axis]
        ys = y0 + PANEL_H - (vals - lo) / span * PANEL_H
        for a, b in _runs(ts.valid[:, joint]):
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs[a:b], ys[a:b]))
            parts.append(f'<polyline class="{style}" stroke="{color}" points="{pts}"/>')
    return parts


def render_svg(raw: TrajectorySet, smoothed: TrajectorySet | None = None) -> str:
    if raw.frame_count == 0:
        raise InputError("trajectory is empty")
    sets = [("raw", raw)] + ([("smoothed", smoothed)] if smoothed is not None else [])
    rows = -(-raw.joint_count // COLUMNS)
    width = COLUMNS * (PANEL_W + PAD) + PAD
    height = rows * (PANEL_H + 2 * PAD) + PAD
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<style>polyline{fill:none}"
        ".raw{stroke-width:0.8;stroke-dasharray:3,2;opacity:0.6}"
        ".smoothed{stroke-width:1.6}"
        "text{font:10px sans-serif}</style>",
    ]
    for j in range(raw.joint_count):
        r, c = divmod(j, COLUMNS)
        x0 = PAD + c * (PANEL_W + PAD)
        y0 = PAD + r * (PANEL_H + 2 * PAD)
        vals = np.concatenate([ts.positions[ts.valid[:, j], j].ravel() for _, ts in sets])
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        name = BODY25_NAMES[j] if j < len(BODY25_NAMES) else f"joint {j}"
        out.append(f'<text x="{x0}" y="{y0 - 4}">{escape(name)}</text>')
        out.append(f'<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#999"/>')
        for style, ts in sets:
            out.extend(_panel(ts, j, x0, y0, lo, hi, style))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(trajectory_path, output_path, smoothed_path=None) -> Path:
    """Per-joint x/y/z-versus-frame traces; raw dashed, smoothed solid."""
    raw = read_trajectory(trajectory_path)
    smoothed = read_trajectory(smoothed_path) if smoothed_path is not None else None
    output_path = Path(output_path)
    output_path.write_text(render_svg(raw, smoothed))
    return output_path
