"""Jitter and MPJPE before and after Savitzky-Golay smoothing, per (M, P)."""

import argparse

import numpy as np

from mvlandmark.smoothing import sg_coefficients, smooth_positions
from mvlandmark.synthetic import (
    MotionSpec, ObservationSpec, RigSpec, frame_jitter, generate_motion, generate_rig, mpjpe, observe_arrays,
)
from mvlandmark.triangulate import triangulate_arrays


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--cameras", type=int, default=8)
    p.add_argument("--sigma", type=float, default=2.0, help="pixel noise std")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--filters", nargs="+", default=["2,2", "5,3", "5,2", "8,3", "10,4"],
                   help="half-window,degree pairs")
    a = p.parse_args(argv)

    filters = [tuple(int(x) for x in f.split(",")) for f in a.filters]
    views = generate_rig(RigSpec(camera_count=a.cameras))
    rows = {"raw": ([], [])} | {f: ([], []) for f in filters}
    for seed in range(a.seeds):
        gt = generate_motion(MotionSpec(frame_count=a.frames, seed=seed))
        pixels, conf, _ = observe_arrays(views, gt, ObservationSpec(a.sigma, 0.0, seed=1000 + seed))
        raw, valid = triangulate_arrays(views, pixels, conf)
        if not valid.all():
            continue
        rows["raw"][0].append(frame_jitter(raw))
        rows["raw"][1].append(mpjpe(raw, gt))
        for M, P in filters:
            sm = smooth_positions(raw, sg_coefficients(M, P))
            rows[M, P][0].append(frame_jitter(sm))
            rows[M, P][1].append(mpjpe(sm, gt))
    print(f"cameras={a.cameras} sigma={a.sigma:g}px frames={a.frames} seeds={len(rows['raw'][0])}")
    gt_jitter = np.median([frame_jitter(generate_motion(MotionSpec(frame_count=a.frames, seed=s)))
                           for s in range(a.seeds)])
    print(f"ground-truth jitter {gt_jitter:.3e}")
    print(f"{'filter':>8} {'median jitter':>14} {'median MPJPE':>14}")
    for key, (jit, err) in rows.items():
        name = key if key == "raw" else f"M={key[0]},P={key[1]}"
        print(f"{name:>8} {np.median(jit):14.3e} {np.median(err):14.3e}")


if __name__ == "__main__":
    main()
