"""Median MPJPE of raw triangulation against pixel noise and camera count."""

import argparse

import numpy as np

from mvlandmark.synthetic import MotionSpec, ObservationSpec, RigSpec, generate_motion, generate_rig, mpjpe, observe_arrays
from mvlandmark.triangulate import triangulate_arrays


def sweep(cameras, sigmas, seeds, frames, dropout=0.0):
    """``{(n_cameras, sigma): [mpjpe per seed]}``."""
    out = {}
    for n in cameras:
        views = generate_rig(RigSpec(camera_count=n))
        for sigma in sigmas:
            errs = []
            for seed in range(seeds):
                gt = generate_motion(MotionSpec(frame_count=frames, seed=seed))
                pixels, conf, _ = observe_arrays(views, gt, ObservationSpec(sigma, dropout, seed=1000 + seed))
                pos, valid = triangulate_arrays(views, pixels, conf)
                errs.append(mpjpe(pos, gt, valid))
            out[n, sigma] = errs
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--cameras", type=int, nargs="+", default=[4, 8, 16])
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 1.0, 2.0, 4.0])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--dropout", type=float, default=0.0)
    a = p.parse_args(argv)

    res = sweep(a.cameras, a.sigmas, a.seeds, a.frames, a.dropout)
    print("median MPJPE (world units) over", a.seeds, "seeds")
    print("cameras " + "".join(f"{f'sigma={s:g}px':>14}" for s in a.sigmas))
    for n in a.cameras:
        print(f"{n:7d} " + "".join(f"{np.median(res[n, s]):14.3e}" for s in a.sigmas))


if __name__ == "__main__":
    main()
