"""Regenerate the golden fixtures under tests/fixtures.

Only run this after an intentional format change; the tests compare against
the committed bytes.
"""

from pathlib import Path

import numpy as np

from mvlandmark.formats import TrajectorySet, dump_calibration, write_trajectory
from mvlandmark.pipeline import tokenize_sequence
from mvlandmark.synthetic import MotionSpec, RigSpec, generate_motion, generate_rig
from mvlandmark.tokens import write_token_file

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    views = generate_rig(RigSpec(camera_count=4))
    (OUT / "calibration_4cam.json").write_text(dump_calibration(views))

    gt = generate_motion(MotionSpec(frame_count=5, seed=3))
    valid = np.ones((5, 25), dtype=bool)
    synth = np.zeros((5, 25), dtype=bool)
    synth[2, 4] = True
    ts = TrajectorySet(gt, valid, synth, 25.0, 100)
    write_trajectory(OUT / "trajectory_golden.traj", ts)
    write_token_file(OUT / "tokens_golden.bin", tokenize_sequence(ts, views))


if __name__ == "__main__":
    main()
