import json

import numpy as np
import pytest

from mvlandmark.cli import (
    EXIT_CALIBRATION, EXIT_EMPTY, EXIT_INPUT, EXIT_IO, EXIT_OK, EXIT_PARSE, main,
)
from mvlandmark.formats import dump_openpose_frame, read_trajectory
from mvlandmark.pipeline import OUTPUT_ENV, SequenceManifest
from mvlandmark.tokens import read_token_file


@pytest.fixture
def seq(tmp_path):
    out = tmp_path / "seq"
    assert main(["simulate", "--out", str(out), "--cameras", "4", "--frames", "8",
                 "--sigma", "1", "--dropout", "0.1", "--seed", "5"]) == EXIT_OK
    return out


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--help"])
    assert exc.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    assert "--weight-threshold" in text and "(default: 0.1)" in text
    assert "--sh-degree" in text and "(default: 12)" in text
    assert OUTPUT_ENV in text


def test_stepwise_commands(seq, tmp_path, capsys):
    raw, sm = tmp_path / "raw.traj", tmp_path / "sm.traj"
    assert main(["triangulate", str(seq / "manifest.json"), "--out", str(raw), "--threads", "2"]) == EXIT_OK
    stats = json.loads(capsys.readouterr().out)
    assert stats["failed_files"] == []
    assert main(["smooth", str(raw), "--out", str(sm), "--half-window", "2", "--degree", "2"]) == EXIT_OK
    assert read_trajectory(sm).valid.all()
    tok = tmp_path / "t.bin"
    assert main(["tokenize", str(sm), "--calibration", str(seq / "calibration.json"), "--out", str(tok),
                 "--sh-degree", "10", "--roll-harmonics", "4"]) == EXIT_OK
    tf = read_token_file(tok)
    assert tf.tokens.shape == (8, 4, 27, 192) and tf.rot_cfg.max_degree == 10
    maps = tmp_path / "maps"
    assert main(["render-maps", str(sm), "--calibration", str(seq / "calibration.json"), "--out", str(maps),
                 "--width", "96", "--height", "128"]) == EXIT_OK
    assert len(list(maps.glob("*.png"))) == 32
    capsys.readouterr()
    assert main(["evaluate", str(raw), str(seq / "ground_truth.traj")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["mpjpe"] < 0.05
    svg = tmp_path / "p.svg"
    assert main(["plot", str(raw), "--smoothed", str(sm), "--out", str(svg)]) == EXIT_OK
    assert svg.read_text().startswith("<svg")


def test_run_uses_env_output_dir(seq, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envout"))
    assert main(["run", str(seq / "manifest.json"), "--no-maps"]) == EXIT_OK
    assert (tmp_path / "envout" / "report.json").exists()
    assert not (tmp_path / "envout" / "maps").exists()


def test_run_empty_exit_code(seq, tmp_path):
    m = SequenceManifest.load(seq / "manifest.json")
    for f in m.frames:
        for v in m.view_ids:
            m.detection_path(f, v).write_text(dump_openpose_frame(np.zeros((25, 2)), np.zeros(25)))
    assert main(["run", str(seq / "manifest.json"), "--out", str(tmp_path / "o")]) == EXIT_EMPTY


def test_exit_codes(seq, tmp_path):
    manifest = str(seq / "manifest.json")
    assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == EXIT_IO
    (seq / "calibration.json").write_text('{"views": [')
    assert main(["run", manifest, "--out", str(tmp_path / "o")]) == EXIT_PARSE
    bad = {"views": [{"view_id": 0, "intrinsics": [[600, 0, 1], [0, 600, 1], [0, 0, 1]],
                      "rotation": [[2, 0, 0], [0, 1, 0], [0, 0, 1]], "translation": [0, 0, 0],
                      "width": 10, "height": 10}]}
    (seq / "calibration.json").write_text(json.dumps(bad))
    assert main(["run", manifest, "--out", str(tmp_path / "o")]) == EXIT_CALIBRATION
    est = tmp_path / "e.traj"
    assert main(["smooth", str(tmp_path / "missing.traj"), "--out", str(est)]) == EXIT_INPUT


def test_bad_arguments_exit_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2
