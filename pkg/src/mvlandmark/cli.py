"""Command line interface: ``mvlandmark <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path


from .errors import CalibrationError, EmptyResultError, InputError, ParseError, PipelineIOError
from .formats import parse_calibration, read_trajectory, write_trajectory
from .pipeline import (
    OUTPUT_ENV,
    PipelineConfig,
    SequenceManifest,
    read_input,
    default_output_dir,
    load_views,
    render_maps,
    run_pipeline,
    simulate_sequence,
    smooth_set,
    tokenize_sequence,
    triangulate_sequence,
)
from .plot import emit_plot
from .synthetic import MotionSpec, ObservationSpec, RigSpec, mpjpe
from .tokens import FourierConfig, RotationEncodingConfig, write_token_file
from .triangulate import LMConfig

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PARSE = 3
EXIT_CALIBRATION = 4
EXIT_EMPTY = 5
EXIT_IO = 6

D = argparse.ArgumentDefaultsHelpFormatter


def _add_lm(p):
    g = p.add_argument_group("triangulation")
    g.add_argument("--weight-threshold", type=float, default=LMConfig.weight_threshold,
                   help="detections below this confidence are ignored")
    g.add_argument("--lm-damping", type=float, default=LMConfig.initial_damping, help="initial LM damping")
    g.add_argument("--lm-up", type=float, default=LMConfig.damping_up, help="damping factor on rejected steps")
    g.add_argument("--lm-down", type=float, default=LMConfig.damping_down, help="damping factor on accepted steps")
    g.add_argument("--lm-max-iter", type=int, default=LMConfig.max_iterations, help="LM iteration cap")
    g.add_argument("--lm-tol", type=float, default=LMConfig.step_tolerance, help="LM step-norm tolerance")
    g.add_argument("--threads", type=int, default=1, help="worker threads")


def _add_sg(p):
    g = p.add_argument_group("smoothing")
    g.add_argument("--half-window", type=int, default=5, help="Savitzky-Golay half window M")
    g.add_argument("--degree", type=int, default=3, help="Savitzky-Golay polynomial degree P")


def _add_tokens(p):
    g = p.add_argument_group("tokens")
    g.add_argument("--sh-degree", type=int, default=12, help="max spherical harmonic degree for rotation")
    g.add_argument("--roll-harmonics", type=int, default=8, help="sin/cos pairs encoding roll")
    g.add_argument("--fourier-depth", type=int, default=32, help="Fourier frequencies per coordinate")
    g.add_argument("--bbox", type=float, nargs=6, default=None,
                   metavar=("XMIN", "YMIN", "ZMIN", "XMAX", "YMAX", "ZMAX"),
                   help="scene box for normalisation (default: computed from data)")


def _add_maps(p):
    g = p.add_argument_group("skeleton maps")
    g.add_argument("--width", type=int, default=384, help="map width in px")
    g.add_argument("--height", type=int, default=512, help="map height in px")
    g.add_argument("--thickness", type=int, default=4, help="limb thickness in px")


def _lm_config(a) -> LMConfig:
    return LMConfig(a.lm_damping, a.lm_up, a.lm_down, a.lm_max_iter, a.lm_tol, a.weight_threshold)


def _pipeline_config(a) -> PipelineConfig:
    return PipelineConfig(
        lm=_lm_config(a),
        sg_half_window=a.half_window,
        sg_degree=a.degree,
        rotation=RotationEncodingConfig(a.sh_degree, a.roll_harmonics),
        fourier=FourierConfig(a.fourier_depth),
        output_dir=Path(a.out) if a.out else default_output_dir(),
        threads=a.threads,
        render_maps=not a.no_maps,
        map_size=(a.width, a.height),
        map_thickness=a.thickness,
    )


def cmd_simulate(a) -> int:
    rig = RigSpec(a.cameras, a.radius, tuple(a.heights), tuple(a.look_at), a.focal, (a.width, a.height))
    motion = MotionSpec(frame_count=a.frames, seed=a.seed)
    obs = ObservationSpec(a.sigma, a.dropout, seed=a.seed + 1)
    simulate_sequence(a.out, rig, motion, obs, a.frame_rate)
    print(Path(a.out) / "manifest.json")
    return EXIT_OK


def cmd_triangulate(a) -> int:
    manifest = SequenceManifest.load(a.manifest)
    views = load_views(manifest)
    cfg = PipelineConfig(lm=_lm_config(a), threads=a.threads)
    raw, stats, failed = triangulate_sequence(manifest, views, cfg)
    write_trajectory(a.out, raw)
    print(json.dumps({**stats, "failed_files": failed}, indent=1, sort_keys=True))
    return EXIT_OK if raw.valid.any() else EXIT_EMPTY


def cmd_smooth(a) -> int:
    smoothed, empty = smooth_set(read_trajectory(a.trajectory), a.half_window, a.degree)
    write_trajectory(a.out, smoothed)
    if empty:
        print(f"joints without any valid frame: {empty}", file=sys.stderr)
    return EXIT_OK


def _views(path):
    return parse_calibration(read_input(Path(path)))


def cmd_tokenize(a) -> int:
    tf = tokenize_sequence(
        read_trajectory(a.trajectory), _views(a.calibration),
        RotationEncodingConfig(a.sh_degree, a.roll_harmonics), FourierConfig(a.fourier_depth), a.bbox,
    )
    write_token_file(a.out, tf)
    return EXIT_OK


def cmd_render_maps(a) -> int:
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    maps = render_maps(read_trajectory(a.trajectory), _views(a.calibration), (a.width, a.height), a.thickness, a.threads)
    for name, data in maps:
        (out / name).write_bytes(data)
    return EXIT_OK


def cmd_run(a) -> int:
    report = run_pipeline(SequenceManifest.load(a.manifest), _pipeline_config(a))
    print(json.dumps(report, indent=1, sort_keys=True))
    return EXIT_EMPTY if report["status"] == "empty" else EXIT_OK


def cmd_evaluate(a) -> int:
    est, gt = read_trajectory(a.estimate), read_trajectory(a.ground_truth)
    include = est.valid & gt.valid
    if not a.include_synthesized:
        include &= ~est.synthesized
    if not include.any():
        raise EmptyResultError("no frames to evaluate")
    result = {"mpjpe": mpjpe(est.positions[include], gt.positions[include]), "entries": int(include.sum())}
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_plot(a) -> int:
    emit_plot(a.trajectory, a.out, a.smoothed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvlandmark",
        description="Multi-view landmark triangulation, smoothing and conditioning tokens.",
        epilog=f"Default output directory comes from ${OUTPUT_ENV} when set.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic sequence", formatter_class=D)
    p.add_argument("--out", required=True)
    p.add_argument("--cameras", type=int, default=16)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--heights", type=float, nargs="+", default=[1.0])
    p.add_argument("--look-at", type=float, nargs=3, default=[0.0, 0.0, 0.9])
    p.add_argument("--focal", type=float, default=600.0)
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--sigma", type=float, default=0.0, help="pixel noise std")
    p.add_argument("--dropout", type=float, default=0.0, help="detection dropout probability")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("triangulate", help="detections -> raw trajectory file", formatter_class=D)
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    _add_lm(p)
    p.set_defaults(func=cmd_triangulate)

    p = sub.add_parser("smooth", help="gap-fill and smooth a trajectory file", formatter_class=D)
    p.add_argument("trajectory")
    p.add_argument("--out", required=True)
    _add_sg(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("tokenize", help="trajectory + calibration -> token file", formatter_class=D)
    p.add_argument("trajectory")
    p.add_argument("--calibration", required=True)
    p.add_argument("--out", required=True)
    _add_tokens(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("render-maps", help="trajectory + calibration -> skeleton PNGs", formatter_class=D)
    p.add_argument("trajectory")
    p.add_argument("--calibration", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_maps(p)
    p.set_defaults(func=cmd_render_maps)

    p = sub.add_parser("run", help="full pipeline on a manifest", formatter_class=D)
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./mvlandmark_out)")
    p.add_argument("--no-maps", action="store_true", help="skip skeleton map rendering")
    _add_lm(p)
    _add_sg(p)
    _add_tokens(p)
    _add_maps(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="MPJPE of a trajectory against ground truth", formatter_class=D)
    p.add_argument("estimate")
    p.add_argument("ground_truth")
    p.add_argument("--include-synthesized", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="SVG of per-joint coordinate traces", formatter_class=D)
    p.add_argument("trajectory")
    p.add_argument("--smoothed", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except PipelineIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except EmptyResultError as exc:
        print(f"empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
