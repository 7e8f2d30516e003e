"""Command-line interface: simulate, abinitio, evaluate, and pipeline."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import simulate
from .errors import CnlinesError, ConfigError
from .evaluate import align_and_score
from .io_formats import read_rotations, read_stack, write_rotations, write_stack
from .pipeline import MODE_FAST, MODE_GENERAL, PipelineConfig, run_abinitio_stack

logger = logging.getLogger("cnlines")


def cmd_simulate(args) -> int:
    scene = simulate.random_scene(args.n, args.m, args.blobs, args.seed)
    noise_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.m)]
    images = []
    for i in range(args.m):
        img = simulate.project_image(scene, i, args.size)
        if args.snr is not None:
            img = simulate.add_noise(img, args.snr, noise_seeds[i])
        images.append(img.pixels)
    write_stack(args.out_stack, np.stack(images))
    write_rotations(args.out_rotations, scene.rotations)
    logger.info("wrote %d images of side %d to %s", args.m, args.size, args.out_stack)
    return 0


def cmd_abinitio(args) -> int:
    pixels = read_stack(args.stack)
    config = PipelineConfig(
        n=args.n,
        mode=args.mode,
        L=args.L,
        n_r=args.n_r,
        step_deg=args.step,
        T=args.T,
        K=args.K,
        seed=args.seed,
    )
    result = run_abinitio_stack(pixels, config)
    write_rotations(args.out, result.rotations)
    logger.info("wrote %d estimated rotations to %s", len(result.rotations), args.out)
    return 0


def cmd_evaluate(args) -> int:
    truth = read_rotations(args.truth)
    est = read_rotations(args.est)
    if truth.shape != est.shape:
        raise ConfigError(
            f"image counts differ: {truth.shape[0]} truth vs {est.shape[0]} estimates"
        )
    report = align_and_score(truth, est, args.n, args.L)
    payload = report.to_dict()
    Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
    if args.per_image:
        lines = ["index,mean_error_deg"] + [
            f"{i},{e:.6f}" for i, e in enumerate(report.per_image_mean_deg)
        ]
        Path(args.per_image).write_text("\n".join(lines) + "\n")
    print(json.dumps({"median_error_deg": payload["median_error_deg"],
                      "mean_error_deg": payload["mean_error_deg"]}))
    return 0


def cmd_pipeline(args) -> int:
    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    args.out_stack = workdir / "stack.bin"
    args.out_rotations = workdir / "truth.csv"
    cmd_simulate(args)
    args.stack = args.out_stack
    args.out = workdir / "estimates.csv"
    cmd_abinitio(args)
    args.truth = args.out_rotations
    args.est = args.out
    args.report = workdir / "report.json"
    args.per_image = workdir / "per_image.csv"
    return cmd_evaluate(args)


def _apply_config_file(args, parser, argv):
    """Fill arguments from a JSON config file; explicit flags win.

    A config value is applied only when the matching option string does
    not appear on the command line, so flags given explicitly always
    override the config.
    """
    if not getattr(args, "config", None):
        return args
    if argv is None:
        argv = sys.argv[1:]
    values = json.loads(Path(args.config).read_text())
    for key, value in values.items():
        key = key.replace("-", "_")
        if not hasattr(args, key):
            parser.error(f"unknown config key {key!r}")
        option = "--" + key.replace("_", "-")
        alt = "--" + key
        if any(tok == option or tok == alt or tok.startswith(option + "=")
               or tok.startswith(alt + "=") for tok in argv):
            continue
        setattr(args, key, value)
    return args


def _add_common(p):
    p.add_argument("--config", help="JSON file with default argument values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-n", "--n", type=int, required=True, help="symmetry order")


def _add_simulate_args(p):
    p.add_argument("--m", type=int, default=25, help="number of images")
    p.add_argument("--blobs", type=int, default=4, help="Gaussian blobs per asymmetric unit")
    p.add_argument("--size", type=int, default=65, help="image side length in pixels")
    p.add_argument("--snr", type=float, default=None, help="signal-to-noise ratio (omit for clean)")


def _add_abinitio_args(p):
    p.add_argument("--mode", choices=[MODE_GENERAL, MODE_FAST], default=MODE_GENERAL)
    p.add_argument("--L", type=int, default=360, help="ray count")
    p.add_argument("--n-r", dest="n_r", type=int, default=None, help="radial sample count")
    p.add_argument("--step", type=float, default=4.0, help="rotation grid step in degrees")
    p.add_argument("--T", type=int, default=100, help="candidates kept per image")
    p.add_argument("--K", type=int, default=None, help="in-plane grid size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cnlines")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a synthetic stack and its true rotations")
    _add_common(p_sim)
    _add_simulate_args(p_sim)
    p_sim.add_argument("--out-stack", required=True)
    p_sim.add_argument("--out-rotations", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_ab = sub.add_parser("abinitio", help="estimate rotations from a stack")
    _add_common(p_ab)
    _add_abinitio_args(p_ab)
    p_ab.add_argument("--stack", required=True)
    p_ab.add_argument("--out", required=True)
    p_ab.set_defaults(func=cmd_abinitio)

    p_ev = sub.add_parser("evaluate", help="score estimates against ground truth")
    _add_common(p_ev)
    p_ev.add_argument("--L", type=int, default=360)
    p_ev.add_argument("--truth", required=True)
    p_ev.add_argument("--est", required=True)
    p_ev.add_argument("--report", required=True)
    p_ev.add_argument("--per-image", default=None)
    p_ev.set_defaults(func=cmd_evaluate)

    p_pl = sub.add_parser("pipeline", help="simulate, estimate, and evaluate in one run")
    _add_common(p_pl)
    _add_simulate_args(p_pl)
    _add_abinitio_args(p_pl)
    p_pl.add_argument("--workdir", required=True)
    p_pl.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _apply_config_file(args, parser, argv)
    try:
        return args.func(args)
    except CnlinesError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
