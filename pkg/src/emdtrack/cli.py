"""Command-line front end.

Subcommands::

    build-ref   learn a reference model from an annotated frame
    track       run the tracker over a frame sequence
    synth       render a synthetic test sequence with exact truth masks
    eval        score stored masks against truth masks
    emd         transport distance between two stored signatures

Exit status is 0 on success, 1 on runtime failures (bad files, lost
contours), and 2 for command-line usage errors.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

import numpy as np

from . import netpbm
from .config import ConfigError, TrackerConfig, config_with, load_config
from .emd import SimplexIterationError, emd
from .signature import ground_distance, read_signature_file
from .synth import SynthParams, write_sequence
from .tracker import (build_reference, load_model, overlap_error,
                      run_sequence, save_model)


def _add_config_args(sub) -> None:
    sub.add_argument("--config", help="settings file (key = value lines)")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the RNG seed from the config")


def _load_cfg(args) -> TrackerConfig:
    cfg = load_config(args.config) if args.config else TrackerConfig()
    if args.seed is not None:
        cfg = config_with(cfg, seed=args.seed)
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emdtrack",
        description="Contour tracking by signature transport distance.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("build-ref",
                        help="learn a reference model from one frame")
    p.add_argument("--image", required=True, help="reference frame (P5/P6)")
    p.add_argument("--mask", required=True, help="reference region (P5)")
    p.add_argument("--out", required=True, help="model file to write")
    _add_config_args(p)

    p = subs.add_parser("track", help="track a region through a sequence")
    p.add_argument("--frames", required=True,
                   help="frame filename pattern, e.g. dir/frame_%%04d.pgm")
    p.add_argument("--start", type=int, required=True,
                   help="first frame index (the annotated one)")
    p.add_argument("--end", type=int, required=True, help="last frame index")
    p.add_argument("--mask", required=True,
                   help="region mask for the first frame (P5)")
    p.add_argument("--model",
                   help="reuse a stored model instead of fitting one")
    p.add_argument("--truth",
                   help="optional truth mask pattern for scoring")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--save-traces", action="store_true",
                   help="write per-frame distance traces")
    _add_config_args(p)

    p = subs.add_parser("synth", help="render a synthetic sequence")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--size", type=int, default=30, help="object side length")
    p.add_argument("--start-x", type=int, default=20)
    p.add_argument("--start-y", type=int, default=20)
    p.add_argument("--step-x", type=float, default=2.0)
    p.add_argument("--step-y", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=4.0,
                   help="per-frame noise level")
    p.add_argument("--gain", type=float, default=0.1,
                   help="sinusoidal gain amplitude")
    p.add_argument("--scale-rate", type=float, default=0.0,
                   help="per-frame object scale change")
    p.add_argument("--seed", type=int, default=0)

    p = subs.add_parser("eval", help="score masks against truth masks")
    p.add_argument("--masks", required=True, help="tracked mask pattern")
    p.add_argument("--truth", required=True, help="truth mask pattern")
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--end", type=int, required=True)

    p = subs.add_parser("emd",
                        help="transport distance between two signatures")
    p.add_argument("--ref", required=True, help="reference signature file")
    p.add_argument("--cand", required=True, help="candidate signature file")
    p.add_argument("--beta", type=float, default=None,
                   help="ground-distance saturation rate")

    return parser


def _cmd_build_ref(args) -> int:
    cfg = _load_cfg(args)
    image = netpbm.read_image(args.image)
    mask = netpbm.read_mask(args.mask)
    model = build_reference(image, mask, cfg)
    buf = io.StringIO()
    save_model(model, buf)
    netpbm.write_text(args.out, buf.getvalue())
    print(f"model written to {args.out} "
          f"(rank {cfg.rank}, {model.clusters.n_bins} bins, "
          f"sigma {model.sigma_ref:.2f})")
    return 0


def _frame_indices(args):
    if args.end < args.start:
        raise ValueError("--end must not precede --start")
    return range(args.start, args.end + 1)


def _cmd_track(args) -> int:
    model = None
    if args.model:
        with open(args.model) as fh:
            model = load_model(fh)
        cfg = model.config
        if args.seed is not None:
            cfg = config_with(cfg, seed=args.seed)
            model.config = cfg
    else:
        cfg = _load_cfg(args)
    indices = list(_frame_indices(args))
    frames = [netpbm.read_image(args.frames % i) for i in indices]
    ref_mask = netpbm.read_mask(args.mask)
    truths = None
    if args.truth:
        truths = [netpbm.read_mask(args.truth % i) for i in indices]
    result = run_sequence(frames, ref_mask, cfg=cfg, truths=truths,
                          model=model)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for frame_no, image, res in zip(indices, frames, result.frames):
        netpbm.write_mask(out / f"mask_{frame_no:04d}.pgm", res.mask)
        overlay = netpbm.overlay_contour(image, res.contour)
        netpbm.write_ppm(out / f"overlay_{frame_no:04d}.ppm", overlay)
        if args.save_traces:
            netpbm.write_text(out / f"trace_{frame_no:04d}.txt",
                              "".join(f"{v:.17g}\n" for v in res.emd_trace))
        final_emd = f"{res.emd_trace[-1]:.6g}" if res.emd_trace else ""
        err = "" if res.overlap is None else f"{res.overlap:.6f}"
        rows.append((frame_no, res.stop_reason, res.iterations,
                     int(res.mask.sum()), final_emd, err))
    lines = ["frame\tstop_reason\titerations\tarea\temd\terror"]
    lines += ["\t".join(str(v) for v in row) for row in rows]
    netpbm.write_text(out / "metrics.tsv", "\n".join(lines) + "\n")
    scored = [r.overlap for r in result.frames if r.overlap is not None]
    if scored:
        print(f"tracked {len(frames)} frames; "
              f"mean error {float(np.mean(scored)):.4f}, "
              f"max {float(np.max(scored)):.4f}"
              + ("; FAILED" if result.failed else ""))
    else:
        print(f"tracked {len(frames)} frames")
    return 0


def _cmd_synth(args) -> int:
    params = SynthParams(
        width=args.width, height=args.height, n_frames=args.frames,
        object_size=args.size, start_x=args.start_x, start_y=args.start_y,
        step_x=args.step_x, step_y=args.step_y, noise_sigma=args.noise,
        gain_amplitude=args.gain, scale_rate=args.scale_rate, seed=args.seed)
    frame_pat, truth_pat = write_sequence(args.out, params)
    print(f"frames: {frame_pat}")
    print(f"truth:  {truth_pat}")
    return 0


def _cmd_eval(args) -> int:
    errors = []
    print("frame\terror")
    for i in _frame_indices(args):
        mask = netpbm.read_mask(args.masks % i)
        truth = netpbm.read_mask(args.truth % i)
        err = overlap_error(mask, truth)
        errors.append(err)
        print(f"{i}\t{err:.6f}")
    print(f"mean\t{float(np.mean(errors)):.6f}")
    return 0


def _cmd_emd(args) -> int:
    with open(args.ref) as fh:
        ref = read_signature_file(fh)
    with open(args.cand) as fh:
        cand = read_signature_file(fh)
    beta = args.beta
    if beta is None:
        beta = float(np.linalg.norm(ref.clusters.std))
    ground = ground_distance(ref.clusters, cand.clusters, beta=beta)
    sol = emd(ref.masses, cand.masses, ground)
    print(f"distance {sol.objective:.10g}")
    print("supply_prices " + " ".join(f"{v:.10g}" for v in sol.supply_prices))
    print("demand_prices " + " ".join(f"{v:.10g}" for v in sol.demand_prices))
    return 0


_COMMANDS = {
    "build-ref": _cmd_build_ref,
    "track": _cmd_track,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
    "emd": _cmd_emd,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, ConfigError,
            netpbm.NetpbmError, SimplexIterationError) as exc:
        print(f"emdtrack: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
