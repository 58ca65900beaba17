"""Command-line entry point.

Subcommands: simulate, filters-bench, pbr-demo, staircase, oracle. Every
command honors --seed, writes only inside its --out directory, and leaves a
manifest sufficient to reproduce the run bit-exactly. Exit codes: 0 success,
1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .boundary import REGION_CAMERA_ONLY
from .buffers import frame_filename, write_pgm, write_ppm
from .config import ConfigError, dump_config, load_config
from .filters import VARIANTS as FILTER_VARIANTS
from .metrics import mask_iou
from .oracles import SUITES, run_suite
from .simulate import run, run_filter_comparison, write_frame_log
from .staircase import ObserverModel, run_session


class _Manifest:
    def __init__(self, out_dir: str, command: str, seed, config_text: str = ""):
        self.out_dir = out_dir
        self.command = command
        self.seed = seed
        self.config_text = config_text
        self.outputs: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    def write(self) -> None:
        with open(os.path.join(self.out_dir, "manifest.txt"), "w") as fh:
            fh.write(f"tool = handproj {__version__}\n")
            fh.write(f"command = {self.command}\n")
            fh.write(f"seed = {self.seed}\n")
            fh.write("outputs =\n")
            for name in self.outputs:
                fh.write(f"  {name}\n")
            if self.config_text:
                fh.write("\n# resolved config snapshot\n")
                fh.write(self.config_text)


def _load(args) -> "SimConfig":
    overrides = list(args.set or [])
    config = load_config(args.config, overrides)
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def cmd_simulate(args) -> int:
    config = _load(args)
    variants = args.filter or [config.filter.variant]
    for v in variants:
        if v not in FILTER_VARIANTS:
            print(f"error: unknown filter {v!r}; valid variants: {', '.join(FILTER_VARIANTS)}",
                  file=sys.stderr)
            return 2
    man = _Manifest(args.out, "simulate", config.seed, dump_config(config))

    if args.bench:
        cfg = replace(config, filter=replace(config.filter, variant=variants[0]))
        # warm the kernels outside the timed run
        warm = replace(cfg, duration_s=min(0.05, cfg.duration_s),
                       scenario=replace(cfg.scenario, duration=cfg.scenario.duration))
        run(warm, eval_metrics=False)
        res = run(cfg, eval_metrics=False, collect_timing=True)
        rep = res.timing
        print(f"throughput report ({cfg.width}x{cfg.height}, "
              f"{'parallel' if cfg.parallel else 'single-thread'}, {rep['frames']} frames)")
        for stage in ("skin", "raster", "mls_solve", "warp", "pbr"):
            if stage in rep:
                print(f"  {stage:10s} {rep[stage]:8.3f} ms/frame")
        print(f"  {'pipeline':10s} {rep['pipeline_ms_per_frame']:8.3f} ms/frame "
              f"({1000.0 / max(rep['pipeline_ms_per_frame'], 1e-9):.1f} fps equivalent)")
        with open(man.path("throughput.txt"), "w") as fh:
            for k, v in sorted(rep.items()):
                fh.write(f"{k} = {v!r}\n")
        man.write()
        return 0

    frames_dir = None
    if args.frames:
        frames_dir = os.path.join(args.out, "frames")
        os.makedirs(frames_dir, exist_ok=True)

    fit, results = run_filter_comparison(config, variants)
    rows = []
    for variant in variants:
        res, rep = results[variant]
        write_frame_log(res.logs, man.path(f"frames_{variant}.csv"))
        rep.to_csv(man.path(f"metrics_{variant}.csv"))
        rep.print_summary(variant)
        rows.append((variant, rep.summary["mean_err_px"]))
    if len(variants) == 1 and frames_dir is not None:
        cfgv = replace(config, filter=replace(config.filter, variant=variants[0]))
        run(cfgv, eval_metrics=False, frames_dir=frames_dir)
        man.outputs.append("frames/")
    if len(rows) > 1:
        print("mean error ordering (low to high):")
        for variant, err in sorted(rows, key=lambda r: r[1]):
            print(f"  {variant:12s} {err:8.4f} px")
    man.write()
    return 0


def cmd_filters_bench(args) -> int:
    config = _load(args)
    man = _Manifest(args.out, "filters-bench", config.seed, dump_config(config))
    variants = list(FILTER_VARIANTS)
    fit, results = run_filter_comparison(config, variants)
    summary_path = man.path("filters_summary.csv")
    with open(summary_path, "w") as fh:
        fh.write("variant,mean_err_px,median_err_px,max_err_px,mean_iou\n")
        for variant in variants:
            res, rep = results[variant]
            write_frame_log(res.logs, man.path(f"frames_{variant}.csv"))
            rep.to_csv(man.path(f"errors_{variant}.csv"))
            s = rep.summary
            fh.write(f"{variant},{s['mean_err_px']:.17g},{s['median_err_px']:.17g},"
                     f"{s['max_err_px']:.17g},{s['mean_iou']:.17g}\n")
    print(f"spline fit: {fit.knot_count} interior knots, "
          f"max residual {fit.residual_px.max():.4f}px")
    for variant in variants:
        results[variant][1].print_summary(variant)
    man.write()
    return 0


def cmd_pbr_demo(args) -> int:
    config = _load(args)
    man = _Manifest(args.out, "pbr-demo", config.seed, dump_config(config))
    stride = max(1, int(round(config.projector_rate_hz / max(args.fps, 1e-9))))
    budget = args.count
    ious = []

    def hook(frame):
        nonlocal budget
        if frame["index"] % stride or budget <= 0:
            return
        budget -= 1
        t = frame["tick_time"]
        cam = frame["camera_mask"]
        for tag, bufs in (("raw", frame["raw"]), ("mls", frame["warped"]), ("pbr", frame["final"])):
            write_ppm(man.path(frame_filename(tag, t, "ppm")), bufs.color)
        write_pgm(man.path(frame_filename("camera", t, "pgm")), cam)
        row = (t,
               mask_iou(frame["raw"].mask, cam),
               mask_iou(frame["warped"].mask, cam),
               mask_iou(frame["final"].mask, cam))
        ious.append(row)
        print(f"t={t:7.4f}s IoU raw={row[1]:.4f} +mls={row[2]:.4f} +mls+pbr={row[3]:.4f}")

    run(config, eval_metrics=False, frame_hook=hook)
    with open(man.path("pbr_iou.csv"), "w") as fh:
        fh.write("tick_time,iou_raw,iou_mls,iou_pbr\n")
        for row in ious:
            fh.write(",".join("%.17g" % x for x in row) + "\n")
    man.write()
    return 0


def cmd_staircase(args) -> int:
    if args.min_step > args.step:
        print("error: --min-step cannot exceed --step", file=sys.stderr)
        return 2
    if args.sessions < 1 or args.slope <= 0 or not (0 <= args.lapse < 0.5):
        print("error: invalid observer/session parameters", file=sys.stderr)
        return 2
    man = _Manifest(args.out, "staircase", args.seed)
    jnds = []
    for i in range(args.sessions):
        observer = ObserverModel(args.theta, args.slope, args.lapse, seed=args.seed + i)
        result = run_session(
            observer,
            start_latency_ms=args.start,
            base_step_ms=args.step,
            min_step_ms=args.min_step,
            max_trials=args.max_trials,
        )
        result.to_csv(man.path(f"session_{i:03d}.csv"))
        jnds.append(result.jnd_ms)
        if args.sessions == 1:
            print(result.summary_text())
    jnds = np.array(jnds)
    print(f"staircase: sessions={len(jnds)} theta={args.theta}ms "
          f"jnd={jnds.mean():.3f} +- {jnds.std(ddof=0):.3f} ms")
    with open(man.path("staircase_summary.txt"), "w") as fh:
        fh.write("{\n")
        fh.write(f'  "theta_ms": {args.theta},\n')
        fh.write(f'  "sessions": {len(jnds)},\n')
        fh.write(f'  "jnd_mean_ms": {jnds.mean():.6g},\n')
        fh.write(f'  "jnd_std_ms": {jnds.std(ddof=0):.6g}\n')
        fh.write("}\n")
    man.write()
    return 0


def cmd_oracle(args) -> int:
    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; available suites:", file=sys.stderr)
        for name in SUITES:
            print(f"  {name}", file=sys.stderr)
        return 2
    ok, lines = run_suite(args.suite)
    for line in lines:
        print(line)
    print(f"oracle suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="handproj", description=__doc__)
    parser.add_argument("--version", action="version", version=f"handproj {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default="translate",
                       help="bundled name (translate/rotate/articulate/combined) or a .cfg path")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="config override, repeatable")

    p = sub.add_parser("simulate", help="run the pipeline and write frame/metrics CSVs")
    add_common(p)
    p.add_argument("--filter", action="append", choices=None, metavar="VARIANT",
                   help="filter variant; repeat for a comparison run")
    p.add_argument("--frames", action="store_true", help="dump final frames as PPM")
    p.add_argument("--bench", action="store_true", help="timing mode: per-stage throughput report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filters-bench", help="compare all filter variants on one scenario")
    add_common(p)
    p.set_defaults(func=cmd_filters_bench)

    p = sub.add_parser("pbr-demo", help="dump raw / +MLS / +MLS+PBR image triplets")
    add_common(p)
    p.add_argument("--count", type=int, default=12, help="number of triplets to dump")
    p.add_argument("--fps", type=float, default=10.0, help="triplet sampling rate")
    p.set_defaults(func=cmd_pbr_demo)

    p = sub.add_parser("staircase", help="run adaptive JND sessions with a synthetic observer")
    p.add_argument("--theta", type=float, default=6.0, help="observer threshold, ms")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--lapse", type=float, default=0.02)
    p.add_argument("--sessions", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=float, default=20.0, help="starting latency, ms")
    p.add_argument("--step", type=float, default=2.0, help="base step, ms")
    p.add_argument("--min-step", type=float, default=0.25)
    p.add_argument("--max-trials", type=int, default=500)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_staircase)

    p = sub.add_parser("oracle", help="run a brute-force oracle suite")
    p.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
