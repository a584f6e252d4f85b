"""Command-line front end: density / invert / denoise / benchmark / dude-check.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .channels import ChannelConfigError, parse_channel_spec
from .denoise import LossFunction, denoise_sliding, denoise_symbolwise
from .density import Kernel, kde, load_density_csv, silverman_bandwidth
from .dude_bridge import equivalence_check
from .harness import ExperimentConfig, run_experiment
from .inversion import SupportGrid, invert_channel
from .seqio import load_pgm, load_sequence, save_pgm, save_sequence


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; we promise 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _threads(args):
    env = os.environ.get("UDENOISE_THREADS")
    if env is not None:
        return max(1, int(env))
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _parse_range(text):
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"range must look like a:b, got {text!r}")
    return float(lo), float(hi)


def build_parser():
    parser = _Parser(prog="udenoise",
                     description="Universal denoising for continuous-valued "
                                 "sequences under a known memoryless channel.")
    parser.add_argument("--seed", type=int, default=0,
                        help="master random seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; "
                             "UDENOISE_THREADS overrides)")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("density", parents=[], help="kernel density estimate "
                       "of a sequence's marginal")
    p.add_argument("--in", dest="infile", required=True,
                   help="input sequence (.csv/.txt or binary f64)")
    p.add_argument("--kernel", default="gaussian",
                   choices=("gaussian", "epanechnikov", "box"),
                   help="kernel shape (default gaussian)")
    p.add_argument("--bandwidth", default="auto",
                   help="'auto' (Silverman) or a positive number (default auto)")
    p.add_argument("--grid-points", type=int, default=512,
                   help="evaluation grid size (default 512)")
    p.add_argument("--out", required=True, help="output density CSV")

    p = sub.add_parser("invert", help="L1 channel inversion of a density "
                       "estimate onto a quantized clean support")
    p.add_argument("--density", required=True, help="density CSV (from "
                   "'density')")
    p.add_argument("--channel", required=True,
                   help="channel spec, e.g. awgn:sigma=0.3")
    p.add_argument("--range", dest="range_", required=True,
                   help="clean input range a:b")
    p.add_argument("--Delta", type=float, required=True,
                   help="support quantization step")
    p.add_argument("--delta", type=float, required=True,
                   help="probability level quantization step")
    p.add_argument("--out", required=True, help="output pmf CSV")

    p = sub.add_parser("denoise", help="two-pass denoising of a sequence or "
                       "PGM image")
    p.add_argument("--in", dest="infile", required=True,
                   help="noisy input (.csv/.txt, binary f64, .npy or .pgm)")
    p.add_argument("--channel", required=True,
                   help="channel spec, e.g. awgn:sigma=20")
    p.add_argument("--loss", default="squared",
                   choices=("squared", "absolute"),
                   help="loss function (default squared)")
    p.add_argument("--k", type=int, default=0,
                   help="context order; 0 = symbol-by-symbol (default 0)")
    p.add_argument("--Delta", type=float, default=None,
                   help="support step (default: range/255 for images, "
                        "range/32 otherwise; range/15 for image k>=1)")
    p.add_argument("--delta", type=float, default=1.0 / 256.0,
                   help="probability level step (default 1/256)")
    p.add_argument("--out", required=True, help="denoised output path")
    p.add_argument("--metrics", default=None,
                   help="optional JSON file for diagnostics")

    p = sub.add_parser("benchmark", help="run a configured experiment sweep")
    p.add_argument("--config", required=True, help="experiment JSON config")

    p = sub.add_parser("dude-check", help="verify the quantized pipeline "
                       "matches the count-based discrete rule")
    p.add_argument("--in", dest="infile", required=True, help="noisy sequence")
    p.add_argument("--M", type=int, required=True, help="quantization levels")
    p.add_argument("--alpha", type=float, required=True,
                   help="output quantization step")
    p.add_argument("--k", type=int, default=0, choices=(0, 1),
                   help="context order (default 0)")
    p.add_argument("--channel", default="awgn:sigma=0.2",
                   help="channel spec (default awgn:sigma=0.2)")
    p.add_argument("--loss", default="squared",
                   choices=("squared", "absolute"),
                   help="loss function (default squared)")
    return parser


def _cmd_density(args):
    samples = load_sequence(args.infile)
    if args.bandwidth == "auto":
        h = silverman_bandwidth(samples)
    else:
        h = float(args.bandwidth)
        if h <= 0:
            raise ValueError("bandwidth must be positive")
    estimate = kde(samples, kernel=Kernel(args.kernel, 1), h=h,
                   num_points=args.grid_points)
    estimate.to_csv(args.out)
    print(f"wrote {args.out}: {args.grid_points} grid points, "
          f"bandwidth {h:.6g}")
    return 0


def _cmd_invert(args):
    f_hat = load_density_csv(args.density)
    a, b = _parse_range(args.range_)
    channel = parse_channel_spec(args.channel, input_range=(a, b))
    grid = SupportGrid(a=a, b=b, Delta=args.Delta)
    solution = invert_channel(f_hat, channel, grid, args.delta)
    solution.pmf.to_csv(args.out)
    solution.write_sidecar(Path(args.out).with_suffix(".meta.json"))
    print(f"wrote {args.out}: {grid.size} symbols, "
          f"LP objective {solution.objective:.6g}")
    return 0


def _cmd_denoise(args, threads):
    suffix = Path(args.infile).suffix.lower()
    is_image = suffix in (".pgm", ".npy")
    if suffix == ".pgm":
        noisy = load_pgm(args.infile).astype(float)
    elif suffix == ".npy":
        noisy = np.load(args.infile).astype(float)
    else:
        noisy = load_sequence(args.infile)
    default_range = (0.0, 255.0) if is_image else (0.0, 1.0)
    if "range=" in args.channel:
        channel = parse_channel_spec(args.channel)
    else:
        channel = parse_channel_spec(args.channel, input_range=default_range)
    a, b = channel.input_range
    loss = LossFunction(args.loss, a, b)
    if args.Delta is not None:
        Delta = args.Delta
    elif is_image and args.k >= 1:
        Delta = (b - a) / 15.0  # coarse 16-symbol support for the tuple LP
    elif is_image:
        Delta = (b - a) / 255.0
    else:
        Delta = (b - a) / 32.0
    candidates = None
    if is_image and args.k >= 1:
        candidates = np.linspace(a, b, 256)
    flat = noisy.reshape(-1)
    if args.k == 0:
        xhat, diag = denoise_symbolwise(flat, channel, loss, Delta, args.delta)
    else:
        xhat, diag = denoise_sliding(flat, channel, loss, args.k, Delta,
                                     args.delta, candidates=candidates,
                                     threads=threads)
    if is_image:
        result = xhat.reshape(noisy.shape)
        if Path(args.out).suffix.lower() == ".npy":
            np.save(args.out, result)
        else:
            save_pgm(args.out, result)
    else:
        save_sequence(args.out, xhat)
    if args.metrics:
        payload = {
            "n": int(flat.size),
            "k": args.k,
            "Delta": Delta,
            "delta": args.delta,
            "bandwidth": diag.bandwidth,
            "lp-objective": diag.lp_objective,
            "degenerate-positions": diag.degenerate_positions,
        }
        with open(args.metrics, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    print(f"wrote {args.out}: {flat.size} values, k={args.k}")
    return 0


def _cmd_benchmark(args, threads):
    config = ExperimentConfig.from_json(args.config)
    rows = run_experiment(config, threads=threads)
    failures = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows -> {config.output_dir} ({failures} failed)")
    return 0 if failures == 0 else 2


def _cmd_dude_check(args):
    y = load_sequence(args.infile)
    channel = parse_channel_spec(args.channel)
    a, b = channel.input_range
    loss = LossFunction(args.loss, a, b)
    report = equivalence_check(y, channel, loss, args.k, args.M, args.alpha)
    print(f"match: {'true' if report.match else 'false'}")
    print(report.to_json())
    return 0 if report.match else 2


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "density":
            return _cmd_density(args)
        if args.command == "invert":
            return _cmd_invert(args)
        if args.command == "denoise":
            return _cmd_denoise(args, _threads(args))
        if args.command == "benchmark":
            return _cmd_benchmark(args, _threads(args))
        if args.command == "dude-check":
            return _cmd_dude_check(args)
        parser.error(f"unknown command {args.command!r}")
    except (ChannelConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1


if __name__ == "__main__":
    sys.exit(main())
