"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numerical
failure (training diverged). All noise levels on the command line use the
0-255 scale. Every subcommand that writes a file also writes
``<stem>.manifest.json`` next to it; the manifest records the full argv so a
run can be replayed with ``inr-denoise <manifest argv>``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, _trig, siren
from .denoise import RunConfig, compare_decay, denoise, fit_trajectory
from .errors import (
    FormatError,
    ImageIOError,
    ImageTooSmall,
    NonFiniteOutput,
    ShapeMismatch,
)
from .estimate import estimate_sigma
from .image import Image, load_png, mse, psnr, save_png
from .noise import GAUSSIAN, POISSON_GAUSSIAN, NoiseSpec, contaminate

log = logging.getLogger("inr_denoise")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    pass


def _stem_path(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite_or_str(x: float):
    if math.isinf(x):
        return "inf"
    return x


def _base_manifest(args, argv) -> dict:
    return {
        "tool": "inr-denoise",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "seed": args.seed,
        "threads": args.threads,
        "trig_backend": _trig.BACKEND,
    }


def _width_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("width must be >= 1")
    return value


def _run_config(args, sigma_override=None) -> RunConfig:
    return RunConfig(
        hidden_layers=args.layers,
        width=args.width,
        lr=args.lr,
        weight_decay=args.weight_decay,
        max_iters=args.max_iters,
        check_every=args.check_every,
        seed=args.seed,
        sigma_override=sigma_override,
        omega0=args.omega0,
        omega_hidden=args.omega_hidden,
        batch_size=args.batch_size,
    )


def _add_training_flags(p: argparse.ArgumentParser, max_iters: int = 5000) -> None:
    g = p.add_argument_group("model and training")
    g.add_argument("--layers", type=int, default=6, help="number of hidden sine layers (default 6)")
    g.add_argument("--width", type=_width_arg, default="auto",
                   help="hidden width or 'auto' (256 at 512x512, proportional to pixel count)")
    g.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate (default 1e-4)")
    g.add_argument("--lambda", dest="weight_decay", type=float, default=0.001,
                   help="weight decay on the last two layers (default 0.001)")
    g.add_argument("--max-iters", type=int, default=max_iters)
    g.add_argument("--check-every", type=int, default=10,
                   help="iterations between stopping-criterion checks (default 10)")
    g.add_argument("--omega0", type=float, default=30.0, help="first-layer frequency scale")
    g.add_argument("--omega-hidden", type=float, default=30.0, help="hidden-layer frequency scale")
    g.add_argument("--batch-size", type=int, default=None,
                   help="random pixels per step; default uses every pixel")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for linear algebra; 1 gives bitwise reproducible output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="inr-denoise",
        description="Zero-shot image denoising with an early-stopped SIREN.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("denoise", parents=[common], help="denoise one PNG")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--sigma", type=float, default=None,
                   help="noise std on the 0-255 scale; skips estimation")
    p.add_argument("--clean", type=Path, default=None,
                   help="clean reference; only adds a psnr_clean column to the trajectory")
    p.add_argument("--checkpoint", type=Path, default=None,
                   help="also write the network at the output iterate as JSON")
    _add_training_flags(p)

    p = sub.add_parser("synth", parents=[common], help="add synthetic noise to a clean PNG")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--kind", choices=[GAUSSIAN, POISSON_GAUSSIAN], default=GAUSSIAN)
    s = p.add_mutually_exclusive_group()
    s.add_argument("--sigma", type=float, help="fixed Gaussian std (0-255 scale)")
    s.add_argument("--sigma-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="draw the Gaussian std uniformly (default 0 25)")
    a = p.add_mutually_exclusive_group()
    a.add_argument("--alpha", type=float, help="fixed Poisson scale (0-255 scale)")
    a.add_argument("--alpha-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="draw the Poisson scale uniformly (default 50 100)")

    p = sub.add_parser("estimate", parents=[common], help="estimate the noise level of a PNG")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None, help="also write the JSON to this file")

    p = sub.add_parser("eval", parents=[common], help="PSNR and MSE between two PNGs")
    p.add_argument("test", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("--out", type=Path, default=None, help="also write the JSON to this file")

    p = sub.add_parser("trajectory", parents=[common],
                       help="train without stopping and log MSE and PSNR curves")
    p.add_argument("--in", dest="input", required=True, type=Path, help="training target")
    p.add_argument("--out", required=True, type=Path, help="trajectory CSV")
    p.add_argument("--ref", action="append", default=[], metavar="LABEL=PATH",
                   help="reference image to track PSNR against (repeatable)")
    _add_training_flags(p, max_iters=2000)

    p = sub.add_parser("features", parents=[common],
                       help="contact sheet of hidden-neuron activation maps")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--in", dest="input", type=Path, help="take the map size from this PNG")
    size.add_argument("--size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--neurons", type=int, default=8, help="neurons sampled per layer (default 8)")
    p.add_argument("--pad", type=int, default=2, help="gap between tiles in pixels")

    p = sub.add_parser("compare-decay", parents=[common],
                       help="denoise with and without the selective weight decay")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="JSON report")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--clean", type=Path, default=None)
    _add_training_flags(p)
    return parser


def _cmd_denoise(args, argv):
    noisy = load_png(args.input)
    clean = load_png(args.clean) if args.clean else None
    sigma = None if args.sigma is None else args.sigma / 255.0
    result = denoise(noisy, _run_config(args, sigma), clean=clean)
    save_png(result.denoised, args.out)
    _stem_path(args.out, ".trajectory.csv").write_text(result.trajectory.to_csv())
    manifest = _base_manifest(args, argv)
    manifest.update(result.manifest)
    manifest["outputs"] = {
        "image": args.out.name,
        "trajectory": _stem_path(args.out, ".trajectory.csv").name,
    }
    if args.checkpoint:
        siren.save_checkpoint(result.network, args.checkpoint)
        manifest["outputs"]["checkpoint"] = args.checkpoint.name
    _write_json(_stem_path(args.out, ".manifest.json"), manifest)
    log.info("stopped at iteration %d (%s)", result.stop_iter, result.stop_reason)


def _cmd_synth(args, argv):
    clean = load_png(args.input)
    if args.kind == GAUSSIAN and (args.alpha is not None or args.alpha_range is not None):
        raise UsageError("--alpha/--alpha-range only apply to --kind poisson_gaussian")
    sigma_range = None
    if args.sigma is None:
        sigma_range = tuple(args.sigma_range) if args.sigma_range else (0.0, 25.0)
    alpha_range = None
    if args.kind == POISSON_GAUSSIAN and args.alpha is None:
        alpha_range = tuple(args.alpha_range) if args.alpha_range else (50.0, 100.0)
    try:
        spec = NoiseSpec(
            kind=args.kind,
            sigma255=args.sigma,
            sigma_range=sigma_range,
            alpha=args.alpha if args.kind == POISSON_GAUSSIAN else None,
            alpha_range=alpha_range,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    noisy, params = contaminate(clean, spec)
    save_png(noisy, args.out)
    manifest = _base_manifest(args, argv)
    manifest.update(params)
    manifest["sigma_unit"] = params["sigma255"] / 255.0
    manifest["alpha_unit"] = None if params["alpha"] is None else params["alpha"] / 255.0
    manifest["spec"] = spec.to_dict()
    manifest["outputs"] = {"image": args.out.name}
    _write_json(_stem_path(args.out, ".manifest.json"), manifest)


def _cmd_estimate(args, argv):
    est = estimate_sigma(load_png(args.input))
    doc = {
        "sigma_unit_scale": est.sigma,
        "sigma_255_scale": est.sigma255,
        "patch_size": est.patch_size,
    }
    print(json.dumps(doc))
    if args.out:
        _write_json(args.out, doc)
        manifest = _base_manifest(args, argv)
        manifest.update(doc, iterations_used=est.iterations_used)
        _write_json(_stem_path(args.out, ".manifest.json"), manifest)


def _cmd_eval(args, argv):
    test, ref = load_png(args.test), load_png(args.reference)
    doc = {"psnr_db": _finite_or_str(psnr(test, ref)), "mse": mse(test, ref)}
    print(json.dumps(doc))
    if args.out:
        _write_json(args.out, doc)
        manifest = _base_manifest(args, argv)
        manifest.update(doc)
        _write_json(_stem_path(args.out, ".manifest.json"), manifest)


def _parse_refs(items):
    refs = {}
    for item in items:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"--ref expects LABEL=PATH, got {item!r}")
        refs[label] = load_png(path)
    return refs


def _cmd_trajectory(args, argv):
    target = load_png(args.input)
    refs = _parse_refs(args.ref)
    traj = fit_trajectory(target, _run_config(args), refs)
    args.out.write_text(traj.to_csv(labels=list(refs)))
    manifest = _base_manifest(args, argv)
    cfg = _run_config(args)
    manifest.update(
        config=asdict(cfg),
        network=asdict(cfg.siren_config(target)),
        references=sorted(refs),
        outputs={"trajectory": args.out.name},
    )
    _write_json(_stem_path(args.out, ".manifest.json"), manifest)


def contact_sheet(net: siren.SirenNetwork, height: int, width: int, per_layer: int, seed: int, pad: int = 2):
    """Tile sampled neuron maps: one row per hidden layer, ``per_layer`` columns.

    Returns ``(Image, picks)`` where ``picks[layer]`` lists the neuron indices.
    """
    rng = np.random.default_rng(seed)
    n = min(per_layer, net.config.width)
    layers = net.config.hidden_layers
    sheet = np.ones((layers * (height + pad) - pad, n * (width + pad) - pad))
    picks = []
    for layer in range(layers):
        chosen = sorted(int(k) for k in rng.choice(net.config.width, size=n, replace=False))
        picks.append(chosen)
        for col, neuron in enumerate(chosen):
            fmap = siren.neuron_feature(net, layer, neuron, height, width)
            r0, c0 = layer * (height + pad), col * (width + pad)
            sheet[r0 : r0 + height, c0 : c0 + width] = fmap.values.data[:, :, 0]
    return Image(sheet), picks


def _cmd_features(args, argv):
    net = siren.load_checkpoint(args.checkpoint)
    if args.input:
        ref = load_png(args.input)
        height, width = ref.height, ref.width
    else:
        height, width = args.size
    if args.neurons < 1 or height < 1 or width < 1:
        raise UsageError("--neurons and --size must be positive")
    sheet, picks = contact_sheet(net, height, width, args.neurons, args.seed, args.pad)
    save_png(sheet, args.out)
    manifest = _base_manifest(args, argv)
    manifest.update(
        network=asdict(net.config),
        map_size=[height, width],
        neurons=picks,
        outputs={"image": args.out.name},
    )
    _write_json(_stem_path(args.out, ".manifest.json"), manifest)


def _cmd_compare_decay(args, argv):
    noisy = load_png(args.input)
    clean = load_png(args.clean) if args.clean else None
    sigma = None if args.sigma is None else args.sigma / 255.0
    comparison = compare_decay(noisy, _run_config(args, sigma), clean=clean)
    report = comparison.report()
    _write_json(args.out, report)
    manifest = _base_manifest(args, argv)
    manifest.update(config=asdict(_run_config(args, sigma)), outputs={"report": args.out.name})
    _write_json(_stem_path(args.out, ".manifest.json"), manifest)


COMMANDS = {
    "denoise": _cmd_denoise,
    "synth": _cmd_synth,
    "estimate": _cmd_estimate,
    "eval": _cmd_eval,
    "trajectory": _cmd_trajectory,
    "features": _cmd_features,
    "compare-decay": _cmd_compare_decay,
}


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    _trig.set_threads(args.threads)
    try:
        with threadpool_limits(limits=args.threads):
            COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteOutput as exc:
        print(f"{parser.prog}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ImageIOError, ShapeMismatch, ImageTooSmall) as exc:
        print(f"{parser.prog}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # invalid flag combinations caught by the dataclass validators
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
