"""Command-line entry point: ``dehazegan <subcommand> ...``.

Exit status is 0 on success, 2 for usage errors and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .augment import glda
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, format_config, parse_config_text, parse_overrides
from .haze import apply_haze, sample_haze_params, synthetic_scene
from .imageio import ImageFormatError, gray_to_rgb, load_image, save_image
from .priors import high_freq, low_freq
from .rng import stream
from .tensor import NonFiniteError, ShapeError
from .trainer import dehaze, evaluate_pairs, format_log_line, init_state, resume_config, train_loop

logger = logging.getLogger("dehazegan")

IMAGE_SUFFIX = ".ppm"
RUNTIME_ERRORS = (
    OSError,
    ImageFormatError,
    CheckpointError,
    ShapeError,
    NonFiniteError,
    ValueError,
)


class UsageError(Exception):
    """Bad invocation detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _images_in(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() == IMAGE_SUFFIX}


def load_pair_dir(directory: str | os.PathLike) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Read ``hazy/`` and ``clean/`` subdirectories matched by file stem."""
    root = Path(directory)
    hazy, clean = _images_in(root / "hazy"), _images_in(root / "clean")
    orphans = sorted(set(hazy) ^ set(clean))
    if orphans:
        where = ["hazy" if s in hazy else "clean" for s in orphans]
        listing = ", ".join(f"{w}/{s}" for w, s in zip(where, orphans))
        raise ValueError(f"unmatched pairs in {root}: {listing}")
    if not hazy:
        raise ValueError(f"no image pairs found in {root}")
    return [(s, load_image(hazy[s]), load_image(clean[s])) for s in sorted(hazy)]


def _load_pool(directory: str) -> list:
    root = Path(directory)
    if (root / "hazy").is_dir() and (root / "clean").is_dir():
        return [(h, c) for _, h, c in load_pair_dir(root)]
    images = _images_in(root)
    if not images:
        raise ValueError(f"no images found in {root}")
    return [load_image(p) for p in images.values()]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synthesize(args) -> int:
    rng = stream(args.seed, "synthesize")
    if args.clean is not None:
        sources = [(stem, load_image(p)) for stem, p in _images_in(Path(args.clean)).items()]
        if not sources:
            raise ValueError(f"no images found in {args.clean}")
    else:
        sources = [(f"scene{i:03d}", synthetic_scene(args.size, args.size, rng)) for i in range(args.scenes)]
    out = Path(args.out)
    for sub in ("hazy", "clean", "depth"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for stem, clean in sources:
        h, w = clean.shape[:2]
        params = sample_haze_params(
            h, w, rng, (args.beta_min, args.beta_max), (args.airlight_min, args.airlight_max), args.depth_max
        )
        save_image(apply_haze(clean, params), out / "hazy" / f"{stem}{IMAGE_SUFFIX}")
        save_image(clean, out / "clean" / f"{stem}{IMAGE_SUFFIX}")
        save_image(gray_to_rgb(params.depth / args.depth_max), out / "depth" / f"{stem}{IMAGE_SUFFIX}")
    print(f"synthesized {len(sources)} pairs into {out}")
    return 0


def cmd_augment(args) -> int:
    pairs = load_pair_dir(args.pairs)
    out = Path(args.out)
    (out / "hazy").mkdir(parents=True, exist_ok=True)
    (out / "mask").mkdir(parents=True, exist_ok=True)
    rng = stream(args.seed, "augment")
    for stem, hazy, clean in pairs:
        augmented, mask = glda(clean, hazy, rng, args.max_patch, args.min_patch, args.max_patches)
        save_image(augmented, out / "hazy" / f"{stem}{IMAGE_SUFFIX}")
        save_image(gray_to_rgb(mask.astype(np.float64)), out / "mask" / f"{stem}{IMAGE_SUFFIX}")
    print(f"augmented {len(pairs)} pairs into {out}")
    return 0


def cmd_priors(args) -> int:
    img = load_image(args.image)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    save_image(low_freq(img), out / f"{stem}_lf{IMAGE_SUFFIX}")
    save_image(high_freq(img), out / f"{stem}_hf{IMAGE_SUFFIX}")
    return 0


def _train_config(args, base: RunConfig | None) -> RunConfig:
    values = base.to_dict() if base is not None else {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update(parse_overrides(args.set))
    return RunConfig(**values)


def cmd_train(args) -> int:
    state = load_checkpoint(args.resume) if args.resume else None
    cfg = _train_config(args, state.config if state else None)
    if state is not None:
        resume_config(state, cfg)
    pool = _load_pool(args.data)
    val = [(h, c) for _, h, c in load_pair_dir(args.val)] if args.val else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(cfg), encoding="utf-8")
    log_path = out / "train.log"
    mode = "a" if state is not None and log_path.exists() else "w"
    with open(log_path, mode, encoding="utf-8") as log_fh:

        def on_log(entry):
            log_fh.write(format_log_line(entry) + "\n")
            log_fh.flush()

        def on_checkpoint(st):
            save_checkpoint(st, out / f"step{st.step:06d}.ckpt")

        state, _ = train_loop(
            cfg, pool, state=state or init_state(cfg), val_pairs=val, on_checkpoint=on_checkpoint, on_log=on_log
        )
    save_checkpoint(state, out / "final.ckpt")
    print(f"trained to step {state.step}; checkpoint {out / 'final.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    state = load_checkpoint(args.checkpoint)
    table = evaluate_pairs(state.generator, load_pair_dir(args.pairs))
    text = table.format()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_infer(args) -> int:
    state = load_checkpoint(args.checkpoint)
    inputs = _images_in(Path(args.input))
    if not inputs:
        raise ValueError(f"no images found in {args.input}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for stem, path in inputs.items():
        (restored,) = dehaze(state.generator, [load_image(path)])
        save_image(restored, out / f"{stem}{IMAGE_SUFFIX}")
    print(f"dehazed {len(inputs)} images into {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dehazegan", description="Frequency-prior dehazing GAN toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synthesize", help="make hazy/clean/depth triples with the scattering model")
    p.add_argument("--clean", help="directory of clean .ppm images (default: procedural scenes)")
    p.add_argument("--scenes", type=int, default=8, help="procedural scene count when --clean is absent")
    p.add_argument("--size", type=int, default=64, help="procedural scene side length")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    defaults = RunConfig()
    for name in ("beta_min", "beta_max", "airlight_min", "airlight_max", "depth_max"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, default=getattr(defaults, name))
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("augment", help="apply localized haze pasting to a pair directory")
    p.add_argument("--pairs", required=True, help="directory with hazy/ and clean/ subdirectories")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-patch", type=int, default=defaults.glda_max_patch)
    p.add_argument("--min-patch", type=int, default=defaults.glda_min_patch)
    p.add_argument("--max-patches", type=int, default=defaults.glda_max_patches)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("priors", help="write the low- and high-frequency components of an image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("train", help="train and write checkpoints plus a tab-separated log")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--data", required=True, help="clean images, or hazy/ and clean/ subdirectories")
    p.add_argument("--val", help="held-out pair directory scored every eval_every steps")
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a pair directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="dehaze every image in a directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"dehazegan: error: {err}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as err:  # a bad setting is a usage problem, not a crash
        print(f"dehazegan {args.command}: {err}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as err:
        print(f"dehazegan {args.command}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
