"""``vidcolor`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure (NaN loss).
Every command that writes to ``--out`` also writes the resolved settings to
``config.txt`` there, and run timestamps only to ``metadata.json``.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from . import config as cfgmod
from . import io as fio
from . import synth
from .checkpoint import load_checkpoint, load_generator
from .data import VideoData
from .frames import to_grayscale
from .generator import colorize_clip
from .metrics import DEFAULT_MASK_THRESHOLD, evaluate_dirs
from .training import NumericalError, build_models, train_stage1, train_stage2

log = logging.getLogger("vidcolor")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, config=False):
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    if config:
        p.add_argument("--config", type=Path, help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")


def build_parser():
    parser = _Parser(prog="vidcolor", description="Recurrent video colorization toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset with exact flows")
    _common(p)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--length", type=int, default=8)
    p.add_argument("--sprites", type=int, default=1)

    for name, text in (("train-stage1", "image-mode pre-training"),
                       ("train-stage2", "recurrent adversarial video training")):
        p = sub.add_parser(name, help=text)
        _common(p, config=True)
        p.add_argument("--data", type=Path, required=True, help="video directory or directory of videos")
        p.add_argument("--checkpoint", type=Path,
                       help="initial checkpoint (required for stage 2; resumes stage 1)")

    p = sub.add_parser("colorize", help="colorize a frame directory recurrently")
    _common(p)
    p.add_argument("input", type=Path, help="directory of (grayscale) frames")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--flows", type=Path, help="flow directory (default: <input>/flows)")
    p.add_argument("--zero-flow", action="store_true", help="run with zero flow when no flows exist")

    p = sub.add_parser("colorize-image", help="colorize single images independently")
    _common(p)
    p.add_argument("input", type=Path, help="image file or directory of images")
    p.add_argument("--checkpoint", type=Path, required=True)

    p = sub.add_parser("evaluate", help="PSNR, SSIM and warp error of results against ground truth")
    p.add_argument("results", type=Path)
    p.add_argument("ground_truth", type=Path)
    p.add_argument("--flows", type=Path, help="flow directory (default: <ground truth video>/flows)")
    p.add_argument("--threshold", type=float, default=DEFAULT_MASK_THRESHOLD)
    p.add_argument("--out", type=Path, help="write report.csv here")
    return parser


def _write_run_files(out, command, settings):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(f"# vidcolor {command}\n" + settings)
    meta = {"command": command, "version": __version__,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "argv": sys.argv[1:]}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")


def _kv(items):
    return "".join(f"{k} = {cfgmod.format_value(v)}\n" for k, v in items.items())


def cmd_gen_synth(args):
    seed = 0 if args.seed is None else args.seed
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    clips = synth.make_dataset(args.count, seed=seed, height=args.height, width=args.width,
                               length=args.length, n_sprites=args.sprites)
    for i, clip in enumerate(clips):
        synth.export_clip(clip, args.out / f"clip_{i:04d}")
    _write_run_files(args.out, "gen-synth", _kv({"count": args.count, "height": args.height,
                                                 "width": args.width, "length": args.length,
                                                 "sprites": args.sprites, "seed": seed}))
    print(f"wrote {len(clips)} clips to {args.out}")


def _videos(root):
    paths = fio.find_videos(root)
    if not paths:
        raise fio.DataError(f"no videos found under {root}")
    return paths


def cmd_train(args, stage):
    if stage == 2 and args.checkpoint is None:
        raise UsageError("train-stage2 needs --checkpoint pointing at a stage-1 checkpoint")
    config = cfgmod.resolve(stage, args.config, args.set, args.seed)
    init = load_checkpoint(args.checkpoint) if args.checkpoint else None
    gen, disc = build_models(config)
    _write_run_files(args.out, f"train-stage{stage}", cfgmod.dump(config))
    if stage == 1:
        images = np.concatenate([fio.read_video(v)[1] for v in _videos(args.data)])
        if images.shape[1] != 3:
            raise fio.DataError("stage-1 training needs RGB frames")
        if init is not None:
            gen.load_state_dict(init["generator"])
        train_stage1(gen, images, config, out_dir=args.out)
    else:
        videos = [VideoData.from_dir(v) for v in _videos(args.data)]
        train_stage2(gen, disc, videos, config, init, out_dir=args.out)
    print(f"stage-{stage} checkpoint: {args.out / f'stage{stage}_final.pt'}")


def _load_gen(path):
    gen = load_generator(path)
    gen.eval()
    return gen


def cmd_colorize(args):
    gen = _load_gen(args.checkpoint)
    stems, frames = fio.read_video(args.input)
    gray = torch.as_tensor(frames if frames.shape[1] == 1 else to_grayscale(frames), dtype=torch.float32)
    flow_dir = args.flows or fio.default_flow_dir(args.input)
    mode = "flows"
    if len(stems) == 1:
        flows = []
    elif args.flows is None and not flow_dir.is_dir():
        if not args.zero_flow:
            raise UsageError(f"no flow directory ({flow_dir} missing); pass --flows DIR or --zero-flow")
        log.warning("no flows: running the recurrence with zero flow (degraded temporal alignment)")
        flows = [np.zeros((2, *gray.shape[-2:]))] * (len(stems) - 1)
        mode = "zero-flow"
    else:
        flows = fio.read_adjacent_flows(flow_dir, stems)
    flows = [torch.as_tensor(f, dtype=torch.float32) for f in flows]
    with torch.no_grad():
        out = colorize_clip(gen, gray.unsqueeze(1), flows)[:, 0]
    fio.write_video(args.out, out.double().numpy(), stems)
    _write_run_files(args.out, "colorize", _kv({"input": args.input, "checkpoint": args.checkpoint,
                                                "flows": flow_dir if mode == "flows" else "", "mode": mode})
                     + _kv({f"generator.{k}": v for k, v in gen.cfg.to_dict().items()}))
    print(f"colorized {len(stems)} frames into {args.out}")


def cmd_colorize_image(args):
    gen = _load_gen(args.checkpoint)
    paths = [args.input] if args.input.is_file() else fio.list_frames(args.input)
    if not paths:
        raise fio.DataError(f"no images in {args.input}")
    args.out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        frame = fio.read_frame(path)
        gray = frame if frame.shape[0] == 1 else to_grayscale(frame)
        with torch.no_grad():
            out = gen.forward_first(torch.as_tensor(gray, dtype=torch.float32)[None])[0]
        fio.write_frame(args.out / f"{path.stem}.png", out.double().numpy())
    _write_run_files(args.out, "colorize-image", _kv({"input": args.input, "checkpoint": args.checkpoint})
                     + _kv({f"generator.{k}": v for k, v in gen.cfg.to_dict().items()}))
    print(f"colorized {len(paths)} images into {args.out}")


def cmd_evaluate(args):
    report = evaluate_dirs(args.results, args.ground_truth, args.flows, args.threshold)
    print(report.to_table())
    if args.out:
        _write_run_files(args.out, "evaluate", _kv({"results": args.results, "ground_truth": args.ground_truth,
                                                    "flows": args.flows or "", "threshold": args.threshold}))
        (args.out / "report.csv").write_text(report.to_csv())


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"gen-synth": cmd_gen_synth,
                   "train-stage1": lambda a: cmd_train(a, 1),
                   "train-stage2": lambda a: cmd_train(a, 2),
                   "colorize": cmd_colorize,
                   "colorize-image": cmd_colorize_image,
                   "evaluate": cmd_evaluate}[args.command]
        handler(args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"vidcolor: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"vidcolor: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (fio.DataError, OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"vidcolor: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
