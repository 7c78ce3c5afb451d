"""Command-line surface: train, eval, sample, washaway, ablate.

Exit codes: 0 success, 1 usage problems (bad flags, unreadable config),
2 runtime failures (diverged training, corrupt data or checkpoints).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import pnm, scenes, trainer
from .config import load_config
from .errors import ConfigError, SpadeError, UsageError
from .masks import SegMask
from .metrics import save_report
from .rng import SplitMix64


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting itself."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="spadesynth", description=__doc__)
    sub = p.add_subparsers(dest="command", metavar="command")

    t = sub.add_parser("train", help="train from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--ckpt", help="checkpoint path to write (default out_dir/ckpt.spde)")

    e = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True, help="split directory with index.txt")
    e.add_argument("--out", required=True, help="report file to write")

    s = sub.add_parser("sample", help="synthesize images for one mask")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--mask", required=True, help="label map as PGM")
    s.add_argument("--num", type=int, default=1)
    s.add_argument("--style", help="image whose encoding provides z")
    s.add_argument("--out", default="sample", help="output prefix")
    s.add_argument("--seed", type=int, default=0)

    w = sub.add_parser("washaway", help="uniform-mask normalization demo")
    w.add_argument("--out", required=True)
    w.add_argument("--mask", help="optional PGM control mask")
    w.add_argument("--labels", type=int, default=6)
    w.add_argument("--size", type=int, default=32)

    a = sub.add_parser("ablate", help="train and compare generator variants")
    a.add_argument("--config", required=True)
    a.add_argument(
        "--axis", required=True, choices=["input", "norm", "kernel", "width", "concat"]
    )
    a.add_argument("--seeds", type=int)
    a.add_argument("--out", help="table file to write")

    return p


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    state = None
    if args.resume:
        state = trainer.load_checkpoint(args.resume)
        cfg = state.cfg
    ckpt = args.ckpt
    if ckpt is None:
        ckpt = os.path.join(cfg.out_dir, "ckpt.spde")
    os.makedirs(os.path.dirname(ckpt) or ".", exist_ok=True)
    trainer.fit(cfg, log=print, state=state, ckpt_path=ckpt)
    print(f"checkpoint={ckpt}")
    return 0


def _cmd_eval(args) -> int:
    state = trainer.load_checkpoint(args.ckpt)
    data_dir = args.data
    if not os.path.exists(os.path.join(data_dir, "index.txt")):
        for split in ("val", "train"):
            cand = os.path.join(data_dir, split)
            if os.path.exists(os.path.join(cand, "index.txt")):
                data_dir = cand
                break
    ds = scenes.load_dataset(data_dir)
    result = trainer.evaluate(state, ds)
    save_report(args.out, result["metrics"], result["confusion"])
    for k, v in result["metrics"].items():
        print(f"{k}={v:.6f}")
    return 0


def _cmd_sample(args) -> int:
    if args.num < 1:
        raise UsageError("--num must be >= 1")
    state = trainer.load_checkpoint(args.ckpt)
    labels = pnm.read_pgm(args.mask)
    mask = SegMask(labels.astype(np.int64), state.cfg.data.num_labels)
    style = None
    if args.style:
        img = pnm.read_ppm(args.style).astype(np.float32)
        style = ((img / 127.5) - 1.0).transpose(2, 0, 1)[None]
    rng = SplitMix64(args.seed).spawn("sample")
    imgs = trainer.sample_images(state, mask, args.num, rng, style_image=style)
    for i in range(args.num):
        u8 = np.clip(np.round((imgs[i] + 1.0) * 127.5), 0, 255).astype(np.uint8)
        path = f"{args.out}_{i}.ppm"
        pnm.write_ppm(path, u8.transpose(1, 2, 0))
        print(f"wrote {path}")
    return 0


def _cmd_washaway(args) -> int:
    if args.mask:
        mask = SegMask(pnm.read_pgm(args.mask).astype(np.int64), args.labels)
    else:
        # non-uniform control: diagonal split between labels 0 and 1
        yy, xx = np.meshgrid(np.arange(args.size), np.arange(args.size), indexing="ij")
        mask = SegMask((xx + yy >= args.size).astype(np.int64), args.labels)
    report = trainer.run_washaway_demo(mask, args.out)
    worst = max(r["in_l2"] for r in report["labels"].values())
    print(f"uniform-mask instance-norm activation L2 max={worst:.3e}")
    print(f"modulated-path min pairwise diff={report['spade_min_pairwise_diff']:.3e}")
    print(f"report={args.out}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = load_config(args.config)
    rows, table = trainer.run_ablation(cfg, args.axis, seeds=args.seeds, log=print)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
    print(table, end="")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sample": _cmd_sample,
    "washaway": _cmd_washaway,
    "ablate": _cmd_ablate,
}


def cli_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SpadeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())
