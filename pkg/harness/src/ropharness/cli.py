"""rop-harness command line: build, audit, and train one head from a YAML config."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .errors import HarnessError
from .models import build_model
from .spec import HeadSpec
from .train import train_eval

DEFAULTS = {
    "epochs": 25,
    "batch_size": 32,
    "learning_rate": 1e-4,
    "input_size": 224,
    "seed": 0,
    "pretrained": False,
}


def load_config(path) -> dict:
    cfg = yaml.safe_load(Path(path).read_text())
    for key in ("backbone", "task", "train_dir", "val_dir", "out_dir"):
        if key not in cfg:
            raise HarnessError(f"config missing {key!r}")
    return {**DEFAULTS, **cfg}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rop-harness")
    sub = parser.add_subparsers(dest="command", required=True)

    audit = sub.add_parser("audit", help="build a model and print its structural audit")
    audit.add_argument("--backbone", required=True)
    audit.add_argument("--task", required=True)
    audit.add_argument("--input-size", type=int, default=224)

    train = sub.add_parser("train", help="train per a YAML config and write pred.csv")
    train.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "audit":
            handle = build_model(HeadSpec(args.backbone, args.task), input_size=args.input_size)
            print(handle.audit.describe())
            return 0
        cfg = load_config(args.config)
        handle = build_model(
            HeadSpec(cfg["backbone"], cfg["task"]),
            input_size=cfg["input_size"],
            pretrained=cfg["pretrained"],
        )
        print(handle.audit.describe())
        result = train_eval(
            handle,
            cfg["train_dir"],
            cfg["val_dir"],
            cfg["out_dir"],
            epochs=cfg["epochs"],
            batch_size=cfg["batch_size"],
            learning_rate=cfg["learning_rate"],
            seed=cfg["seed"],
        )
        print(f"val accuracy {result.val_accuracy:.4f}; wrote {result.pred_csv}")
        return 0
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
