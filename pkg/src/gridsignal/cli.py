"""Command-line entry points: train, eval, histogram.

On failure a machine-readable error JSON goes to stdout and the exit code is
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import cmd_eval, cmd_histogram, cmd_train, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridsignal")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train an agent on the fixed OD matrix")
    train.add_argument("--config", required=True)
    train.add_argument("--out", required=True)

    evaluate = sub.add_parser("eval", help="fluctuation-sweep evaluation")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--out", required=True)

    hist = sub.add_parser("histogram", help="bin a queue table CSV")
    hist.add_argument("--in", dest="in_csv", required=True)
    hist.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            outputs = cmd_train(load_config(args.config), args.out)
        elif args.command == "eval":
            outputs = cmd_eval(load_config(args.config), args.out, checkpoint=args.checkpoint)
        else:
            outputs = cmd_histogram(args.in_csv, args.out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 1
    print(json.dumps({"ok": True, "outputs": outputs}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
