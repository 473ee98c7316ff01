"""Command line launcher for the segmentation service."""

from __future__ import annotations

import argparse
import sys

from .app import create_app
from .config import CHECKPOINT_ENV, ServiceConfig, checkpoint_from_env


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sam-service",
        description="Serve point-prompted segmentation over HTTP.",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument(
        "--checkpoint",
        default=None,
        help=f"model checkpoint path (default: ${CHECKPOINT_ENV})",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-concurrent", type=int, default=4)
    parser.add_argument(
        "--stub-disc",
        action="store_true",
        help="serve a synthetic disc around the positive-point centroid "
        "instead of loading a model",
    )
    return parser


def build_config(args: argparse.Namespace) -> ServiceConfig:
    checkpoint = args.checkpoint
    if checkpoint is None and not args.stub_disc:
        checkpoint = checkpoint_from_env()
    return ServiceConfig(
        checkpoint=checkpoint,
        device=args.device,
        port=args.port,
        max_concurrent=args.max_concurrent,
        stub_disc=args.stub_disc,
    )


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = build_config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    import uvicorn

    uvicorn.run(create_app(config), host=args.host, port=config.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
