"""Command-line interface.

    embridge extract --annotations a.json --out-dir d --dataset activitynet
    embridge augment --annotations a.json --manifest d/manifest.json --mock

Exit codes: 0 success, 2 usage or validation errors, 3 data errors
(unreadable or malformed files, replay divergence).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .annotations import load_annotations
from .augment import AugmentationJob, run_augment
from .encoders import DEFAULT_DIM
from .errors import AnnotationError, EncoderError, ExportError
from .extract import DATASET_FRAME_COUNTS, ExportJob, run_extract
from .llm import (
    DEFAULT_MAX_NEW_TOKENS,
    DEFAULT_MODEL,
    DEFAULT_TEMPERATURE,
    HttpCompletionClient,
    MockClient,
    ReplayClient,
)


def _cmd_extract(args) -> int:
    if args.frames_per_video is not None:
        frames = args.frames_per_video
    elif args.dataset is not None:
        frames = DATASET_FRAME_COUNTS[args.dataset]
    else:
        print("error: provide --dataset or --frames-per-video", file=sys.stderr)
        return 2
    job = ExportJob(
        videos=load_annotations(args.annotations),
        frames_per_video=frames,
        encoder=args.encoder,
        embed_dim=args.embed_dim,
        out_dir=args.out_dir,
    )
    report = run_extract(job)
    print(f"written={len(report.written)}")
    print(f"skipped={len(report.skipped)}")
    print(f"manifest={report.manifest_path}")
    return 0


def _cmd_augment(args) -> int:
    if args.replay_from is not None:
        client = ReplayClient(args.replay_from)
    elif args.mock:
        client = MockClient()
    elif args.endpoint is not None:
        client = HttpCompletionClient(args.endpoint, model=args.model)
    else:
        print("error: provide --endpoint, --mock, or --replay-from", file=sys.stderr)
        return 2
    annotations = load_annotations(args.annotations)
    job = AugmentationJob(
        manifest_path=args.manifest,
        captions_by_video={v.id: list(v.captions) for v in annotations},
        model=args.model,
        max_new_tokens=args.max_new_tokens,
        temperature=args.temperature,
        encoder=args.encoder,
        embed_dim=args.embed_dim,
        transcript_path=args.transcript,
    )
    report = run_augment(job, client)
    print(f"pairs={report.pairs}")
    print(f"fallbacks={len(report.fallbacks)}")
    print(f"transcript={report.transcript_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write frame/caption embeddings and a manifest")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dataset", choices=sorted(DATASET_FRAME_COUNTS))
    p.add_argument("--frames-per-video", type=int, default=None)
    p.add_argument("--encoder", default="mock")
    p.add_argument("--embed-dim", type=int, default=DEFAULT_DIM)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("augment", help="add synthetic transition captions to a manifest")
    p.add_argument("--annotations", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", default=DEFAULT_MODEL)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--mock", action="store_true")
    p.add_argument("--replay-from", default=None)
    p.add_argument("--transcript", default=None)
    p.add_argument("--max-new-tokens", type=int, default=DEFAULT_MAX_NEW_TOKENS)
    p.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    p.add_argument("--encoder", default="mock")
    p.add_argument("--embed-dim", type=int, default=DEFAULT_DIM)
    p.set_defaults(fn=_cmd_augment)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (AnnotationError, EncoderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExportError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
