"""CLI: extract one video into a keypoint file (optionally a masked video)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engines import ENGINES
from .extract import ExtractionConfig, extract_video


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signpose-extract",
        description="Extract hand/face pose keypoints from a sign video.",
    )
    parser.add_argument("--video", required=True, help="input video path")
    parser.add_argument("--out", required=True, help="keypoint .pose.json to write")
    parser.add_argument("--masked-out", help="also write the masked grayscale video here")
    parser.add_argument("--face-subset", help="JSON file with 37 engine face-landmark indices")
    parser.add_argument("--engine", choices=sorted(ENGINES), default="mediapipe")
    parser.add_argument("--dilation", type=int, default=10, help="hull dilation in pixels")
    parser.add_argument("--gloss", default="", help="gloss label (defaults to the filename stem)")
    parser.add_argument("--signer", default="unknown", help="signer id to record")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    try:
        face_subset = None
        if args.face_subset:
            face_subset = json.loads(Path(args.face_subset).read_text(encoding="utf-8"))
        cfg = ExtractionConfig(
            video_path=args.video,
            keypoint_path=args.out,
            emit_masked_video=bool(args.masked_out),
            masked_video_path=args.masked_out,
            mask_dilation_px=args.dilation,
            face_subset=face_subset,
            engine=args.engine,
            gloss=args.gloss,
            signer_id=args.signer,
        )
        n_frames, presence = extract_video(cfg)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"signpose-extract: error: {e}", file=sys.stderr)
        return 1
    face_frac = sum(p[2] for p in presence) / n_frames
    print(f"wrote {args.out}: {n_frames} frames, face present in {face_frac:.0%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
