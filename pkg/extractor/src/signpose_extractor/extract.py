"""Video -> keypoint-file extraction.

Writes the primary toolkit's .pose.json container (its documented cross-
component interface): 79 landmarks per frame as 237 flat values, row-aligned
presence flags, layout tag "holistic-79-v1".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .engines import Detection, make_engine
from .imaging import grayscale_normalize, mask_frame

LAYOUT_NAME = "holistic-79-v1"
N_LANDMARKS = 79


@dataclass
class ExtractionConfig:
    video_path: str
    keypoint_path: str
    emit_masked_video: bool = False
    masked_video_path: str | None = None
    mask_dilation_px: int = 10
    face_subset: list[int] | None = None  # None: engine default; must be 37 unique
    engine: str = "mediapipe"
    gloss: str = ""  # defaults to the video filename stem
    signer_id: str = "unknown"

    def __post_init__(self):
        if self.mask_dilation_px < 0:
            raise ValueError("mask_dilation_px must be >= 0")
        if self.face_subset is not None:
            if len(self.face_subset) != 37:
                raise ValueError(f"face_subset must have 37 indices, got {len(self.face_subset)}")
            if len(set(self.face_subset)) != 37:
                raise ValueError("face_subset indices must be unique")
        if self.emit_masked_video and not self.masked_video_path:
            raise ValueError("emit_masked_video requires masked_video_path")


def detection_to_frame(det: Detection, face_subset) -> tuple[np.ndarray, list[bool]]:
    """One (79, 3) coordinate block plus presence flags from a detection."""
    coords = np.zeros((N_LANDMARKS, 3))
    presence = [False, False, False]
    if det.left_hand is not None:
        coords[0:21] = det.left_hand
        presence[0] = True
    if det.right_hand is not None:
        coords[21:42] = det.right_hand
        presence[1] = True
    if det.face is not None:
        if max(face_subset) >= len(det.face):
            raise ValueError(
                f"face_subset index {max(face_subset)} exceeds engine face set "
                f"of {len(det.face)} landmarks"
            )
        coords[42:79] = det.face[face_subset]
        presence[2] = True
    return coords, presence


def write_keypoint_json(path, video_id, gloss, signer_id, fps, frames, presence, meta=None):
    doc = {
        "format": LAYOUT_NAME,
        "video_id": video_id,
        "gloss": gloss,
        "signer_id": signer_id,
        "fps": fps,
        "frames": [np.asarray(f, dtype=np.float64).ravel().tolist() for f in frames],
        "presence": [list(map(bool, p)) for p in presence],
    }
    if meta:
        doc["extractor"] = meta
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def extract_video(cfg: ExtractionConfig, engine=None):
    """Run the engine over every frame and write the keypoint file.

    Returns (n_frames, presence list). Optionally also writes the
    grayscale-normalized, background-masked video alongside.
    """
    cap = cv2.VideoCapture(str(cfg.video_path))
    if not cap.isOpened():
        raise ValueError(f"cannot open video {cfg.video_path!r}")
    fps = cap.get(cv2.CAP_PROP_FPS) or 25.0
    if not fps > 0:
        fps = 25.0

    own_engine = engine is None
    engine = engine or make_engine(cfg.engine)
    face_subset = cfg.face_subset or engine.default_face_subset
    if len(face_subset) != 37 or len(set(face_subset)) != 37:
        raise ValueError("engine default face subset must provide 37 unique indices")

    writer = None
    frames, presence = [], []
    try:
        while True:
            ok, bgr = cap.read()
            if not ok:
                break
            rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
            det = engine.detect(rgb)
            coords, pres = detection_to_frame(det, face_subset)
            frames.append(coords)
            presence.append(pres)
            if cfg.emit_masked_video:
                gray = grayscale_normalize(rgb)
                masked = mask_frame(gray, coords, pres, cfg.mask_dilation_px)
                if writer is None:
                    h, w = masked.shape
                    writer = cv2.VideoWriter(
                        str(cfg.masked_video_path),
                        cv2.VideoWriter_fourcc(*"MJPG"),
                        fps,
                        (w, h),
                        isColor=False,
                    )
                    if not writer.isOpened():
                        raise ValueError(f"cannot open {cfg.masked_video_path!r} for writing")
                writer.write((masked * 255.0).round().astype(np.uint8))
    finally:
        cap.release()
        if writer is not None:
            writer.release()
        if own_engine:
            engine.close()

    if not frames:
        raise ValueError(f"video {cfg.video_path!r} has no frames")

    video_id = Path(cfg.video_path).stem
    write_keypoint_json(
        cfg.keypoint_path,
        video_id=video_id,
        gloss=cfg.gloss or video_id,
        signer_id=cfg.signer_id,
        fps=float(fps),
        frames=frames,
        presence=presence,
        meta={"engine": cfg.engine, "face_subset": list(face_subset)},
    )
    return len(frames), presence
