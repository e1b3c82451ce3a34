"""Coordinate preprocessing strategies for pose sequences.

Four schemes are supported: raw passthrough, per-frame nose-tip anchoring,
a single video-global face-center anchor, and per-frame center-of-mass
centering with max-deviation rescaling into [-1, 1].
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .keypoints import LAYOUTS, PoseFrame, PoseSequence


class DegenerateFrameError(ValueError):
    """A frame (or sequence) lacks the landmarks a strategy needs."""


class NormalizationStrategy(Enum):
    """Coordinate preprocessing scheme; values double as config/CLI names."""

    RAW = "raw"
    GLOBAL_NOSE_ANCHORED = "nose"
    FACE_CENTERED = "face"
    PER_FRAME_COM = "com"


def per_frame_com(frame: PoseFrame, layout_name: str = "holistic-79-v1") -> np.ndarray:
    """Mean coordinate of all joints belonging to present groups."""
    layout = LAYOUTS[layout_name]
    mask = layout.joint_mask(frame.presence)
    if not mask.any():
        raise DegenerateFrameError("no landmark group present in frame")
    return frame.coords[mask].mean(axis=0)


def face_com(frame: PoseFrame, layout_name: str = "holistic-79-v1") -> np.ndarray:
    """Mean coordinate of the face landmarks."""
    layout = LAYOUTS[layout_name]
    if not frame.presence[2]:
        raise DegenerateFrameError("face group absent in frame")
    return frame.coords[layout.group_slice("face")].mean(axis=0)


def per_frame_scale(frame: PoseFrame, layout_name: str = "holistic-79-v1") -> float:
    """Max absolute coordinate over visible joints; 1.0 for degenerate frames.

    Assumes the frame is already centered; dividing by the result bounds
    every visible coordinate in [-1, 1].
    """
    layout = LAYOUTS[layout_name]
    mask = layout.joint_mask(frame.presence)
    if not mask.any():
        return 1.0
    s = float(np.abs(frame.coords[mask]).max())
    return s if s > 0.0 else 1.0


def _visible_masks(seq: PoseSequence) -> np.ndarray:
    layout = LAYOUTS[seq.layout]
    presence = seq.presence_array()
    masks = np.zeros((len(seq.frames), len(layout.groups), 1), dtype=bool)
    return np.stack([layout.joint_mask(p) for p in presence])


def normalize_sequence(seq: PoseSequence, strategy: NormalizationStrategy) -> PoseSequence:
    """Apply a normalization strategy, leaving absent joints at exactly zero.

    Frames with no visible group pass through as all-zero frames so that
    tracking dropouts survive the pipeline.
    """
    if strategy is NormalizationStrategy.RAW:
        return seq

    layout = LAYOUTS[seq.layout]
    coords = seq.coords_array().copy()
    presence = seq.presence_array()
    visible = _visible_masks(seq)  # (T, 79) joint visibility
    nose = layout.nose_index
    face_present = presence[:, 2]

    if strategy is NormalizationStrategy.GLOBAL_NOSE_ANCHORED:
        if not face_present.any():
            raise DegenerateFrameError("nose anchoring needs the face in at least one frame")
        for t in range(len(coords)):
            if face_present[t]:
                coords[t][visible[t]] -= coords[t, nose]
    elif strategy is NormalizationStrategy.FACE_CENTERED:
        if not face_present.any():
            raise DegenerateFrameError("face centering needs the face in at least one frame")
        face = layout.group_slice("face")
        anchor = coords[face_present, face].mean(axis=(0, 1))
        for t in range(len(coords)):
            coords[t][visible[t]] -= anchor
    elif strategy is NormalizationStrategy.PER_FRAME_COM:
        for t in range(len(coords)):
            vis = visible[t]
            if not vis.any():
                continue
            pts = coords[t][vis]
            pts = pts - pts.mean(axis=0)
            pts = pts - pts.mean(axis=0)  # second pass kills the rounding residual
            s = np.abs(pts).max()
            if s > 0.0:
                pts = pts / s
            coords[t][vis] = pts
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    return seq.with_frames(coords, presence)
