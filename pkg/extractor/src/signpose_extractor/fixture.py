"""Deterministic synthetic fixture clip for extraction tests.

Draws color markers the blob engine tracks: a white face ellipse plus red
(left hand) and green (right hand) squares moving on analytic paths.
"""

from __future__ import annotations

import math

import cv2
import numpy as np

WIDTH, HEIGHT = 128, 96
HAND = 11  # marker square half-size-ish (pixels per side)


def fixture_frame(t: int, n_frames: int, hide_hands: bool = False) -> np.ndarray:
    """One RGB frame of the fixture clip."""
    frame = np.full((HEIGHT, WIDTH, 3), 40, dtype=np.uint8)
    phase = 2.0 * math.pi * t / max(n_frames, 1)
    # Face: white ellipse, slight bob.
    cy = int(28 + 2 * math.sin(phase))
    cv2.ellipse(frame, (64, cy), (14, 18), 0, 0, 360, (255, 255, 255), -1)
    if not hide_hands:
        gx = int(88 + 18 * math.sin(phase))
        gy = int(60 + 10 * math.cos(2 * phase))
        frame[gy : gy + HAND, gx : gx + HAND] = (0, 255, 0)  # right hand marker
        rx = int(28 + 14 * math.cos(phase))
        ry = int(62 + 8 * math.sin(3 * phase))
        frame[ry : ry + HAND, rx : rx + HAND] = (255, 0, 0)  # left hand marker
    return frame


def write_fixture_clip(path, n_frames: int = 24, fps: float = 25.0,
                       hide_hands_from: int | None = None) -> int:
    """Write the clip as MJPG AVI; returns the frame count."""
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, (WIDTH, HEIGHT)
    )
    if not writer.isOpened():
        raise ValueError(f"cannot open {path!r} for writing")
    try:
        for t in range(n_frames):
            hide = hide_hands_from is not None and t >= hide_hands_from
            rgb = fixture_frame(t, n_frames, hide_hands=hide)
            writer.write(cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    finally:
        writer.release()
    return n_frames
