"""Frame-level image operations: grayscale normalization and landmark-hull
background masking."""

from __future__ import annotations

import cv2
import numpy as np

# BT.709 luma weights for R, G, B.
_LUMA = np.array([0.2126, 0.7152, 0.0722])

GROUP_RANGES = ((0, 21), (21, 42), (42, 79))


def grayscale_normalize(frame: np.ndarray) -> np.ndarray:
    """8-bit RGB (H, W, 3) -> luma-weighted grayscale in [0, 1]."""
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.size == 0:
        raise ValueError(f"expected a non-empty (H, W, 3) frame, got {frame.shape}")
    return frame.astype(np.float64) @ _LUMA / 255.0


def mask_frame(
    gray: np.ndarray,
    coords: np.ndarray,
    presence,
    dilation_px: int = 10,
) -> np.ndarray:
    """Zero every pixel outside the dilated convex hulls of present groups.

    ``coords`` is the (79, 3) landmark array in image-normalized units;
    hulls are built only for groups whose presence flag is set. With no
    present group the result is all zeros. Pixels inside a hull keep their
    value exactly.
    """
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.size == 0:
        raise ValueError(f"expected a non-empty (H, W) image, got {gray.shape}")
    if dilation_px < 0:
        raise ValueError("dilation_px must be >= 0")
    h, w = gray.shape
    keep = np.zeros((h, w), dtype=np.uint8)
    for flag, (lo, hi) in zip(presence, GROUP_RANGES):
        if not flag:
            continue
        pts = coords[lo:hi, :2] * [w, h]
        pts = np.round(pts).astype(np.int32)
        hull = cv2.convexHull(pts)
        cv2.fillConvexPoly(keep, hull, 1)
    if dilation_px > 0 and keep.any():
        size = 2 * dilation_px + 1
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (size, size))
        keep = cv2.dilate(keep, kernel)
    return gray * keep
