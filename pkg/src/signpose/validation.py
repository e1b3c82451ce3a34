"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .keypoints import PoseSequence


def check_pose_sequences(X) -> list[PoseSequence]:
    """Ensure X is a non-empty sequence of PoseSequence with one layout."""
    seqs = list(X)
    if not seqs:
        raise ValueError("X must contain at least one sequence")
    for i, s in enumerate(seqs):
        if not isinstance(s, PoseSequence):
            raise TypeError(f"X[{i}] is {type(s).__name__}, expected PoseSequence")
    layouts = {s.layout for s in seqs}
    if len(layouts) > 1:
        raise ValueError(f"sequences mix landmark layouts: {sorted(layouts)}")
    return seqs


def check_labels(y, n: int) -> np.ndarray:
    """Ensure y has one label per sequence; returns an object array."""
    arr = np.asarray(y, dtype=object)
    if arr.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {arr.shape}")
    return arr
