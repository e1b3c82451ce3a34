"""Stochastic training-time augmentation for normalized pose sequences.

Each transform takes an explicit numpy Generator so augmentation is pure and
reproducible; augment_sequence derives that generator from (seed,
sample_index), independent of data-loading order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .keypoints import LAYOUTS, PoseSequence
from .rng import AUGMENT, derive_rng


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs of the augmentation pipeline; identity at (0, (1,1), 0)."""

    jitter_sigma: float = 0.01
    scale_lo: float = 0.8
    scale_hi: float = 1.2
    temporal_dropout_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if not (0 < self.scale_lo <= self.scale_hi):
            raise ValueError("scale range must satisfy 0 < lo <= hi")
        if not 0 <= self.temporal_dropout_rate <= 1:
            raise ValueError("temporal_dropout_rate must be in [0, 1]")


def _visible(seq: PoseSequence, presence: np.ndarray) -> np.ndarray:
    layout = LAYOUTS[seq.layout]
    return np.stack([layout.joint_mask(p) for p in presence])


def jitter(seq: PoseSequence, sigma: float, rng: np.random.Generator) -> PoseSequence:
    """Add independent N(0, sigma^2) noise to every visible-joint coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return seq
    coords = seq.coords_array().copy()
    presence = seq.presence_array()
    noise = rng.normal(0.0, sigma, size=coords.shape)
    vis = _visible(seq, presence)
    coords[vis] += noise[vis]
    return seq.with_frames(coords, presence)


def scale_skeleton(seq: PoseSequence, factor: float) -> PoseSequence:
    """Multiply every visible-joint coordinate by factor (about the origin)."""
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    coords = seq.coords_array().copy()
    presence = seq.presence_array()
    vis = _visible(seq, presence)
    coords[vis] *= factor
    return seq.with_frames(coords, presence)


def temporal_dropout(seq: PoseSequence, rate: float, rng: np.random.Generator) -> PoseSequence:
    """Zero out whole frames independently with probability rate.

    Dropped frames get all-zero coordinates and all presence flags false;
    sequence length is unchanged.
    """
    if not 0 <= rate <= 1:
        raise ValueError("rate must be in [0, 1]")
    coords = seq.coords_array().copy()
    presence = seq.presence_array().copy()
    dropped = rng.random(len(seq.frames)) < rate
    coords[dropped] = 0.0
    presence[dropped] = False
    return seq.with_frames(coords, presence)


def augment_sequence(seq: PoseSequence, cfg: AugmentConfig, sample_index: int) -> PoseSequence:
    """Scale, then jitter, then temporal dropout, keyed by (seed, sample_index)."""
    rng = derive_rng(cfg.seed, AUGMENT, sample_index)
    factor = rng.uniform(cfg.scale_lo, cfg.scale_hi)
    out = scale_skeleton(seq, factor) if factor != 1.0 else seq
    out = jitter(out, cfg.jitter_sigma, rng)
    if cfg.temporal_dropout_rate > 0:
        out = temporal_dropout(out, cfg.temporal_dropout_rate, rng)
    return out
