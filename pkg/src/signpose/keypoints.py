"""Keypoint data model: landmark layout, pose frames/sequences, the on-disk
.pose.json container, validation, temporal resampling, and a synthetic
gloss generator for desk-scale experiments."""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass

import numpy as np

from .rng import SYNTH_CLASS, SYNTH_INSTANCE, derive_rng

N_LANDMARKS = 79
FRAME_WIDTH = N_LANDMARKS * 3  # 237 serialized values per frame

GROUP_NAMES = ("left_hand", "right_hand", "face")


class KeypointError(ValueError):
    """Raised for malformed keypoint files or violated operation preconditions."""


@dataclass(frozen=True)
class LandmarkLayout:
    """Named assignment of landmark indices to groups.

    ``groups`` maps group name to a half-open index range. The default
    holistic layout packs 21 left-hand, 21 right-hand and 37 face landmarks
    into [0, 79), with the nose tip leading the face block.
    """

    name: str
    groups: tuple[tuple[str, tuple[int, int]], ...]
    nose_index: int

    def __post_init__(self):
        stop = 0
        for gname, (lo, hi) in self.groups:
            if lo != stop or hi <= lo:
                raise ValueError(f"group {gname!r} range [{lo},{hi}) is not contiguous")
            stop = hi
        if stop != N_LANDMARKS:
            raise ValueError(f"groups cover [0,{stop}), expected [0,{N_LANDMARKS})")
        face_lo, face_hi = dict(self.groups)["face"]
        if not face_lo <= self.nose_index < face_hi:
            raise ValueError(f"nose index {self.nose_index} outside face range")

    def group_slice(self, name: str) -> slice:
        lo, hi = dict(self.groups)[name]
        return slice(lo, hi)

    def joint_mask(self, presence: np.ndarray) -> np.ndarray:
        """Boolean (79,) mask of joints belonging to present groups."""
        mask = np.zeros(N_LANDMARKS, dtype=bool)
        for flag, (_, (lo, hi)) in zip(presence, self.groups):
            if flag:
                mask[lo:hi] = True
        return mask


HOLISTIC_79 = LandmarkLayout(
    name="holistic-79-v1",
    groups=(("left_hand", (0, 21)), ("right_hand", (21, 42)), ("face", (42, 79))),
    nose_index=42,
)

LAYOUTS = {HOLISTIC_79.name: HOLISTIC_79}


def _frozen_array(a, shape, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PoseFrame:
    """One frame of 79 (x, y, z) landmarks plus per-group presence flags."""

    coords: np.ndarray  # (79, 3) float64
    presence: np.ndarray  # (3,) bool: left hand, right hand, face

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen_array(self.coords, (N_LANDMARKS, 3), np.float64))
        object.__setattr__(self, "presence", _frozen_array(self.presence, (3,), bool))

    def __eq__(self, other):
        if not isinstance(other, PoseFrame):
            return NotImplemented
        return np.array_equal(self.coords, other.coords) and np.array_equal(
            self.presence, other.presence
        )

    @staticmethod
    def zero() -> "PoseFrame":
        return PoseFrame(np.zeros((N_LANDMARKS, 3)), np.zeros(3, dtype=bool))


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """Per-video time series of pose frames with identifying metadata."""

    video_id: str
    gloss: str
    signer_id: str
    fps: float
    layout: str
    frames: tuple[PoseFrame, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))

    def __eq__(self, other):
        if not isinstance(other, PoseSequence):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and self.gloss == other.gloss
            and self.signer_id == other.signer_id
            and self.fps == other.fps
            and self.layout == other.layout
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )

    def __len__(self) -> int:
        return len(self.frames)

    def coords_array(self) -> np.ndarray:
        """Stacked coordinates, shape (T, 79, 3)."""
        return np.stack([f.coords for f in self.frames])

    def presence_array(self) -> np.ndarray:
        """Stacked presence flags, shape (T, 3)."""
        return np.stack([f.presence for f in self.frames])

    def with_frames(self, coords: np.ndarray, presence: np.ndarray) -> "PoseSequence":
        """Copy of this sequence with frames rebuilt from arrays."""
        frames = tuple(PoseFrame(c, p) for c, p in zip(coords, presence))
        return PoseSequence(self.video_id, self.gloss, self.signer_id, self.fps, self.layout, frames)


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validate_sequence."""

    rule: str
    frame_index: int | None
    detail: str

    def __str__(self):
        where = "sequence" if self.frame_index is None else f"frame {self.frame_index}"
        return f"{where}: {self.rule}: {self.detail}"


def validate_sequence(seq: PoseSequence) -> list[Violation]:
    """Check every type invariant; returns an empty list iff all hold."""
    out: list[Violation] = []
    if seq.layout not in LAYOUTS:
        out.append(Violation("unknown-layout", None, f"layout {seq.layout!r} is not registered"))
        return out
    layout = LAYOUTS[seq.layout]
    if len(seq.frames) == 0:
        out.append(Violation("empty-sequence", None, "sequence has no frames"))
    if not seq.gloss:
        out.append(Violation("empty-gloss", None, "gloss is empty"))
    if not (math.isfinite(seq.fps) and seq.fps > 0):
        out.append(Violation("non-positive-fps", None, f"fps is {seq.fps}"))
    for i, frame in enumerate(seq.frames):
        if not np.isfinite(frame.coords).all():
            out.append(Violation("non-finite", i, "frame contains non-finite coordinates"))
        for flag, (gname, (lo, hi)) in zip(frame.presence, layout.groups):
            if not flag and np.any(frame.coords[lo:hi] != 0.0):
                out.append(
                    Violation(
                        "absent-group-nonzero",
                        i,
                        f"group {gname!r} is absent but has nonzero coordinates",
                    )
                )
    return out


def parse_keypoint_file(data: bytes | str) -> PoseSequence:
    """Parse the .pose.json container into a validated PoseSequence.

    Raises KeypointError naming the offending frame for width or
    non-finite-value problems.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    def _reject_constant(token):
        raise KeypointError(f"non-finite JSON constant {token!r} in keypoint file")

    try:
        doc = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise KeypointError(f"malformed keypoint container: {e}") from e
    if not isinstance(doc, dict):
        raise KeypointError("malformed keypoint container: top level is not an object")
    for key in ("format", "video_id", "gloss", "signer_id", "fps", "frames", "presence"):
        if key not in doc:
            raise KeypointError(f"malformed keypoint container: missing key {key!r}")
    fmt = doc["format"]
    if fmt not in LAYOUTS:
        raise KeypointError(f"unknown layout name {fmt!r}")
    frames_raw = doc["frames"]
    presence_raw = doc["presence"]
    if not isinstance(frames_raw, list) or not isinstance(presence_raw, list):
        raise KeypointError("malformed keypoint container: frames/presence must be arrays")
    if len(frames_raw) != len(presence_raw):
        raise KeypointError(
            f"malformed keypoint container: {len(frames_raw)} frames but "
            f"{len(presence_raw)} presence rows"
        )
    if len(frames_raw) == 0:
        raise KeypointError("malformed keypoint container: no frames")
    if not isinstance(doc["fps"], (int, float)) or isinstance(doc["fps"], bool):
        raise KeypointError("malformed keypoint container: fps must be a number")

    frames = []
    for i, (row, pres) in enumerate(zip(frames_raw, presence_raw)):
        if not isinstance(row, list) or len(row) != FRAME_WIDTH:
            n = len(row) if isinstance(row, list) else "non-array"
            raise KeypointError(f"frame {i}: expected {FRAME_WIDTH} values, got {n}")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in row):
            raise KeypointError(f"frame {i}: non-numeric coordinate value")
        coords = np.asarray(row, dtype=np.float64).reshape(N_LANDMARKS, 3)
        if not np.isfinite(coords).all():
            raise KeypointError(f"frame {i}: non-finite coordinate value")
        if (
            not isinstance(pres, list)
            or len(pres) != 3
            or any(not isinstance(p, bool) for p in pres)
        ):
            raise KeypointError(f"frame {i}: presence must be three booleans")
        frames.append(PoseFrame(coords, np.asarray(pres, dtype=bool)))

    return PoseSequence(
        video_id=str(doc["video_id"]),
        gloss=str(doc["gloss"]),
        signer_id=str(doc["signer_id"]),
        fps=float(doc["fps"]),
        layout=fmt,
        frames=tuple(frames),
    )


def write_keypoint_file(seq: PoseSequence) -> bytes:
    """Serialize a valid PoseSequence; parse(write(seq)) is bit-identical.

    Coordinates are written with Python's shortest-roundtrip float repr, so
    re-parsing reproduces the exact binary64 values.
    """
    violations = validate_sequence(seq)
    if violations:
        raise KeypointError(
            "cannot serialize invalid sequence: " + "; ".join(str(v) for v in violations)
        )
    doc = {
        "format": seq.layout,
        "video_id": seq.video_id,
        "gloss": seq.gloss,
        "signer_id": seq.signer_id,
        "fps": seq.fps,
        "frames": [f.coords.ravel().tolist() for f in seq.frames],
        "presence": [f.presence.tolist() for f in seq.frames],
    }
    return json.dumps(doc, allow_nan=False).encode("utf-8")


def resample_temporal(seq: PoseSequence, target_len: int) -> PoseSequence:
    """Resample to exactly target_len frames.

    Long sequences are subsampled at uniform indices round(i*(N-1)/(T-1))
    (round half up; the middle frame for T=1); short ones keep their frames
    in order and are zero-padded with all presence flags false.
    """
    if target_len < 1:
        raise ValueError(f"target_len must be >= 1, got {target_len}")
    n = len(seq.frames)
    if n >= target_len:
        if target_len == 1:
            idx = [math.floor((n - 1) / 2 + 0.5)]
        else:
            idx = [math.floor(i * (n - 1) / (target_len - 1) + 0.5) for i in range(target_len)]
        frames = tuple(seq.frames[i] for i in idx)
    else:
        frames = seq.frames + tuple(PoseFrame.zero() for _ in range(target_len - n))
    return PoseSequence(seq.video_id, seq.gloss, seq.signer_id, seq.fps, seq.layout, frames)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic gloss dataset generator."""

    n_classes: int
    seqs_per_class: int
    frames: int = 40
    nuisance_translation: float = 0.0
    nuisance_scale_range: tuple[float, float] = (1.0, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.seqs_per_class < 1 or self.frames < 1:
            raise ValueError("n_classes, seqs_per_class and frames must be positive")
        if not self.nuisance_translation >= 0:
            raise ValueError("nuisance_translation must be >= 0")
        lo, hi = self.nuisance_scale_range
        if not (0 < lo <= hi):
            raise ValueError("nuisance_scale_range must satisfy 0 < lo <= hi")


def synth_class_gloss(class_id: int) -> str:
    """Stable letters-only gloss name (no trailing digits, so glosses never
    collide under variant-suffix stripping)."""
    letters = ""
    k = class_id
    while True:
        letters = string.ascii_uppercase[k % 26] + letters
        k = k // 26 - 1
        if k < 0:
            break
    return f"SIGN-{letters}"


# Fixed skeleton geometry of the generator, in image-normalized units.
_FACE_CENTER = np.array([0.5, 0.3, 0.0])
_RIGHT_BASE = np.array([0.63, 0.55, 0.0])
_LEFT_BASE = np.array([0.37, 0.55, 0.0])
_SCALE_PIVOT = np.array([0.5, 0.45, 0.0])
_INSTANCE_NOISE = 0.006


def _face_template() -> np.ndarray:
    # Nose tip first, then 36 points on an ellipse around the face center.
    pts = np.zeros((37, 3))
    pts[0] = [0.0, 0.0, -0.01]
    ang = 2 * np.pi * np.arange(36) / 36
    pts[1:, 0] = 0.055 * np.cos(ang)
    pts[1:, 1] = 0.075 * np.sin(ang)
    pts[1:, 2] = -0.005
    return pts + _FACE_CENTER


_FACE_POINTS = _face_template()


def _class_params(seed: int, class_id: int) -> dict:
    rng = derive_rng(seed, SYNTH_CLASS, class_id)
    # Deterministically spaced base frequencies keep classes separable even
    # when random draws land close together; the spacing is deliberately
    # tight so instance nuisance genuinely obscures raw coordinates.
    f_right = 0.6 + 0.25 * (class_id % 16) + rng.uniform(0.0, 0.12)
    f_left = 0.5 + 0.2 * ((class_id * 7 + 3) % 16) + rng.uniform(0.0, 0.12)
    return {
        "f_right": f_right,
        "f_left": f_left,
        "phase": rng.uniform(0.0, 2 * np.pi, size=4),
        "amp_right": rng.uniform(0.025, 0.045, size=2),
        "amp_left": rng.uniform(0.025, 0.045, size=2),
        "hand_shape_r": rng.normal(0.0, 0.015, size=(21, 3)) * np.array([1.0, 1.0, 0.3]),
        "hand_shape_l": rng.normal(0.0, 0.015, size=(21, 3)) * np.array([1.0, 1.0, 0.3]),
    }


def synth_gloss_sequence(spec: SynthSpec, class_id: int, instance_id: int) -> PoseSequence:
    """Deterministic synthetic sequence for (spec.seed, class_id, instance_id).

    Each class is a parametric two-hand trajectory (class-specific
    frequencies, phases, amplitudes and hand shapes) around a fixed face;
    instances add small coordinate noise plus a global translation of
    magnitude <= nuisance_translation and a global scale drawn from
    nuisance_scale_range. Per-frame COM normalization removes exactly that
    nuisance.
    """
    if not 0 <= class_id < spec.n_classes:
        raise ValueError(f"class_id {class_id} out of range [0, {spec.n_classes})")
    p = _class_params(spec.seed, class_id)
    rng = derive_rng(spec.seed, SYNTH_INSTANCE, class_id, instance_id)

    t = np.arange(spec.frames) / max(spec.frames - 1, 1)
    # Hand-center trajectories, one sinusoid per axis.
    right = np.empty((spec.frames, 3))
    right[:, 0] = p["amp_right"][0] * np.sin(2 * np.pi * (p["f_right"] * t) + p["phase"][0])
    right[:, 1] = p["amp_right"][1] * np.cos(2 * np.pi * (p["f_right"] * t) + p["phase"][1])
    right[:, 2] = 0.02 * np.sin(2 * np.pi * (p["f_left"] * t) + p["phase"][0])
    left = np.empty((spec.frames, 3))
    left[:, 0] = p["amp_left"][0] * np.sin(2 * np.pi * (p["f_left"] * t) + p["phase"][2])
    left[:, 1] = p["amp_left"][1] * np.cos(2 * np.pi * (p["f_left"] * t) + p["phase"][3])
    left[:, 2] = 0.02 * np.cos(2 * np.pi * (p["f_right"] * t) + p["phase"][2])

    coords = np.empty((spec.frames, N_LANDMARKS, 3))
    coords[:, 0:21] = (_LEFT_BASE + left)[:, None, :] + p["hand_shape_l"]
    coords[:, 21:42] = (_RIGHT_BASE + right)[:, None, :] + p["hand_shape_r"]
    coords[:, 42:79] = _FACE_POINTS

    coords = coords + rng.normal(0.0, _INSTANCE_NOISE, size=coords.shape)

    # Global nuisance: scale about a fixed pivot, then translate.
    scale = rng.uniform(*spec.nuisance_scale_range)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    translation = rng.uniform(0.0, spec.nuisance_translation) * direction
    coords = _SCALE_PIVOT + scale * (coords - _SCALE_PIVOT) + translation

    presence = np.ones((spec.frames, 3), dtype=bool)
    gloss = synth_class_gloss(class_id)
    return PoseSequence(
        video_id=f"{gloss}_{instance_id:04d}",
        gloss=gloss,
        signer_id=f"signer-{instance_id % 7}",
        fps=25.0,
        layout=HOLISTIC_79.name,
        frames=tuple(PoseFrame(c, pr) for c, pr in zip(coords, presence)),
    )
