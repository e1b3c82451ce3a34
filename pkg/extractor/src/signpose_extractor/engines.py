"""Pose engines: detect hand and face landmarks in one RGB frame.

The production engine wraps MediaPipe Holistic. The blob-marker engine
tracks solid color markers and exists so the full extraction pipeline can
run deterministically on the bundled synthetic fixture clip without any
model downloads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Detection:
    """Per-frame engine output in image-normalized coordinates.

    ``face`` holds the engine's full native face landmark set; the
    extractor selects its 37-point subset from it. Missing groups are None.
    """

    left_hand: np.ndarray | None  # (21, 3)
    right_hand: np.ndarray | None  # (21, 3)
    face: np.ndarray | None  # (N, 3), engine-native N


class MediaPipeEngine:
    """Holistic hand+face landmarks via MediaPipe (optional dependency).

    The default face subset keeps the nose tip first (mesh index 1) followed
    by eye contours, brows, lips and two extra nose points, 37 in total.
    """

    # FaceMesh indices; position 0 must be the nose tip.
    DEFAULT_FACE_SUBSET = [
        1,
        33, 133, 160, 159, 158, 144, 145, 153,
        362, 263, 387, 386, 385, 373, 374, 380,
        70, 63, 105, 66, 107,
        300, 293, 334, 296, 336,
        61, 291, 0, 17, 40, 270, 91, 321,
        4, 98,
    ]

    def __init__(self, min_detection_confidence=0.5, min_tracking_confidence=0.5):
        try:
            import mediapipe as mp
        except ImportError as e:
            raise ImportError(
                "MediaPipeEngine needs the 'mediapipe' package; install the "
                "[mediapipe] extra or use the blob engine for fixtures"
            ) from e
        self._holistic = mp.solutions.holistic.Holistic(
            static_image_mode=False,
            refine_face_landmarks=False,
            min_detection_confidence=min_detection_confidence,
            min_tracking_confidence=min_tracking_confidence,
        )

    @property
    def default_face_subset(self):
        return list(self.DEFAULT_FACE_SUBSET)

    @staticmethod
    def _landmarks_to_array(landmarks):
        if landmarks is None:
            return None
        return np.array([[p.x, p.y, p.z] for p in landmarks.landmark], dtype=np.float64)

    def detect(self, rgb: np.ndarray) -> Detection:
        results = self._holistic.process(rgb)
        return Detection(
            left_hand=self._landmarks_to_array(results.left_hand_landmarks),
            right_hand=self._landmarks_to_array(results.right_hand_landmarks),
            face=self._landmarks_to_array(results.face_landmarks),
        )

    def close(self):
        self._holistic.close()


class BlobMarkerEngine:
    """Tracks solid color markers: red = left hand, green = right hand,
    white = face. Emits 21-point grids per hand and a 37-point face set
    (centroid first), deterministically from pixel data alone."""

    MIN_PIXELS = 16

    @property
    def default_face_subset(self):
        return list(range(37))

    @staticmethod
    def _box_of(mask: np.ndarray):
        ys, xs = np.nonzero(mask)
        if len(xs) < BlobMarkerEngine.MIN_PIXELS:
            return None
        return xs.min(), xs.max(), ys.min(), ys.max()

    @staticmethod
    def _hand_grid(box, w, h) -> np.ndarray:
        x0, x1, y0, y1 = box
        gx = np.linspace(x0, x1, 7)
        gy = np.linspace(y0, y1, 3)
        pts = [(x, y) for y in gy for x in gx]  # 21 points, row-major
        return np.array([[x / w, y / h, 0.0] for x, y in pts], dtype=np.float64)

    @staticmethod
    def _face_points(box, w, h) -> np.ndarray:
        x0, x1, y0, y1 = box
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        rx, ry = max((x1 - x0) / 2.0, 1.0), max((y1 - y0) / 2.0, 1.0)
        pts = np.zeros((37, 3))
        pts[0] = [cx / w, cy / h, 0.0]  # nose tip at the centroid
        ang = 2.0 * np.pi * np.arange(36) / 36.0
        pts[1:, 0] = (cx + rx * np.cos(ang)) / w
        pts[1:, 1] = (cy + ry * np.sin(ang)) / h
        return pts

    def detect(self, rgb: np.ndarray) -> Detection:
        h, w = rgb.shape[:2]
        r = rgb[:, :, 0].astype(np.int32)
        g = rgb[:, :, 1].astype(np.int32)
        b = rgb[:, :, 2].astype(np.int32)
        red = (r > 180) & (g < 90) & (b < 90)
        green = (g > 180) & (r < 90) & (b < 90)
        white = (r > 180) & (g > 180) & (b > 180)

        left = self._box_of(red)
        right = self._box_of(green)
        face = self._box_of(white)
        return Detection(
            left_hand=self._hand_grid(left, w, h) if left else None,
            right_hand=self._hand_grid(right, w, h) if right else None,
            face=self._face_points(face, w, h) if face else None,
        )

    def close(self):
        pass


ENGINES = {"mediapipe": MediaPipeEngine, "blob": BlobMarkerEngine}


def make_engine(name: str):
    if name not in ENGINES:
        raise ValueError(f"unknown engine {name!r}; expected one of {sorted(ENGINES)}")
    return ENGINES[name]()
