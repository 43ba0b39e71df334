"""Ground-truth poses and decoded pose detections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

from .errors import InvalidInputError
from .geometry import Box

NUM_KEYPOINTS = 17

KEYPOINT_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


@dataclass(eq=False)
class Pose:
    """An annotated person.

    ``keypoints`` is ``(K, 3)`` with rows ``(x, y, v)`` in image pixels,
    ``v`` in {0, 1, 2}. Rows with ``v == 0`` carry no position.
    ``area`` is the object segment area used as the OKS scale ``s**2``.
    """

    keypoints: np.ndarray
    area: float
    image_id: Hashable
    bbox: Optional[Box] = None
    ignore: bool = False
    id: Optional[int] = None

    def __post_init__(self) -> None:
        kp = np.asarray(self.keypoints, dtype=np.float64)
        if kp.shape != (NUM_KEYPOINTS, 3):
            raise InvalidInputError(
                f"pose needs {NUM_KEYPOINTS} keypoint triples, got array of shape {kp.shape}"
            )
        if not np.all(np.isin(kp[:, 2], (0, 1, 2))):
            raise InvalidInputError("visibility flags must be 0, 1 or 2")
        if not np.all(np.isfinite(kp[kp[:, 2] > 0, :2])):
            raise InvalidInputError("labeled keypoints must have finite coordinates")
        if not self.area > 0:
            raise InvalidInputError(f"pose area must be positive, got {self.area}")
        self.keypoints = kp

    @property
    def xy(self) -> np.ndarray:
        return self.keypoints[:, :2]

    @property
    def visible(self) -> np.ndarray:
        return self.keypoints[:, 2] > 0

    @property
    def num_labeled(self) -> int:
        return int(np.count_nonzero(self.visible))

    def keypoint_box(self) -> Optional[Box]:
        """Tight box around the labeled keypoints, or None if it is degenerate."""
        if self.num_labeled == 0:
            return None
        pts = self.xy[self.visible]
        x0, y0 = pts.min(axis=0)
        x1, y1 = pts.max(axis=0)
        if x1 <= x0 or y1 <= y0:
            return None
        return Box.from_xyxy(float(x0), float(y0), float(x1), float(y1))


@dataclass(eq=False)
class PoseDetection:
    keypoints: np.ndarray  # (K, 2) image px
    keypoint_scores: np.ndarray  # (K,)
    instance_score: float
    box: Box
    image_id: Hashable
    extras: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        self.keypoint_scores = np.asarray(self.keypoint_scores, dtype=np.float64)
        if self.keypoints.shape != (NUM_KEYPOINTS, 2):
            raise InvalidInputError(f"detection keypoints must be (17, 2), got {self.keypoints.shape}")
        if self.keypoint_scores.shape != (NUM_KEYPOINTS,):
            raise InvalidInputError("detection needs one score per keypoint")
        if not np.all(np.isfinite(self.keypoints)):
            raise InvalidInputError("detection keypoints must be finite")
        if not np.all(np.isfinite(self.keypoint_scores)) or np.any(self.keypoint_scores < 0):
            raise InvalidInputError("keypoint scores must be finite and non-negative")
        s = float(self.instance_score)
        if not (np.isfinite(s) and s >= 0):
            raise InvalidInputError(f"instance score must be finite and >= 0, got {s}")
        self.instance_score = s

    @property
    def score(self) -> float:
        return self.instance_score

    def keypoint_area(self) -> float:
        """Area of the tight box around the predicted keypoints (COCO results convention)."""
        x0, y0 = self.keypoints.min(axis=0)
        x1, y1 = self.keypoints.max(axis=0)
        return float((x1 - x0) * (y1 - y0))
