"""Object keypoint similarity (OKS).

    OKS = sum_k exp(-d_k^2 / (2 s^2 kappa_k^2)) [v_k > 0] / sum_k [v_k > 0]

``s^2`` is the reference object's area and ``kappa_k`` a per-keypoint
falloff. The COCO toolkit publishes per-keypoint sigmas and evaluates with
``(2 sigma)^2`` in the denominator, so the default falloffs are twice the
published sigmas; that reproduces COCO's numbers exactly.
"""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from .errors import InvalidInputError, UndefinedSimilarityError
from .poses import NUM_KEYPOINTS, Pose, PoseDetection

# published COCO sigmas, in KEYPOINT_NAMES order
COCO_SIGMAS = np.array(
    [
        0.026,
        0.025, 0.025,
        0.035, 0.035,
        0.079, 0.079,
        0.072, 0.072,
        0.062, 0.062,
        0.107, 0.107,
        0.087, 0.087,
        0.089, 0.089,
    ]
)
DEFAULT_KAPPAS = 2.0 * COCO_SIGMAS


def as_kappas(kappas: Optional[np.ndarray]) -> np.ndarray:
    """Validate a falloff table, substituting the COCO default for None."""
    if kappas is None:
        return DEFAULT_KAPPAS
    arr = np.asarray(kappas, dtype=np.float64)
    if arr.shape != (NUM_KEYPOINTS,):
        raise InvalidInputError(f"kappa table needs {NUM_KEYPOINTS} entries, got shape {arr.shape}")
    if not np.all(arr > 0):
        raise InvalidInputError("kappa constants must be positive")
    return arr


def oks_arrays(
    cand_xy: np.ndarray,
    ref_xy: np.ndarray,
    visible: np.ndarray,
    area: float,
    kappas: np.ndarray,
) -> float:
    """OKS from raw arrays: ``(K, 2)`` points, ``(K,)`` visibility mask."""
    if not area > 0:
        raise InvalidInputError(f"reference area must be positive, got {area}")
    vis = np.asarray(visible, dtype=bool)
    n = int(np.count_nonzero(vis))
    if n == 0:
        raise UndefinedSimilarityError("reference pose has no labeled keypoints")
    d2 = np.sum((np.asarray(cand_xy)[vis] - np.asarray(ref_xy)[vis]) ** 2, axis=1)
    sim = np.exp(-d2 / (2.0 * area * kappas[vis] ** 2))
    return float(np.sum(sim) / n)


def _xy(pose: Union[Pose, PoseDetection, np.ndarray]) -> np.ndarray:
    if isinstance(pose, Pose):
        return pose.xy
    if isinstance(pose, PoseDetection):
        return pose.keypoints
    return np.asarray(pose, dtype=np.float64)[:, :2]


def oks(
    candidate: Union[PoseDetection, Pose, np.ndarray],
    reference: Pose,
    kappas: Optional[np.ndarray] = None,
) -> float:
    """Similarity of ``candidate`` to an annotated ``reference`` pose, in [0, 1]."""
    return oks_arrays(_xy(candidate), reference.xy, reference.visible, reference.area, as_kappas(kappas))


def oks_between_detections(
    a: PoseDetection, b: PoseDetection, kappas: Optional[np.ndarray] = None
) -> float:
    """OKS of ``a`` against ``b``, with ``b``'s box area as scale and every keypoint counted.

    In NMS ``b`` is the already-kept, higher-scoring detection.
    """
    area = b.box.area
    if not area > 0:
        raise InvalidInputError(f"degenerate reference box area {area}")
    return oks_arrays(
        a.keypoints, b.keypoints, np.ones(NUM_KEYPOINTS, dtype=bool), area, as_kappas(kappas)
    )
