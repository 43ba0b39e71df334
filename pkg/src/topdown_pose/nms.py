"""Greedy non-maximum suppression on boxes (IoU) and on poses (OKS)."""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

from .errors import InvalidInputError
from .geometry import Box, iou
from .oks import as_kappas, oks_between_detections
from .poses import PoseDetection

IOU_NMS_THRESHOLD = 0.6
OKS_NMS_THRESHOLD = 0.5

T = TypeVar("T")


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"NMS threshold must be in [0, 1], got {threshold}")


def score_order(scores: Sequence[float]) -> list[int]:
    """Indices sorted by descending score; ties keep input order."""
    return sorted(range(len(scores)), key=lambda i: -scores[i])


def greedy_nms(
    items: Sequence[T],
    scores: Sequence[float],
    overlap: Callable[[T, T], float],
    threshold: float,
    group: Optional[Callable[[T], object]] = None,
) -> list[int]:
    """Indices of the items surviving greedy suppression, in descending score order.

    ``overlap(candidate, kept)`` is evaluated with the kept item second.
    A candidate is dropped iff its overlap with some kept item in the same
    group exceeds ``threshold``.
    """
    _check_threshold(threshold)
    kept_by_group: dict[object, list[T]] = defaultdict(list)
    keep = []
    for i in score_order(scores):
        cand = items[i]
        kept = kept_by_group[group(cand) if group else None]
        if any(overlap(cand, other) > threshold for other in kept):
            continue
        kept.append(cand)
        keep.append(i)
    return keep


def box_nms_indices(boxes: Sequence[Box], threshold: float = IOU_NMS_THRESHOLD) -> list[int]:
    return greedy_nms(boxes, [b.score for b in boxes], iou, threshold)


def box_nms(boxes: Sequence[Box], threshold: float = IOU_NMS_THRESHOLD) -> list[Box]:
    """Greedy IoU suppression by ``Box.score``."""
    return [boxes[i] for i in box_nms_indices(boxes, threshold)]


def oks_nms(
    dets: Sequence[PoseDetection],
    threshold: float = OKS_NMS_THRESHOLD,
    kappas: Optional[np.ndarray] = None,
) -> list[PoseDetection]:
    """Greedy OKS suppression by instance score; detections only interact within an image."""
    kappas = as_kappas(kappas)
    keep = greedy_nms(
        dets,
        [d.instance_score for d in dets],
        lambda a, b: oks_between_detections(a, b, kappas),
        threshold,
        group=lambda d: d.image_id,
    )
    return [dets[i] for i in keep]
