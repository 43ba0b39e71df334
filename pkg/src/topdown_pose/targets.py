"""Heatmap/offset training targets, loss masks, and loss evaluation.

Tensor layouts (crop grid with ``H`` rows and ``W`` columns):

* heatmaps: ``(K, H, W)``, probabilities in [0, 1]
* offsets: ``(2K, H, W)``, channel ``2k`` is the x offset of keypoint ``k``
  and channel ``2k + 1`` its y offset, in crop pixels
* masks: ``(K, H, W)`` booleans, True where a position enters the loss
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import CropTransform
from .poses import NUM_KEYPOINTS, Pose

DISK_RADIUS = 25.0
HUBER_DELTA = 1.0
LAMBDA_HEATMAP = 4.0
LAMBDA_OFFSET = 1.0
PROB_EPS = 1e-12


def disk_windows(
    points: np.ndarray, visible: np.ndarray, radius: float, shape: tuple[int, int]
) -> Iterator[tuple[int, slice, slice, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield, per visible keypoint, the grid window covering its closed disk.

    Each item is ``(k, rows, cols, inside, off_x, off_y)`` where ``inside``
    marks window cells with ``||x_i - l_k|| <= radius`` and ``off_*`` hold
    ``l_k - x_i`` over the window. Keypoints whose disk misses the grid
    are skipped.
    """
    h, w = shape
    r2 = radius * radius
    for k in range(points.shape[0]):
        if not visible[k]:
            continue
        lx, ly = float(points[k, 0]), float(points[k, 1])
        c0 = max(0, math.ceil(lx - radius))
        c1 = min(w - 1, math.floor(lx + radius))
        r0 = max(0, math.ceil(ly - radius))
        r1 = min(h - 1, math.floor(ly + radius))
        if c0 > c1 or r0 > r1:
            continue
        cols = np.arange(c0, c1 + 1, dtype=np.float64)
        rows = np.arange(r0, r1 + 1, dtype=np.float64)
        off_x = np.broadcast_to(lx - cols, (rows.size, cols.size))
        off_y = np.broadcast_to((ly - rows)[:, None], (rows.size, cols.size))
        inside = off_x * off_x + off_y * off_y <= r2
        yield k, slice(r0, r1 + 1), slice(c0, c1 + 1), inside, off_x, off_y


def _check_pose(pose: Pose) -> None:
    if np.shape(pose.keypoints) != (NUM_KEYPOINTS, 3):
        raise InvalidInputError(f"expected {NUM_KEYPOINTS} keypoints, got {np.shape(pose.keypoints)}")


def make_targets(
    fg: Pose,
    bg: Sequence[Pose],
    transform: CropTransform,
    radius: float = DISK_RADIUS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Build ``(heatmaps, offsets, final_mask, intermediate_mask)`` for one crop.

    Only the foreground person's disks are positive. The final-layer mask
    keeps every position; the intermediate-layer mask drops positions inside
    the disks of background people's keypoints (per keypoint channel).
    Unlabeled (v=0) foreground keypoints give all-zero channels.
    """
    if not radius > 0:
        raise InvalidInputError(f"disk radius must be positive, got {radius}")
    _check_pose(fg)
    for p in bg:
        _check_pose(p)

    shape = transform.shape
    heat = np.zeros((NUM_KEYPOINTS, *shape))
    offsets = np.zeros((2 * NUM_KEYPOINTS, *shape))
    final_mask = np.ones((NUM_KEYPOINTS, *shape), dtype=bool)
    inter_mask = np.ones((NUM_KEYPOINTS, *shape), dtype=bool)

    pts = transform.image_to_crop(fg.xy)
    for k, rows, cols, inside, ox, oy in disk_windows(pts, fg.visible, radius, shape):
        heat[k, rows, cols][inside] = 1.0
        offsets[2 * k, rows, cols][inside] = ox[inside]
        offsets[2 * k + 1, rows, cols][inside] = oy[inside]

    for person in bg:
        bpts = transform.image_to_crop(person.xy)
        for k, rows, cols, inside, _, _ in disk_windows(bpts, person.visible, radius, shape):
            inter_mask[k, rows, cols][inside] = False

    return heat, offsets, final_mask, inter_mask


def huber(u, delta: float = HUBER_DELTA):
    """Huber penalty of a non-negative residual norm ``u``.

    Quadratic ``u**2 / 2`` up to ``delta``, linear ``delta * (u - delta / 2)`` beyond.
    Accepts scalars or arrays.
    """
    if not delta > 0:
        raise InvalidInputError(f"huber delta must be positive, got {delta}")
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise InvalidInputError("huber is defined for u >= 0")
    out = np.where(arr <= delta, 0.5 * arr * arr, delta * (arr - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def heatmap_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """Summed per-position logistic loss over masked-in entries."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise InvalidInputError(
            f"shape mismatch: pred {pred.shape}, target {target.shape}, mask {mask.shape}"
        )
    p = np.clip(pred[mask], PROB_EPS, 1.0 - PROB_EPS)
    t = target[mask]
    return float(-np.sum(t * np.log(p) + (1.0 - t) * np.log1p(-p)))


def offset_loss(
    pred: np.ndarray,
    fg: Pose,
    transform: CropTransform,
    radius: float = DISK_RADIUS,
    delta: float = HUBER_DELTA,
) -> float:
    """Huber loss of predicted offsets over each labeled keypoint's disk."""
    if not radius > 0:
        raise InvalidInputError(f"disk radius must be positive, got {radius}")
    _check_pose(fg)
    pred = np.asarray(pred, dtype=np.float64)
    expected = (2 * NUM_KEYPOINTS, *transform.shape)
    if pred.shape != expected:
        raise InvalidInputError(f"offset stack must have shape {expected}, got {pred.shape}")

    total = 0.0
    pts = transform.image_to_crop(fg.xy)
    for k, rows, cols, inside, ox, oy in disk_windows(pts, fg.visible, radius, transform.shape):
        ex = pred[2 * k, rows, cols][inside] - ox[inside]
        ey = pred[2 * k + 1, rows, cols][inside] - oy[inside]
        total += float(np.sum(huber(np.hypot(ex, ey), delta)))
    return total


def total_loss(
    heatmap_loss: float,
    offset_loss: float,
    lambda_h: float = LAMBDA_HEATMAP,
    lambda_o: float = LAMBDA_OFFSET,
) -> float:
    if heatmap_loss < 0 or offset_loss < 0:
        raise InvalidInputError("losses must be non-negative")
    return lambda_h * heatmap_loss + lambda_o * offset_loss

