"""Fuse heatmaps and offsets into activation maps and read out poses.

Every grid point ``j`` votes for the location ``x_j + F_k(x_j)`` with weight
``h_k(x_j) / (pi R^2)``. The vote is splatted bilinearly onto the (up to)
four grid points around its target; splat weights landing off the grid are
dropped.
"""

from __future__ import annotations

import math
from typing import Hashable

import numpy as np

from .errors import InvalidInputError
from .geometry import Box, CropTransform
from .poses import PoseDetection


def _validate_stacks(heatmaps: np.ndarray, offsets: np.ndarray) -> None:
    if heatmaps.ndim != 3:
        raise InvalidInputError(f"heatmaps must be (K, H, W), got shape {heatmaps.shape}")
    k, h, w = heatmaps.shape
    if offsets.shape != (2 * k, h, w):
        raise InvalidInputError(
            f"offsets must have shape {(2 * k, h, w)} to match heatmaps, got {offsets.shape}"
        )


try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _splat_numpy(heatmaps: np.ndarray, offsets: np.ndarray, area: float) -> np.ndarray:
    k, h, w = heatmaps.shape
    # zero-weight voters contribute nothing; skipping them keeps sparse maps cheap
    flat_h = heatmaps.reshape(-1)
    voters = np.flatnonzero(flat_h)
    kk, pix = np.divmod(voters, h * w)
    rr, cc = np.divmod(pix, w)
    flat_off = offsets.reshape(2 * k, h * w)
    weight = flat_h[voters].astype(np.float64) / area
    tx = cc + flat_off[2 * kk, pix].astype(np.float64)
    ty = rr + flat_off[2 * kk + 1, pix].astype(np.float64)
    if not (np.all(np.isfinite(tx)) and np.all(np.isfinite(ty))):
        raise InvalidInputError("offsets must be finite where heatmaps are non-zero")

    x0 = np.floor(tx)
    y0 = np.floor(ty)
    # a vote touches the grid iff its 2x2 footprint overlaps it
    live = (x0 >= -1) & (x0 < w) & (y0 >= -1) & (y0 < h)
    x0, y0, tx, ty, kk, weight = x0[live], y0[live], tx[live], ty[live], kk[live], weight[live]
    fx = tx - x0
    fy = ty - y0

    # splat into a grid padded by one cell per side, then drop the border
    hp, wp = h + 2, w + 2
    base = (kk * hp + (y0.astype(np.int64) + 1)) * wp + (x0.astype(np.int64) + 1)
    wy0 = weight * (1.0 - fy)
    wy1 = weight * fy
    idx = np.concatenate([base, base + 1, base + wp, base + wp + 1])
    wts = np.concatenate([wy0 * (1.0 - fx), wy0 * fx, wy1 * (1.0 - fx), wy1 * fx])
    padded = np.bincount(idx, weights=wts, minlength=k * hp * wp).reshape(k, hp, wp)
    return np.ascontiguousarray(padded[:, 1:-1, 1:-1])


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _splat_kernel(heatmaps, offsets, area, out):
        kn, h, w = heatmaps.shape
        for k in range(kn):
            for r in range(h):
                for c in range(w):
                    v = heatmaps[k, r, c]
                    if v == 0:
                        continue
                    tx = c + np.float64(offsets[2 * k, r, c])
                    ty = r + np.float64(offsets[2 * k + 1, r, c])
                    if not (np.isfinite(tx) and np.isfinite(ty)):
                        return False
                    x0 = np.floor(tx)
                    y0 = np.floor(ty)
                    if x0 < -1 or x0 >= w or y0 < -1 or y0 >= h:
                        continue
                    fx = tx - x0
                    fy = ty - y0
                    wgt = np.float64(v) / area
                    xi = np.int64(x0)
                    yi = np.int64(y0)
                    if yi >= 0:
                        if xi >= 0:
                            out[k, yi, xi] += wgt * (1.0 - fy) * (1.0 - fx)
                        if xi + 1 < w:
                            out[k, yi, xi + 1] += wgt * (1.0 - fy) * fx
                    if yi + 1 < h:
                        if xi >= 0:
                            out[k, yi + 1, xi] += wgt * fy * (1.0 - fx)
                        if xi + 1 < w:
                            out[k, yi + 1, xi + 1] += wgt * fy * fx
        return True


def _splat_numba(heatmaps: np.ndarray, offsets: np.ndarray, area: float) -> np.ndarray:
    out = np.zeros(heatmaps.shape, dtype=np.float64)
    if not _splat_kernel(np.ascontiguousarray(heatmaps), np.ascontiguousarray(offsets), area, out):
        raise InvalidInputError("offsets must be finite where heatmaps are non-zero")
    return out


def aggregate(
    heatmaps: np.ndarray, offsets: np.ndarray, radius: float, backend: str = "auto"
) -> np.ndarray:
    """Hough-vote heatmaps along offsets into ``(K, H, W)`` activation maps.

    ``backend`` is ``"numba"`` (compiled sequential loop), ``"numpy"``
    (vectorised scatter through ``np.bincount``) or ``"auto"``. Both visit
    votes in a fixed order, so each is deterministic; they agree to
    floating-point summation order.
    """
    heatmaps = np.asarray(heatmaps)
    offsets = np.asarray(offsets)
    _validate_stacks(heatmaps, offsets)
    if not radius > 0:
        raise InvalidInputError(f"disk radius must be positive, got {radius}")
    area = math.pi * radius * radius
    if backend == "auto":
        backend = "numba" if numba is not None else "numpy"
    if backend == "numba":
        return _splat_numba(heatmaps, offsets, area)
    if backend == "numpy":
        return _splat_numpy(heatmaps, offsets, area)
    raise InvalidInputError(f"unknown backend {backend!r}")


def localize(activations: np.ndarray, transform: CropTransform) -> tuple[np.ndarray, np.ndarray]:
    """Per channel argmax, mapped back to image pixels.

    Ties go to the smallest row-major grid index, so an all-zero channel
    lands on crop pixel ``(0, 0)`` with score 0.
    """
    f = np.asarray(activations)
    k, _, w = f.shape
    flat = f.reshape(k, -1)
    best = np.argmax(flat, axis=1)
    scores = flat[np.arange(k), best]
    grid = np.stack([best % w, best // w], axis=1).astype(np.float64)
    return transform.crop_to_image(grid), scores.astype(np.float64)


def rescore(activations: np.ndarray) -> float:
    """Instance confidence: per-keypoint peak activation, averaged over keypoints."""
    f = np.asarray(activations)
    return float(np.mean(f.reshape(f.shape[0], -1).max(axis=1)))


def decode_crop(
    heatmaps: np.ndarray,
    offsets: np.ndarray,
    transform: CropTransform,
    radius: float,
    box: Box,
    image_id: Hashable,
) -> PoseDetection:
    expected = transform.shape
    if np.shape(heatmaps)[1:] != expected:
        raise InvalidInputError(
            f"tensor grid {np.shape(heatmaps)[1:]} does not match crop grid {expected}"
        )
    f = aggregate(heatmaps, offsets, radius)
    keypoints, scores = localize(f, transform)
    return PoseDetection(
        keypoints=keypoints,
        keypoint_scores=scores,
        instance_score=rescore(f),
        box=box,
        image_id=image_id,
    )
