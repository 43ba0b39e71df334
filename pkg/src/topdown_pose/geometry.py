"""Person boxes and the image <-> crop coordinate algebra.

Coordinates are continuous. Pixel centers sit at integer coordinates, so
crop pixel ``(col, row)`` covers ``[col - 0.5, col + 0.5) x [row - 0.5, row + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError

CROP_WIDTH = 257
CROP_HEIGHT = 353
EVAL_RESCALE = 1.25


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in image pixels with a detector score."""

    x_min: float
    y_min: float
    width: float
    height: float
    score: float = 1.0

    def __post_init__(self) -> None:
        vals = (self.x_min, self.y_min, self.width, self.height, self.score)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidInputError(f"non-finite box: {self}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError(
                f"box dimensions must be positive, got {self.width}x{self.height}"
            )
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInputError(f"box score must be in [0, 1], got {self.score}")

    @classmethod
    def from_xyxy(cls, x0: float, y0: float, x1: float, y1: float, score: float = 1.0) -> Box:
        return cls(x0, y0, x1 - x0, y1 - y0, score)

    @property
    def x_max(self) -> float:
        return self.x_min + self.width

    @property
    def y_max(self) -> float:
        return self.y_min + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + 0.5 * self.width, self.y_min + 0.5 * self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_xywh(self) -> list[float]:
        return [self.x_min, self.y_min, self.width, self.height]


def _recentered(box: Box, width: float, height: float) -> Box:
    cx, cy = box.center
    return replace(box, x_min=cx - 0.5 * width, y_min=cy - 0.5 * height, width=width, height=height)


def fix_aspect(box: Box, target_hw_ratio: float) -> Box:
    """Grow one side of ``box`` about its center until height/width == ratio.

    Never shrinks. A box already at the ratio (to 1e-12 relative) is
    returned unchanged, which makes the operation idempotent.
    """
    if not target_hw_ratio > 0:
        raise InvalidInputError(f"target ratio must be positive, got {target_hw_ratio}")
    ratio = box.height / box.width
    if abs(ratio - target_hw_ratio) <= 1e-12 * target_hw_ratio:
        return box
    if ratio < target_hw_ratio:
        return _recentered(box, box.width, box.width * target_hw_ratio)
    return _recentered(box, box.height / target_hw_ratio, box.height)


def rescale_box(box: Box, factor: float) -> Box:
    if not factor > 0:
        raise InvalidInputError(f"rescale factor must be positive, got {factor}")
    if factor == 1.0:
        return box
    return _recentered(box, box.width * factor, box.height * factor)


@dataclass(frozen=True)
class CropTransform:
    """Per-axis affine map from image pixels onto the fixed crop grid.

    ``scale`` is crop pixels per image pixel and is identical on both axes.
    """

    source_box: Box
    crop_width: int = CROP_WIDTH
    crop_height: int = CROP_HEIGHT

    def __post_init__(self) -> None:
        if self.crop_width <= 0 or self.crop_height <= 0:
            raise InvalidInputError("crop size must be positive")
        sx = self.crop_width / self.source_box.width
        sy = self.crop_height / self.source_box.height
        if abs(sx - sy) > 1e-9 * sx:
            raise InvalidInputError(
                f"source box aspect {self.source_box.height / self.source_box.width:.12g} "
                f"does not match crop aspect {self.crop_height / self.crop_width:.12g}"
            )

    @property
    def scale(self) -> float:
        return self.crop_width / self.source_box.width

    @property
    def shape(self) -> tuple[int, int]:
        """Grid shape as ``(rows, cols)``."""
        return (self.crop_height, self.crop_width)

    def image_to_crop(self, points: np.ndarray) -> np.ndarray:
        """Map ``(..., 2)`` image points (x, y) into crop pixels."""
        p = np.asarray(points, dtype=np.float64)
        origin = np.array([self.source_box.x_min, self.source_box.y_min])
        return (p - origin) * self.scale

    def crop_to_image(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        origin = np.array([self.source_box.x_min, self.source_box.y_min])
        return p / self.scale + origin


def make_crop_transform(
    box: Box,
    crop_w: int = CROP_WIDTH,
    crop_h: int = CROP_HEIGHT,
    rescale: float = EVAL_RESCALE,
) -> CropTransform:
    """Aspect-fix ``box`` to the crop shape, enlarge it for context, wrap as a transform."""
    if crop_w <= 0 or crop_h <= 0:
        raise InvalidInputError(f"crop size must be positive, got {crop_w}x{crop_h}")
    source = rescale_box(fix_aspect(box, crop_h / crop_w), rescale)
    return CropTransform(source, crop_w, crop_h)


def image_to_crop(p: np.ndarray, transform: CropTransform) -> np.ndarray:
    return transform.image_to_crop(p)


def crop_to_image(p: np.ndarray, transform: CropTransform) -> np.ndarray:
    return transform.crop_to_image(p)


def iou(a: Box, b: Box) -> float:
    # areas from the same corner coordinates as the intersection, so that
    # identical boxes give exactly 1 despite x_min + width rounding
    ax1, ay1, bx1, by1 = a.x_max, a.y_max, b.x_max, b.y_max
    iw = min(ax1, bx1) - max(a.x_min, b.x_min)
    ih = min(ay1, by1) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax1 - a.x_min) * (ay1 - a.y_min)
    area_b = (bx1 - b.x_min) * (by1 - b.y_min)
    return min(1.0, inter / (area_a + area_b - inter))
