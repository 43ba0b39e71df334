"""Synthetic stand-in for the person detector and the pose network.

Random draws come from numpy's PCG64 generator, except offset noise, which
is a SplitMix64 counter-based field keyed by a PCG64 draw. Each image (and
each crop within it) draws from its own substream keyed on ``(seed,
image_id, ...)``, so outputs do not depend on processing order or batch
composition.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Hashable, Optional, Sequence

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

from .errors import InvalidInputError
from .formats import AnnotationSet, parse_annotations
from .geometry import Box, CropTransform
from .poses import NUM_KEYPOINTS, Pose
from .targets import DISK_RADIUS, make_targets

PROPOSAL_SCORE_FLOOR = 0.3


@dataclass(frozen=True)
class NoiseConfig:
    """Corruption knobs for the synthetic networks.

    heatmap_flip_prob: per-pixel probability of complementing the binary heatmap.
    offset_sigma: std-dev (crop px) of Gaussian noise added to every offset.
    box_jitter: corner displacement bound, as a fraction of box width/height.
    duplicate_rate: mean number of extra (jittered) copies of gt boxes per image.
    """

    heatmap_flip_prob: float = 0.0
    offset_sigma: float = 0.0
    box_jitter: float = 0.0
    duplicate_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.heatmap_flip_prob <= 1.0:
            raise InvalidInputError("heatmap_flip_prob must be in [0, 1]")
        if self.offset_sigma < 0 or self.box_jitter < 0 or self.duplicate_rate < 0:
            raise InvalidInputError("noise magnitudes must be non-negative")


def _key(part: Hashable) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    return zlib.crc32(repr(part).encode("utf-8"))


def substream(seed: int, *parts: Hashable) -> np.random.Generator:
    """Independent generator for ``(seed, *parts)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([_key(seed), *map(_key, parts)])))


def oracle_tensors(
    pose: Pose, transform: CropTransform, radius: float = DISK_RADIUS
) -> tuple[np.ndarray, np.ndarray]:
    """Perfect network output for a crop: the training targets with no background people."""
    heat, off, _, _ = make_targets(pose, [], transform, radius)
    return heat, off


def empty_pose(image_id: Hashable = None) -> Pose:
    """A pose with no labeled keypoints; its oracle tensors are all zero."""
    return Pose(np.zeros((NUM_KEYPOINTS, 3)), area=1.0, image_id=image_id)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _counter_normal_numpy(base: np.uint64, index: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        i = np.asarray(index, dtype=np.uint64) * np.uint64(2) + base
        a = _splitmix64(i)
        b = _splitmix64(i + np.uint64(1))
    u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (b >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


if numba is not None:

    @numba.njit(cache=True, nogil=True)
    def _mix(x):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @numba.njit(cache=True, nogil=True)
    def _counter_normal_kernel(base, index, out):
        scale = 2.0**-53
        for n in range(index.size):
            i = np.uint64(index[n]) * np.uint64(2) + base
            a = _mix(i)
            b = _mix(i + np.uint64(1))
            u1 = (np.float64(a >> np.uint64(11)) + 1.0) * scale
            u2 = np.float64(b >> np.uint64(11)) * scale
            out[n] = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    @numba.njit(cache=True, nogil=True)
    def _add_voter_noise_kernel(heat, off, base, sigma):
        kn, h, w = heat.shape
        scale = 2.0**-53
        for k in range(kn):
            for r in range(h):
                for c in range(w):
                    if heat[k, r, c] == 0:
                        continue
                    for ch in (2 * k, 2 * k + 1):
                        i = np.uint64((ch * h + r) * w + c) * np.uint64(2) + base
                        a = _mix(i)
                        b = _mix(i + np.uint64(1))
                        u1 = (np.float64(a >> np.uint64(11)) + 1.0) * scale
                        u2 = np.float64(b >> np.uint64(11)) * scale
                        off[ch, r, c] += sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def counter_normal(key: int, index: np.ndarray, backend: str = "auto") -> np.ndarray:
    """Standard normal deviates that depend only on ``(key, index)``.

    SplitMix64 hashes of ``2 * index`` and ``2 * index + 1`` give two
    53-bit uniforms, combined with the Box-Muller transform. Any subset of
    indices can be evaluated without generating the rest.
    """
    with np.errstate(over="ignore"):
        base = _splitmix64(np.array([key], dtype=np.uint64))[0]
    index = np.ascontiguousarray(index, dtype=np.int64)
    if backend == "auto":
        backend = "numba" if numba is not None else "numpy"
    if backend == "numba":
        out = np.empty(index.shape, dtype=np.float64)
        _counter_normal_kernel(base, index.reshape(-1), out.reshape(-1))
        return out
    if backend == "numpy":
        return _counter_normal_numpy(base, index)
    raise InvalidInputError(f"unknown backend {backend!r}")


def perturb(
    heatmaps: np.ndarray,
    offsets: np.ndarray,
    cfg: NoiseConfig,
    rng: Optional[np.random.Generator] = None,
    voting_only: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Flip heatmap pixels and add Gaussian offset noise.

    Flips are drawn from ``rng``; offset noise is a counter-based field keyed
    by one draw from ``rng``, so its value at an element does not depend on
    which other elements are evaluated. With ``voting_only`` the noise is
    added only where the perturbed heatmap is non-zero, the only entries
    :func:`aggregate` reads; decoding then matches the full perturbation.

    Inputs are never modified; a stack left untouched by ``cfg`` is returned as is.
    """
    if rng is None:
        rng = substream(cfg.seed)
    heat, off = heatmaps, offsets
    if cfg.heatmap_flip_prob > 0:
        flip = rng.random(np.shape(heat)) < cfg.heatmap_flip_prob
        heat = np.where(flip, 1.0 - heat, heat)
    if cfg.offset_sigma > 0:
        key = int(rng.integers(0, 2**63))
        off = np.array(off, dtype=np.float64, copy=True)
        if voting_only and numba is not None:
            with np.errstate(over="ignore"):
                base = _splitmix64(np.array([key], dtype=np.uint64))[0]
            _add_voter_noise_kernel(np.ascontiguousarray(heat), off, base, float(cfg.offset_sigma))
            return heat, off
        flat = off.reshape(-1)
        if voting_only:
            k, h, w = np.shape(heat)
            voters = np.flatnonzero(np.asarray(heat).reshape(-1))
            kk, pix = np.divmod(voters, h * w)
            idx = np.concatenate([2 * kk * h * w + pix, (2 * kk + 1) * h * w + pix])
        else:
            idx = np.arange(flat.size)
        flat[idx] += cfg.offset_sigma * counter_normal(key, idx)
    return heat, off


def ground_truth_box(pose: Pose) -> Optional[Box]:
    """Stored annotation box if present, else the tight keypoint box."""
    return pose.bbox if pose.bbox is not None else pose.keypoint_box()


def _jitter(box: Box, amount: float, rng: np.random.Generator) -> tuple[Box, float]:
    """Displace each corner by up to ``amount`` of the box size; also return mean |displacement|."""
    u = rng.uniform(-1.0, 1.0, size=4)
    x0 = box.x_min + u[0] * amount * box.width
    y0 = box.y_min + u[1] * amount * box.height
    x1 = box.x_max + u[2] * amount * box.width
    y1 = box.y_max + u[3] * amount * box.height
    # keep a sliver of width/height when corners cross
    x0, x1 = min(x0, x1), max(x0, x1, min(x0, x1) + 1e-3 * box.width)
    y0, y1 = min(y0, y1), max(y0, y1, min(y0, y1) + 1e-3 * box.height)
    return Box.from_xyxy(x0, y0, x1, y1), float(np.mean(np.abs(u)))


def jitter_boxes(
    gts: Sequence[Pose], cfg: NoiseConfig, rng: Optional[np.random.Generator] = None
) -> list[Box]:
    """Synthetic detector output for one image.

    One box per ground truth with a usable box, corners jittered; detector
    score is ``1 - 0.7 * mean|corner displacement|`` (1.0 without jitter).
    Then ``Poisson(duplicate_rate)`` extra jittered copies of random gt
    boxes with scores uniform in (0.3, 1]. Every score clears the 0.3
    proposal threshold.
    """
    if rng is None:
        rng = substream(cfg.seed)
    bases = [b for b in (ground_truth_box(p) for p in gts) if b is not None]
    span = 1.0 - PROPOSAL_SCORE_FLOOR
    out = []
    for base in bases:
        if cfg.box_jitter > 0:
            box, m = _jitter(base, cfg.box_jitter, rng)
            out.append(Box(box.x_min, box.y_min, box.width, box.height, 1.0 - span * min(m, 0.999)))
        else:
            out.append(Box(base.x_min, base.y_min, base.width, base.height, 1.0))
    if bases and cfg.duplicate_rate > 0:
        for _ in range(int(rng.poisson(cfg.duplicate_rate))):
            base = bases[int(rng.integers(len(bases)))]
            if cfg.box_jitter > 0:
                base, _ = _jitter(base, cfg.box_jitter, rng)
            score = 1.0 - span * float(rng.random())
            out.append(Box(base.x_min, base.y_min, base.width, base.height, score))
    return out


# standing person, facing the camera: (x, y) in units of body height,
# x relative to the body midline, y down from the top of the head
_TEMPLATE = np.array(
    [
        [0.000, 0.060],
        [0.022, 0.045], [-0.022, 0.045],
        [0.048, 0.058], [-0.048, 0.058],
        [0.110, 0.190], [-0.110, 0.190],
        [0.150, 0.340], [-0.150, 0.340],
        [0.165, 0.470], [-0.165, 0.470],
        [0.075, 0.520], [-0.075, 0.520],
        [0.080, 0.730], [-0.080, 0.730],
        [0.080, 0.950], [-0.080, 0.950],
    ]
)


def synthetic_person(
    rng: np.random.Generator, image_id: Hashable, x: float, y: float, height: float, ann_id: int
) -> Pose:
    """A randomly articulated person whose head top sits at (x, y)."""
    pts = _TEMPLATE + rng.normal(0.0, 0.012, size=_TEMPLATE.shape)
    # swing each forearm about its elbow
    for elbow, wrist in ((7, 9), (8, 10)):
        angle = rng.uniform(-0.9, 0.9)
        v = pts[wrist] - pts[elbow]
        c, s = np.cos(angle), np.sin(angle)
        pts[wrist] = pts[elbow] + [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    xy = pts * height + [x, y]
    kp = np.concatenate([xy, np.full((NUM_KEYPOINTS, 1), 2.0)], axis=1)
    pad = 0.06 * height
    x0, y0 = xy.min(axis=0) - pad
    x1, y1 = xy.max(axis=0) + pad
    bbox = Box.from_xyxy(float(x0), float(y0), float(x1), float(y1))
    return Pose(kp, area=0.5 * bbox.area, image_id=image_id, bbox=bbox, id=ann_id)


def make_synthetic_dataset(
    num_images: int = 50,
    seed: int = 0,
    min_people: int = 1,
    max_people: int = 6,
    image_size: tuple[int, int] = (960, 640),
    height_range: tuple[float, float] = (100.0, 290.0),
) -> AnnotationSet:
    """Images of fully labeled, well separated people.

    People occupy distinct cells of a 3x2 grid, so boxes never overlap and
    distinct people never suppress each other. Heights span the medium and
    large COCO area ranges.
    """
    width, height = image_size
    cols, rows = 3, 2
    cw, ch = width / cols, height / rows
    if max_people > cols * rows or min_people < 0 or min_people > max_people:
        raise InvalidInputError(f"people per image must be within [0, {cols * rows}]")
    hi = min(height_range[1], 0.9 * ch)
    poses = []
    ann_id = 1
    for image_id in range(1, num_images + 1):
        rng = substream(seed, image_id)
        n = int(rng.integers(min_people, max_people + 1))
        for cell in rng.permutation(cols * rows)[:n]:
            cx0, cy0 = (cell % cols) * cw, (cell // cols) * ch
            h = float(rng.uniform(height_range[0], hi))
            x = cx0 + float(rng.uniform(0.3 * h, cw - 0.3 * h))
            y = cy0 + float(rng.uniform(0.02 * ch, max(0.02 * ch, ch - 1.02 * h)))
            poses.append(synthetic_person(rng, image_id, x, y, h, ann_id))
            ann_id += 1
    images = {i: (width, height) for i in range(1, num_images + 1)}
    return AnnotationSet(images, poses)


@lru_cache(maxsize=1)
def _fixture_json() -> str:
    return resources.files("topdown_pose").joinpath("data/synthetic50.json").read_text("utf-8")


def load_fixture() -> AnnotationSet:
    """The bundled 50-image synthetic annotation set."""
    return parse_annotations(json.loads(_fixture_json()), "synthetic50.json")
