"""COCO-style keypoint AP/AR.

Conventions (all overridable through :class:`EvalParams`):

* OKS thresholds 0.50, 0.55, ..., 0.95
* area ranges ``all``, ``medium`` = [32^2, 96^2], ``large`` = [96^2, inf), bounds inclusive
* at most 20 detections per image, highest scores first
* AP is the mean interpolated precision at 101 recall points; AR is the
  final recall, both averaged over thresholds

Ground truths flagged ``ignore``, without labeled keypoints, or outside the
area range are ignores: they cannot produce a true positive or a miss, and
detections matched to them are dropped from scoring. Unmatched detections
whose keypoint-extent area is outside the range are dropped as well.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field, fields
from typing import Hashable, Optional, Sequence

import numpy as np

from .oks import as_kappas, oks_arrays
from .poses import Pose, PoseDetection

INF = float("inf")


def _default_thresholds() -> np.ndarray:
    return np.round(np.linspace(0.5, 0.95, 10), 2)


def _default_areas() -> dict[str, tuple[float, float]]:
    return {"all": (0.0, INF), "medium": (32.0**2, 96.0**2), "large": (96.0**2, INF)}


@dataclass
class EvalParams:
    oks_thresholds: np.ndarray = field(default_factory=_default_thresholds)
    area_ranges: dict[str, tuple[float, float]] = field(default_factory=_default_areas)
    max_dets: int = 20
    recall_points: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 101))
    kappas: Optional[np.ndarray] = None


@dataclass
class ImageMatch:
    """Outcome of greedy matching in one image at one OKS threshold.

    ``det_match[d]`` is the matched ground-truth index or -1.
    """

    det_match: np.ndarray
    det_ignore: np.ndarray
    gt_matched: np.ndarray
    gt_ignore: np.ndarray

    @property
    def true_positives(self) -> np.ndarray:
        return (self.det_match >= 0) & ~self.det_ignore

    @property
    def false_positives(self) -> np.ndarray:
        return (self.det_match < 0) & ~self.det_ignore


def oks_matrix(
    dets: Sequence[PoseDetection], gts: Sequence[Pose], kappas: Optional[np.ndarray] = None
) -> np.ndarray:
    """``(D, G)`` OKS values; ground truths without labeled keypoints score 0."""
    kappas = as_kappas(kappas)
    out = np.zeros((len(dets), len(gts)))
    for g, gt in enumerate(gts):
        if gt.num_labeled == 0:
            continue
        for d, det in enumerate(dets):
            out[d, g] = oks_arrays(det.keypoints, gt.xy, gt.visible, gt.area, kappas)
    return out


def gt_ignore_flags(gts: Sequence[Pose], area_range: tuple[float, float] = (0.0, INF)) -> np.ndarray:
    lo, hi = area_range
    return np.array(
        [g.ignore or g.num_labeled == 0 or g.area < lo or g.area > hi for g in gts], dtype=bool
    )


def match_image(
    dets: Sequence[PoseDetection],
    gts: Sequence[Pose],
    oks_threshold: float,
    kappas: Optional[np.ndarray] = None,
    *,
    area_range: tuple[float, float] = (0.0, INF),
    oks: Optional[np.ndarray] = None,
) -> ImageMatch:
    """Greedy OKS matching of score-sorted ``dets`` against ``gts``.

    Each detection, in order, takes the unmatched regular ground truth with
    the highest OKS >= threshold (first index on ties); only when none
    qualifies may it fall back to an unmatched ignored ground truth.
    """
    if oks is None:
        oks = oks_matrix(dets, gts, kappas)
    n_det, n_gt = len(dets), len(gts)
    gt_ignore = gt_ignore_flags(gts, area_range)
    gt_matched = np.zeros(n_gt, dtype=bool)
    det_match = np.full(n_det, -1, dtype=np.int64)
    det_ignore = np.zeros(n_det, dtype=bool)

    for d in range(n_det):
        best = -1
        for want_ignored in (False, True):
            best_oks = oks_threshold
            for g in range(n_gt):
                if gt_matched[g] or gt_ignore[g] != want_ignored:
                    continue
                if oks[d, g] >= best_oks and (best < 0 or oks[d, g] > best_oks):
                    best, best_oks = g, oks[d, g]
            if best >= 0:
                break
        if best >= 0:
            gt_matched[best] = True
            det_match[d] = best
            det_ignore[d] = gt_ignore[best]

    lo, hi = area_range
    for d in range(n_det):
        if det_match[d] < 0:
            a = dets[d].keypoint_area()
            det_ignore[d] = a < lo or a > hi
    return ImageMatch(det_match, det_ignore, gt_matched, gt_ignore)


@dataclass
class EvalReport:
    AP: float
    AP50: float
    AP75: float
    AP_M: float
    AP_L: float
    AR: float
    AR50: float
    AR75: float
    AR_M: float
    AR_L: float

    LABELS = {
        "AP": "AP",
        "AP50": "AP.5",
        "AP75": "AP.75",
        "AP_M": "AP (M)",
        "AP_L": "AP (L)",
        "AR": "AR",
        "AR50": "AR.5",
        "AR75": "AR.75",
        "AR_M": "AR (M)",
        "AR_L": "AR (L)",
    }

    def as_dict(self) -> dict[str, float]:
        return {self.LABELS[f.name]: getattr(self, f.name) for f in fields(self)}

    def format_table(self) -> str:
        """Single-row aligned table, one column per metric."""
        items = self.as_dict()
        header = " ".join(f"{k:>7}" for k in items)
        row = " ".join(f"{_fmt(v):>7}" for v in items.values())
        return f"{header}\n{row}\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for k, v in self.as_dict().items():
            writer.writerow([k, _fmt(v, digits=12)])
        return buf.getvalue()


def _fmt(v: float, digits: int = 3) -> str:
    return "nan" if math.isnan(v) else f"{v:.{digits}f}"


def _id_key(image_id: Hashable):
    return (0, image_id, "") if isinstance(image_id, (int, np.integer)) else (1, 0, str(image_id))


def _mean(values: np.ndarray) -> float:
    vals = values[~np.isnan(values)]
    return float(np.mean(vals)) if vals.size else float("nan")


def _precision_recall(
    tps: np.ndarray, n_pos: int, recall_points: np.ndarray
) -> tuple[float, float]:
    """Interpolated AP and final recall of a globally ordered detection list."""
    if n_pos == 0:
        return float("nan"), float("nan")
    tp = np.cumsum(tps, dtype=np.float64)
    fp = np.cumsum(~tps, dtype=np.float64)
    if tp.size == 0:
        return 0.0, 0.0
    recall = tp / n_pos
    precision = tp / (tp + fp)
    # non-increasing envelope from the right
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, recall_points, side="left")
    q = np.zeros(recall_points.size)
    valid = idx < recall.size
    q[valid] = precision[idx[valid]]
    return float(np.mean(q)), float(recall[-1])


def evaluate(
    dets: Sequence[PoseDetection],
    gts: Sequence[Pose],
    params: Optional[EvalParams] = None,
) -> EvalReport:
    """Score ``dets`` against ``gts`` across all images they mention."""
    params = params or EvalParams()
    kappas = as_kappas(params.kappas)

    dets_by_image: dict[Hashable, list[int]] = defaultdict(list)
    for i, d in enumerate(dets):
        dets_by_image[d.image_id].append(i)
    gts_by_image: dict[Hashable, list[Pose]] = defaultdict(list)
    for g in gts:
        gts_by_image[g.image_id].append(g)
    image_ids = sorted(set(dets_by_image) | set(gts_by_image), key=_id_key)

    per_image = []
    for rank, img in enumerate(image_ids):
        idxs = dets_by_image.get(img, [])
        idxs = sorted(idxs, key=lambda i: -dets[i].instance_score)[: params.max_dets]
        img_dets = [dets[i] for i in idxs]
        img_gts = gts_by_image.get(img, [])
        per_image.append((rank, idxs, img_dets, img_gts, oks_matrix(img_dets, img_gts, kappas)))

    thresholds = np.asarray(params.oks_thresholds, dtype=np.float64)
    areas = list(params.area_ranges.items())
    ap = np.full((thresholds.size, len(areas)), np.nan)
    ar = np.full_like(ap, np.nan)

    for a, (_, rng) in enumerate(areas):
        for t, thr in enumerate(thresholds):
            keys, tps = [], []
            n_pos = 0
            for rank, idxs, img_dets, img_gts, oks in per_image:
                m = match_image(img_dets, img_gts, thr, kappas, area_range=rng, oks=oks)
                n_pos += int(np.count_nonzero(~m.gt_ignore))
                for j, i in enumerate(idxs):
                    if m.det_ignore[j]:
                        continue
                    keys.append((-dets[i].instance_score, rank, i))
                    tps.append(m.det_match[j] >= 0)
            order = sorted(range(len(keys)), key=keys.__getitem__)
            tp_arr = np.array([tps[i] for i in order], dtype=bool)
            ap[t, a], ar[t, a] = _precision_recall(tp_arr, n_pos, params.recall_points)

    names = [n for n, _ in areas]

    def col(name: str) -> int:
        return names.index(name)

    def at(thr: float) -> int:
        hits = np.flatnonzero(np.isclose(thresholds, thr))
        return int(hits[0]) if hits.size else -1

    def pick(table: np.ndarray, thr: float) -> float:
        i = at(thr)
        return float(table[i, col("all")]) if i >= 0 else float("nan")

    def area_mean(table: np.ndarray, name: str) -> float:
        return _mean(table[:, col(name)]) if name in names else float("nan")

    return EvalReport(
        AP=area_mean(ap, "all"),
        AP50=pick(ap, 0.5),
        AP75=pick(ap, 0.75),
        AP_M=area_mean(ap, "medium"),
        AP_L=area_mean(ap, "large"),
        AR=area_mean(ar, "all"),
        AR50=pick(ar, 0.5),
        AR75=pick(ar, 0.75),
        AR_M=area_mean(ar, "medium"),
        AR_L=area_mean(ar, "large"),
    )
