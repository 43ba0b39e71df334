"""Deliberately naive reference implementations used as test oracles.

Nothing here imports the package's numerical code; only the plain data
containers (Box, Pose, PoseDetection) are shared.
"""

from __future__ import annotations

import math

import numpy as np


def lattice_disk_count(radius: float) -> int:
    """Integer points (x, y) with x^2 + y^2 <= radius^2, by enumeration."""
    r = int(math.floor(radius))
    return sum(1 for x in range(-r, r + 1) for y in range(-r, r + 1) if x * x + y * y <= radius * radius)


def hough_brute_force(heat: np.ndarray, off: np.ndarray, radius: float) -> np.ndarray:
    """f_k(x_i) = sum_j G(x_j + F_k(x_j) - x_i) h_k(x_j) / (pi R^2), G the bilinear kernel.

    Evaluated as a gather: every output cell sums over every input cell.
    """
    k_n, h, w = heat.shape
    out = np.zeros((k_n, h, w))
    area = math.pi * radius * radius
    rows, cols = np.mgrid[0:h, 0:w]
    for k in range(k_n):
        tx = (cols + off[2 * k]).ravel()
        ty = (rows + off[2 * k + 1]).ravel()
        hv = heat[k].ravel()
        for r in range(h):
            for c in range(w):
                g = np.maximum(0.0, 1.0 - np.abs(tx - c)) * np.maximum(0.0, 1.0 - np.abs(ty - r))
                out[k, r, c] = float(np.sum(g * hv)) / area
    return out


def box_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a.x_min, a.y_min, a.x_min + a.width, a.y_min + a.height
    bx0, by0, bx1, by1 = b.x_min, b.y_min, b.x_min + b.width, b.y_min + b.height
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    return inter / union if union > 0 else 0.0


def oks_loop(cand_xy, ref_xy, visible, area, kappas) -> float:
    num, den = 0.0, 0
    for k in range(len(kappas)):
        if not visible[k]:
            continue
        dx = cand_xy[k][0] - ref_xy[k][0]
        dy = cand_xy[k][1] - ref_xy[k][1]
        num += math.exp(-(dx * dx + dy * dy) / (2.0 * area * kappas[k] ** 2))
        den += 1
    return num / den


def _pick_and_remove(scores, overlap, threshold, same_group):
    """Repeatedly take the best remaining item and delete everything it suppresses."""
    remaining = list(range(len(scores)))
    keep = []
    while remaining:
        best = remaining[0]
        for i in remaining[1:]:
            if scores[i] > scores[best]:
                best = i
        keep.append(best)
        remaining = [
            i
            for i in remaining
            if i != best and not (same_group(i, best) and overlap(i, best) > threshold)
        ]
    return keep


def naive_box_nms(boxes, threshold):
    return _pick_and_remove(
        [b.score for b in boxes], lambda i, j: box_iou(boxes[i], boxes[j]), threshold, lambda i, j: True
    )


def naive_oks_nms(dets, threshold, kappas):
    def overlap(i, j):
        a, b = dets[i], dets[j]
        return oks_loop(a.keypoints, b.keypoints, [True] * len(kappas), b.box.width * b.box.height, kappas)

    return _pick_and_remove(
        [d.instance_score for d in dets], overlap, threshold, lambda i, j: dets[i].image_id == dets[j].image_id
    )


def brute_force_evaluate(dets, gts, kappas, thresholds=None, areas=None, max_dets=20):
    """COCO keypoint AP/AR written out longhand.

    Returns a dict with the same keys as EvalReport fields.
    """
    if thresholds is None:
        thresholds = [round(0.5 + 0.05 * i, 2) for i in range(10)]
    if areas is None:
        areas = {"all": (0.0, float("inf")), "medium": (32.0**2, 96.0**2), "large": (96.0**2, float("inf"))}
    images = sorted({d.image_id for d in dets} | {g.image_id for g in gts})

    def visible(g):
        return [v > 0 for v in g.keypoints[:, 2]]

    def ap_ar(thr, lo, hi):
        scored = []  # (score, image rank, index, is_tp)
        n_pos = 0
        for rank, img in enumerate(images):
            mine = [(i, d) for i, d in enumerate(dets) if d.image_id == img]
            mine.sort(key=lambda t: -t[1].instance_score)
            mine = mine[:max_dets]
            img_gts = [g for g in gts if g.image_id == img]
            ignored = [
                g.ignore or not any(visible(g)) or g.area < lo or g.area > hi for g in img_gts
            ]
            n_pos += ignored.count(False)
            taken = [False] * len(img_gts)
            for i, d in mine:
                sims = []
                for g in img_gts:
                    vis = visible(g)
                    sims.append(oks_loop(d.keypoints, g.keypoints[:, :2], vis, g.area, kappas) if any(vis) else 0.0)
                match = None
                for pass_ignored in (False, True):
                    best_val = None
                    for gi, g in enumerate(img_gts):
                        if taken[gi] or ignored[gi] != pass_ignored or sims[gi] < thr:
                            continue
                        if best_val is None or sims[gi] > best_val:
                            match, best_val = gi, sims[gi]
                    if match is not None:
                        break
                if match is not None:
                    taken[match] = True
                    if ignored[match]:
                        continue
                    scored.append((d.instance_score, rank, i, True))
                else:
                    xs, ys = d.keypoints[:, 0], d.keypoints[:, 1]
                    a = (xs.max() - xs.min()) * (ys.max() - ys.min())
                    if a < lo or a > hi:
                        continue
                    scored.append((d.instance_score, rank, i, False))
        if n_pos == 0:
            return float("nan"), float("nan")
        scored.sort(key=lambda t: (-t[0], t[1], t[2]))
        tp = fp = 0
        curve = []
        for *_, hit in scored:
            tp += hit
            fp += not hit
            curve.append((tp / n_pos, tp / (tp + fp)))
        total = 0.0
        # COCO builds its recall grid with linspace; ten of its points differ
        # from n / 100 in the last bit, which matters when recall hits them exactly
        for r in np.linspace(0.0, 1.0, 101):
            best = 0.0
            for rec, prec in curve:
                if rec >= r:
                    best = max(best, prec)
            total += best
        return total / 101.0, (curve[-1][0] if curve else 0.0)

    def mean(vals):
        vals = [v for v in vals if not math.isnan(v)]
        return sum(vals) / len(vals) if vals else float("nan")

    out = {}
    for name, key in (("all", ""), ("medium", "_M"), ("large", "_L")):
        lo, hi = areas[name]
        pairs = [ap_ar(t, lo, hi) for t in thresholds]
        out["AP" + key] = mean([p[0] for p in pairs])
        out["AR" + key] = mean([p[1] for p in pairs])
        if name == "all":
            out["AP50"], out["AR50"] = pairs[0]
            out["AP75"], out["AR75"] = pairs[5]
    return out
