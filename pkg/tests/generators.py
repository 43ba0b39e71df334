"""Seeded random instances for the oracle-equivalence tests."""

from __future__ import annotations

import numpy as np

from topdown_pose.geometry import Box
from topdown_pose.poses import NUM_KEYPOINTS, Pose, PoseDetection


def random_box(rng: np.random.Generator, extent: float = 100.0, score=None) -> Box:
    x, y = rng.uniform(0, extent, 2)
    w, h = rng.uniform(5, extent / 2, 2)
    s = float(rng.random()) if score is None else score
    return Box(float(x), float(y), float(w), float(h), s)


def random_pose(
    rng: np.random.Generator, image_id, area: float, center=(200.0, 200.0), p_visible: float = 0.85
) -> Pose:
    side = np.sqrt(area)
    xy = np.asarray(center) + rng.uniform(-side, side, size=(NUM_KEYPOINTS, 2))
    v = np.where(rng.random(NUM_KEYPOINTS) < p_visible, 2.0, 0.0)
    return Pose(np.column_stack([xy, v]), area=area, image_id=image_id)


def detection_near(
    rng: np.random.Generator, pose: Pose, noise: float, score: float, image_id=None
) -> PoseDetection:
    xy = pose.xy + rng.normal(0.0, noise, size=(NUM_KEYPOINTS, 2))
    x0, y0 = xy.min(axis=0)
    x1, y1 = xy.max(axis=0)
    box = Box.from_xyxy(float(x0), float(y0), float(x1) + 1e-3, float(y1) + 1e-3)
    return PoseDetection(
        xy, np.ones(NUM_KEYPOINTS), score, box, pose.image_id if image_id is None else image_id
    )


def random_detection(rng: np.random.Generator, image_id, score: float, spread: float = 150.0) -> PoseDetection:
    c = rng.uniform(50, 350, 2)
    xy = c + rng.uniform(-spread, spread, size=(NUM_KEYPOINTS, 2)) * rng.uniform(0.05, 1.0)
    x0, y0 = xy.min(axis=0)
    x1, y1 = xy.max(axis=0)
    box = Box.from_xyxy(float(x0), float(y0), float(x1) + 1e-3, float(y1) + 1e-3)
    return PoseDetection(xy, rng.random(NUM_KEYPOINTS), score, box, image_id)


def eval_instance(rng: np.random.Generator):
    """<= 5 images, <= 6 detections and <= 4 ground truths per image.

    Ground-truth areas straddle the medium/large boundary and include
    small objects; some are flagged ignore or carry no labels. Detections
    are noisy copies of ground truths at several noise levels (so OKS
    values spread over the threshold range) plus unrelated poses. Scores
    come from a coarse grid so ties occur.
    """
    dets, gts = [], []
    for img in range(1, int(rng.integers(1, 6)) + 1):
        img_gts = []
        for _ in range(int(rng.integers(0, 5))):
            area = float(rng.choice([600.0, 32.0**2, 3000.0, 96.0**2, 15000.0, 40000.0]) * rng.uniform(0.8, 1.2))
            p = random_pose(rng, img, area, center=rng.uniform(100, 300, 2), p_visible=rng.choice([0.0, 0.5, 1.0], p=[0.05, 0.25, 0.7]))
            p.ignore = bool(rng.random() < 0.1)
            img_gts.append(p)
        gts.extend(img_gts)
        for _ in range(int(rng.integers(0, 7))):
            score = float(rng.integers(1, 8)) / 8.0
            if img_gts and rng.random() < 0.7:
                g = img_gts[int(rng.integers(len(img_gts)))]
                noise = float(rng.choice([0.5, 2.0, 5.0, 10.0])) * np.sqrt(g.area) / 60.0
                dets.append(detection_near(rng, g, noise, score))
            else:
                dets.append(random_detection(rng, img, score))
    return dets, gts


def nms_instance(rng: np.random.Generator):
    """Boxes and detections in clusters, so overlaps cover the whole [0, 1] range.

    Returns ``(boxes, dets, iou_threshold, oks_threshold)``.
    """
    boxes = []
    for _ in range(int(rng.integers(1, 4))):
        base = random_box(rng, extent=60.0)
        for _ in range(int(rng.integers(1, 6))):
            j = rng.normal(0, rng.choice([0.5, 3.0, 10.0]), 4)
            boxes.append(
                Box(base.x_min + j[0], base.y_min + j[1], max(1.0, base.width + j[2]), max(1.0, base.height + j[3]),
                    float(rng.integers(0, 11)) / 10)
            )
    dets = []
    for _ in range(int(rng.integers(1, 4))):
        image_id = int(rng.integers(1, 3))
        base = random_detection(rng, image_id, 1.0)
        for _ in range(int(rng.integers(1, 6))):
            noise = float(rng.choice([0.2, 2.0, 8.0, 30.0]))
            xy = base.keypoints + rng.normal(0, noise, base.keypoints.shape)
            x0, y0 = xy.min(axis=0)
            x1, y1 = xy.max(axis=0)
            dets.append(
                PoseDetection(xy, base.keypoint_scores, float(rng.integers(0, 11)) / 10,
                              Box.from_xyxy(float(x0), float(y0), float(x1) + 1e-3, float(y1) + 1e-3), image_id)
            )
    return boxes, dets, float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95))
