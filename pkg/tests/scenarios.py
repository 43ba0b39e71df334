"""Fixed end-to-end scenarios shared by the pipeline and acceptance tests."""

from __future__ import annotations

from topdown_pose.geometry import Box, iou
from topdown_pose.oracle import ground_truth_box
from topdown_pose.pipeline import PipelineConfig, assign_person

# duplicated, loosely jittered proposals with noisy offsets: duplicates of one
# person decode to poses at OKS between 0.5 and 0.9 from each other
DUPLICATES = dict(noise_duplicates=3.0, noise_jitter=0.3, noise_sigma=10.0, seed=0)

NOISE_SEEDS = (0, 1, 2, 3, 4)
FLIP_LEVELS = (0.0, 0.05, 0.1, 0.2)
SIGMA_LEVELS = (0.0, 2.0, 5.0, 10.0)
OKS_NMS_LEVELS = (0.1, 0.3, 0.5, 0.7, 0.9)

UNINFORMATIVE_SCORE = 0.9


def rescoring_boxes(aset) -> dict:
    """Half the crops show a person, half show background; every box scores the same.

    Each person contributes its ground-truth box followed by a copy shifted
    sideways by 0.6 of its width. The shifted copy overlaps the person with
    IoU 0.25, below the oracle's 0.5 assignment bar, so its crop carries no
    person and the network output is pure corruption. The 0.25 overlap is
    also below the 0.6 box-NMS threshold, so both proposals survive.
    """
    out = {}
    for img, poses in aset.poses_by_image().items():
        boxes = []
        for p in poses:
            g = ground_truth_box(p)
            shifted = Box(g.x_min + 0.6 * g.width, g.y_min, g.width, g.height, UNINFORMATIVE_SCORE)
            boxes += [Box(g.x_min, g.y_min, g.width, g.height, UNINFORMATIVE_SCORE), shifted]
        for i in range(1, len(boxes), 2):
            assert assign_person(boxes[i], poses) is None
            assert all(iou(boxes[i], b) <= 0.6 for b in boxes[:i])
        out[img] = boxes
    return out


def rescoring_config(scoring: str) -> PipelineConfig:
    return PipelineConfig(noise_flip=0.3, scoring=scoring, seed=0)
