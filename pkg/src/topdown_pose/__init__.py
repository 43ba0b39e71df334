"""Post-network stage of a top-down multi-person pose pipeline.

Crop geometry, heatmap/offset targets and losses, Hough-voting keypoint
decoding with keypoint-based rescoring, OKS non-maximum suppression and
COCO-style OKS AP evaluation, plus a synthetic oracle standing in for the
person detector and pose network.
"""

from .decoder import aggregate, decode_crop, localize, rescore
from .errors import InvalidInputError, SchemaError, StageError, UndefinedSimilarityError
from .evaluation import EvalParams, EvalReport, evaluate, match_image
from .formats import (
    AnnotationSet,
    load_annotations,
    load_boxes,
    load_detections,
    read_tensor,
    save_annotations,
    write_boxes,
    write_detections,
    write_tensor,
)
from .geometry import (
    Box,
    CropTransform,
    crop_to_image,
    fix_aspect,
    image_to_crop,
    iou,
    make_crop_transform,
    rescale_box,
)
from .nms import box_nms, oks_nms
from .oks import COCO_SIGMAS, DEFAULT_KAPPAS, oks, oks_between_detections
from .oracle import NoiseConfig, jitter_boxes, load_fixture, make_synthetic_dataset, oracle_tensors, perturb
from .pipeline import PipelineConfig, load_config, run_pipeline, sweep
from .poses import KEYPOINT_NAMES, NUM_KEYPOINTS, Pose, PoseDetection
from .targets import heatmap_loss, huber, make_targets, offset_loss, total_loss

__version__ = "0.1.0"
