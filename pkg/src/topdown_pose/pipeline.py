"""Two-stage cascade with file-based stages: proposals -> crops -> decode -> OKS-NMS -> eval."""

from __future__ import annotations

import configparser
import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from .decoder import aggregate, localize, rescore
from .errors import InvalidInputError, StageError
from .evaluation import EvalParams, EvalReport, _id_key, evaluate
from .formats import (
    AnnotationSet,
    load_annotations,
    load_boxes,
    read_tensor,
    tensor_path,
    write_boxes,
    write_detections,
    write_tensor,
)
from .geometry import CROP_HEIGHT, CROP_WIDTH, EVAL_RESCALE, Box, iou, make_crop_transform
from .nms import IOU_NMS_THRESHOLD, OKS_NMS_THRESHOLD, box_nms_indices, oks_nms
from .oks import as_kappas
from .oracle import (
    PROPOSAL_SCORE_FLOOR,
    NoiseConfig,
    empty_pose,
    ground_truth_box,
    jitter_boxes,
    load_fixture,
    oracle_tensors,
    perturb,
    substream,
)
from .poses import Pose, PoseDetection
from .targets import DISK_RADIUS

PathLike = Union[str, os.PathLike]

# a proposal inherits a ground-truth person in oracle mode only above this IoU
ORACLE_MATCH_IOU = 0.5


@dataclass
class PipelineConfig:
    annotations: Optional[str] = None  # None -> bundled synthetic fixture
    boxes: Optional[str] = None  # None -> synthetic detector (jitter_boxes)
    tensors_dir: Optional[str] = None
    rescales: Optional[str] = None  # per-crop context factors written by synth --train-rescale
    oracle: bool = True
    noise_flip: float = 0.0
    noise_sigma: float = 0.0
    noise_jitter: float = 0.0
    noise_duplicates: float = 0.0
    radius: float = DISK_RADIUS
    crop_width: int = CROP_WIDTH
    crop_height: int = CROP_HEIGHT
    rescale: float = EVAL_RESCALE
    proposal_threshold: float = PROPOSAL_SCORE_FLOOR
    iou_nms: float = IOU_NMS_THRESHOLD
    oks_nms: float = OKS_NMS_THRESHOLD
    max_dets: int = 20
    scoring: str = "keypoint"  # or "box": rank by detector score instead of rescoring
    kappas: Optional[tuple[float, ...]] = None
    seed: int = 0
    workers: int = 1
    out_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.scoring not in ("keypoint", "box"):
            raise InvalidInputError(f"scoring must be 'keypoint' or 'box', got {self.scoring!r}")
        if not self.oracle and not self.tensors_dir:
            raise InvalidInputError("either oracle mode or a tensors directory is required")
        if self.workers < 1:
            raise InvalidInputError("workers must be >= 1")

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(
            heatmap_flip_prob=self.noise_flip,
            offset_sigma=self.noise_sigma,
            box_jitter=self.noise_jitter,
            duplicate_rate=self.noise_duplicates,
            seed=self.seed,
        )

    def eval_params(self) -> EvalParams:
        kappas = None if self.kappas is None else np.asarray(self.kappas, dtype=np.float64)
        return EvalParams(max_dets=self.max_dets, kappas=kappas)


def parse_crop_size(text: str) -> tuple[int, int]:
    """``"257x353"`` -> ``(257, 353)`` as (width, height)."""
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise InvalidInputError(f"crop size must look like WIDTHxHEIGHT, got {text!r}") from None
    return w, h


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    kind = kinds[name]
    raw = raw.strip()
    if name == "kappas":
        return tuple(float(v) for v in raw.replace(",", " ").split())
    if raw.lower() in ("none", ""):
        return None
    if "bool" in kind:
        return raw.lower() in ("1", "true", "yes", "on")
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines (``#`` comments) -> typed overrides for :class:`PipelineConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[pipeline]\n" + text)
    known = {f.name for f in fields(PipelineConfig)}
    out = {}
    for key, raw in parser["pipeline"].items():
        name = key.replace("-", "_")
        if name == "crop_size":
            out["crop_width"], out["crop_height"] = parse_crop_size(raw)
            continue
        if name not in known:
            raise InvalidInputError(f"unknown configuration key {key!r}")
        out[name] = _coerce(name, raw)
    return out


def load_config(path: PathLike, **overrides) -> PipelineConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


@dataclass
class PipelineResult:
    report: EvalReport
    detections: list[PoseDetection]
    raw_detections: list[PoseDetection] = field(default_factory=list)
    artifacts: dict[str, Path] = field(default_factory=dict)


@contextmanager
def _stage(name: str):
    """Re-raise anything escaping the block as a :class:`StageError` tagged ``name``."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, f"{type(exc).__name__}: {exc}") from exc


def load_dataset(cfg: PipelineConfig) -> AnnotationSet:
    with _stage("annotations"):
        return load_fixture() if cfg.annotations is None else load_annotations(cfg.annotations)


def propose_boxes(cfg: PipelineConfig, aset: Optional[AnnotationSet]) -> dict[Hashable, list[Box]]:
    """Detector stage: boxes from file, or the synthetic detector over the annotations."""
    with _stage("boxes"):
        if cfg.boxes is not None:
            return load_boxes(cfg.boxes)
        if aset is None:
            raise InvalidInputError("synthetic boxes need annotations")
        noise = cfg.noise
        return {
            img: jitter_boxes(poses, noise, substream(cfg.seed, img, "boxes"))
            for img, poses in aset.poses_by_image().items()
        }


def select_proposals(boxes: Sequence[Box], cfg: PipelineConfig) -> list[int]:
    """Indices (into ``boxes``) that survive IoU-NMS and the proposal score threshold."""
    kept = set(box_nms_indices(boxes, cfg.iou_nms))
    return [i for i, b in enumerate(boxes) if i in kept and b.score > cfg.proposal_threshold]


def assign_person(box: Box, gts: Sequence[Pose]) -> Optional[Pose]:
    """Ground-truth person a proposal covers (max IoU >= ORACLE_MATCH_IOU), for oracle tensors."""
    best, best_iou = None, ORACLE_MATCH_IOU
    for p in gts:
        gbox = ground_truth_box(p)
        if gbox is None or p.num_labeled == 0:
            continue
        v = iou(box, gbox)
        if v >= best_iou and (best is None or v > best_iou):
            best, best_iou = p, v
    return best


def crop_tensors(
    cfg: PipelineConfig,
    image_id: Hashable,
    box_index: int,
    box: Box,
    gts: Sequence[Pose],
    rescale: Optional[float] = None,
    voting_only: bool = True,
):
    """Crop transform plus network output for one proposal.

    Oracle offsets are perturbed only where they can vote unless
    ``voting_only`` is False (used when writing full tensors to disk).
    """
    transform = make_crop_transform(
        box, cfg.crop_width, cfg.crop_height, cfg.rescale if rescale is None else rescale
    )
    if cfg.tensors_dir is not None and not cfg.oracle:
        heat = read_tensor(tensor_path(cfg.tensors_dir, image_id, box_index, "heat"))
        off = read_tensor(tensor_path(cfg.tensors_dir, image_id, box_index, "off"))
        return transform, heat, off
    person = assign_person(box, gts) or empty_pose(image_id)
    heat, off = oracle_tensors(person, transform, cfg.radius)
    heat, off = perturb(
        heat, off, cfg.noise, substream(cfg.seed, image_id, box_index, "crop"), voting_only=voting_only
    )
    return transform, heat, off


def decode_image(
    cfg: PipelineConfig,
    image_id: Hashable,
    boxes: Sequence[Box],
    gts: Sequence[Pose],
    rescales: Optional[dict[str, float]] = None,
) -> list[PoseDetection]:
    dets = []
    for i in select_proposals(boxes, cfg):
        factor = rescales.get(f"{image_id}_{i}") if rescales else None
        transform, heat, off = crop_tensors(cfg, image_id, i, boxes[i], gts, factor)
        if heat.shape[1:] != transform.shape:
            raise InvalidInputError(
                f"image {image_id} box {i}: tensor grid {heat.shape[1:]} != crop grid {transform.shape}"
            )
        f = aggregate(heat, off, cfg.radius)
        keypoints, scores = localize(f, transform)
        score = rescore(f) if cfg.scoring == "keypoint" else boxes[i].score
        dets.append(
            PoseDetection(keypoints, scores, score, boxes[i], image_id, extras={"box_index": i})
        )
    return dets


def _sorted_images(ids: Iterable[Hashable]) -> list[Hashable]:
    return sorted(ids, key=_id_key)


def decode_all(
    cfg: PipelineConfig,
    boxes: dict[Hashable, list[Box]],
    aset: Optional[AnnotationSet],
) -> list[PoseDetection]:
    """Decode every image; output grouped by image in id order."""
    gts = aset.poses_by_image() if aset is not None else {}
    images = _sorted_images(boxes)
    with _stage("decode"):
        rescales = None
        if cfg.rescales is not None:
            rescales = json.loads(Path(cfg.rescales).read_text(encoding="utf-8"))
        work = lambda img: decode_image(cfg, img, boxes[img], gts.get(img, []), rescales)  # noqa: E731
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                per_image = list(pool.map(work, images))
        else:
            per_image = [work(img) for img in images]
    return [d for dets in per_image for d in dets]


def order_detections(dets: Iterable[PoseDetection]) -> list[PoseDetection]:
    """Output order: image id, then score descending (stable)."""
    return sorted(dets, key=lambda d: (_id_key(d.image_id), -d.instance_score))


def suppress(cfg: PipelineConfig, dets: Sequence[PoseDetection], threshold: Optional[float] = None):
    with _stage("nms"):
        kappas = as_kappas(None if cfg.kappas is None else np.asarray(cfg.kappas))
        kept = oks_nms(dets, cfg.oks_nms if threshold is None else threshold, kappas)
    return order_detections(kept)


def score_detections(
    cfg: PipelineConfig, dets: Sequence[PoseDetection], aset: AnnotationSet
) -> EvalReport:
    with _stage("eval"):
        return evaluate(dets, aset.poses, cfg.eval_params())


def write_outputs(out_dir: PathLike, dets: Sequence[PoseDetection], report: EvalReport) -> dict[str, Path]:
    out = Path(out_dir)
    with _stage("write"):
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "detections": out / "detections.json",
            "report": out / "report.txt",
            "csv": out / "report.csv",
        }
        write_detections(dets, paths["detections"])
        paths["report"].write_text(report.format_table(), encoding="utf-8")
        paths["csv"].write_text(report.to_csv(), encoding="utf-8")
    return paths


def run_pipeline(
    cfg: PipelineConfig,
    annotations: Optional[AnnotationSet] = None,
    boxes: Optional[dict[Hashable, list[Box]]] = None,
) -> PipelineResult:
    """Run the whole cascade. In-memory ``annotations``/``boxes`` take precedence over config paths."""
    aset = annotations if annotations is not None else load_dataset(cfg)
    boxes = propose_boxes(cfg, aset) if boxes is None else dict(boxes)
    for img in aset.images:
        boxes.setdefault(img, [])
    raw = decode_all(cfg, boxes, aset)
    dets = suppress(cfg, raw)
    report = score_detections(cfg, dets, aset)
    result = PipelineResult(report, dets, raw)
    if cfg.out_dir is not None:
        result.artifacts = write_outputs(cfg.out_dir, dets, report)
    return result


SWEEPABLE = {
    "oks_nms",
    "iou_nms",
    "noise_flip",
    "noise_sigma",
    "noise_jitter",
    "noise_duplicates",
    "radius",
    "rescale",
    "proposal_threshold",
    "max_dets",
}


def sweep(
    cfg: PipelineConfig,
    param: str,
    values: Sequence[float],
    seeds: Optional[Sequence[int]] = None,
    annotations: Optional[AnnotationSet] = None,
) -> list[dict]:
    """AP/AR for each value of ``param``, averaged over ``seeds`` (default: ``cfg.seed``).

    An ``oks_nms`` sweep decodes once per seed and re-runs only suppression
    and evaluation.
    """
    param = param.replace("-", "_")
    if param not in SWEEPABLE:
        raise InvalidInputError(f"cannot sweep {param!r}; choose from {sorted(SWEEPABLE)}")
    aset = annotations if annotations is not None else load_dataset(cfg)
    seeds = [cfg.seed] if seeds is None else list(seeds)
    totals = {v: [] for v in values}

    for seed in seeds:
        base = replace(cfg, seed=seed, out_dir=None)
        if param == "oks_nms":
            boxes = propose_boxes(base, aset)
            raw = decode_all(base, boxes, aset)
            for v in values:
                dets = suppress(base, raw, threshold=v)
                totals[v].append(score_detections(base, dets, aset))
        else:
            for v in values:
                run_cfg = replace(base, **{param: type(getattr(cfg, param))(v)})
                totals[v].append(run_pipeline(run_cfg, annotations=aset).report)

    rows = []
    for v in values:
        reports = totals[v]
        row = {"parameter": param, "value": v}
        for key in reports[0].as_dict():
            row[key] = float(np.mean([r.as_dict()[key] for r in reports]))
        rows.append(row)
    return rows


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.12f}" if isinstance(v, float) and k != "value" else v) for k, v in row.items()})
    return buf.getvalue()


def synthesize(
    cfg: PipelineConfig,
    out_dir: PathLike,
    train_rescale: bool = False,
    annotations: Optional[AnnotationSet] = None,
) -> dict[str, Path]:
    """Write synthetic proposals (``boxes.json``) and per-box tensor files.

    With ``train_rescale`` every crop draws its context factor uniformly
    from [1.0, 1.5] instead of using ``cfg.rescale``; the draw is written
    to ``rescales.json`` because decoding must use the same factor.
    """
    out = Path(out_dir)
    aset = annotations if annotations is not None else load_dataset(cfg)
    boxes = propose_boxes(cfg, aset)
    gts = aset.poses_by_image()
    tdir = out / "tensors"
    rescales = {}
    with _stage("synth"):
        for img in _sorted_images(boxes):
            for i, box in enumerate(boxes[img]):
                factor = None
                if train_rescale:
                    factor = float(substream(cfg.seed, img, i, "rescale").uniform(1.0, 1.5))
                    rescales[f"{img}_{i}"] = factor
                _, heat, off = crop_tensors(
                    replace(cfg, tensors_dir=None, oracle=True), img, i, box, gts.get(img, []), factor,
                    voting_only=False,
                )
                write_tensor(heat, tensor_path(tdir, img, i, "heat"))
                write_tensor(off, tensor_path(tdir, img, i, "off"))
        write_boxes(boxes, out / "boxes.json")
        paths = {"boxes": out / "boxes.json", "tensors": tdir}
        if train_rescale:
            paths["rescales"] = out / "rescales.json"
            paths["rescales"].write_text(json.dumps(rescales, sort_keys=True) + "\n", encoding="utf-8")
    return paths
