"""File formats: COCO keypoint annotations, COCO-style results, boxes, tensor files.

Tensor files (``.tns``) are little-endian::

    b"GRMITNSR" | uint32 version (=1) | uint32 ndim | ndim x uint32 dims | float32 data, row-major
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError, SchemaError
from .geometry import Box
from .poses import NUM_KEYPOINTS, Pose, PoseDetection

PathLike = Union[str, os.PathLike]

TENSOR_MAGIC = b"GRMITNSR"
TENSOR_VERSION = 1
PERSON_CATEGORY = {
    "id": 1,
    "name": "person",
    "supercategory": "person",
    "keypoints": [
        "nose", "left_eye", "right_eye", "left_ear", "right_ear",
        "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
        "left_wrist", "right_wrist", "left_hip", "right_hip",
        "left_knee", "right_knee", "left_ankle", "right_ankle",
    ],
}


@dataclass
class AnnotationSet:
    images: dict[Hashable, tuple[int, int]]  # id -> (width, height)
    poses: list[Pose]
    categories: list[dict] = field(default_factory=lambda: [dict(PERSON_CATEGORY)])

    def __len__(self) -> int:
        return len(self.poses)

    def poses_by_image(self) -> dict[Hashable, list[Pose]]:
        out: dict[Hashable, list[Pose]] = {img: [] for img in self.images}
        for p in self.poses:
            out[p.image_id].append(p)
        return out

    def to_coco(self) -> dict:
        images = [{"id": i, "width": w, "height": h} for i, (w, h) in self.images.items()]
        anns = []
        for n, p in enumerate(self.poses):
            kp = p.keypoints.copy()
            kp[kp[:, 2] == 0, :2] = 0.0
            box = p.bbox or p.keypoint_box()
            anns.append(
                {
                    "id": p.id if p.id is not None else n + 1,
                    "image_id": p.image_id,
                    "category_id": 1,
                    "keypoints": [_num(v) for v in kp.ravel()],
                    "num_keypoints": p.num_labeled,
                    "area": p.area,
                    "bbox": box.as_xywh() if box else [0.0, 0.0, 0.0, 0.0],
                    "iscrowd": int(p.ignore),
                }
            )
        return {"images": images, "annotations": anns, "categories": self.categories}


def _num(v: float):
    return int(v) if float(v).is_integer() else float(v)


def _read_json(path: PathLike):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def _write_json(obj, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, allow_nan=False)
        fh.write("\n")


def _finite_numbers(values, what: str, n: Optional[int] = None) -> list[float]:
    if not isinstance(values, list) or (n is not None and len(values) != n):
        raise SchemaError(f"{what}: expected a list of {n} numbers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise SchemaError(f"{what}: non-finite or non-numeric value {v!r}")
        out.append(float(v))
    return out


def parse_annotations(data: dict, source: str = "<memory>") -> AnnotationSet:
    """Validate a COCO keypoint annotation dict. Non-person categories are skipped."""
    if not isinstance(data, dict):
        raise SchemaError(f"{source}: top level must be an object")
    for key in ("images", "annotations"):
        if not isinstance(data.get(key), list):
            raise SchemaError(f"{source}: missing '{key}' list")

    images: dict[Hashable, tuple[int, int]] = {}
    for n, img in enumerate(data["images"]):
        where = f"{source}: images[{n}]"
        if not isinstance(img, dict) or "id" not in img:
            raise SchemaError(f"{where}: record needs an 'id'")
        images[img["id"]] = (int(img.get("width", 0)), int(img.get("height", 0)))

    categories = data.get("categories") or [dict(PERSON_CATEGORY)]
    person_ids = {c["id"] for c in categories if c.get("name") == "person"} or {1}

    poses = []
    for n, ann in enumerate(data["annotations"]):
        where = f"{source}: annotations[{n}] (id={ann.get('id') if isinstance(ann, dict) else None})"
        if not isinstance(ann, dict):
            raise SchemaError(f"{where}: record must be an object")
        if ann.get("category_id", 1) not in person_ids:
            continue
        if "image_id" not in ann:
            raise SchemaError(f"{where}: missing image_id")
        if ann["image_id"] not in images:
            raise SchemaError(f"{where}: image_id {ann['image_id']!r} has no image record")
        kp = _finite_numbers(ann.get("keypoints"), f"{where} keypoints", 3 * NUM_KEYPOINTS)
        area = ann.get("area")
        if isinstance(area, bool) or not isinstance(area, (int, float)) or not area > 0:
            raise SchemaError(f"{where}: area must be a positive number, got {area!r}")
        bbox = None
        if ann.get("bbox") is not None:
            bx = _finite_numbers(ann["bbox"], f"{where} bbox", 4)
            if bx[2] > 0 and bx[3] > 0:
                bbox = Box(*bx)
        try:
            pose = Pose(
                keypoints=np.array(kp).reshape(NUM_KEYPOINTS, 3),
                area=float(area),
                image_id=ann["image_id"],
                bbox=bbox,
                ignore=bool(ann.get("iscrowd", 0)) or bool(ann.get("ignore", 0)),
                id=ann.get("id"),
            )
        except InvalidInputError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        poses.append(pose)
    return AnnotationSet(images, poses, categories)


def load_annotations(path: PathLike) -> AnnotationSet:
    return parse_annotations(_read_json(path), str(path))


def save_annotations(aset: AnnotationSet, path: PathLike) -> None:
    _write_json(aset.to_coco(), path)


def detection_to_record(det: PoseDetection) -> dict:
    kp = np.concatenate([det.keypoints, det.keypoint_scores[:, None]], axis=1)
    return {
        "image_id": det.image_id,
        "category_id": 1,
        "keypoints": [float(v) for v in kp.ravel()],
        "score": det.instance_score,
        "bbox": det.box.as_xywh(),
        "box_score": det.box.score,
    }


def record_to_detection(rec: dict, where: str = "detection") -> PoseDetection:
    if not isinstance(rec, dict) or "image_id" not in rec:
        raise SchemaError(f"{where}: record needs image_id")
    kp = np.array(_finite_numbers(rec.get("keypoints"), f"{where} keypoints", 3 * NUM_KEYPOINTS))
    kp = kp.reshape(NUM_KEYPOINTS, 3)
    score = rec.get("score")
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not (
        math.isfinite(score) and score >= 0
    ):
        raise SchemaError(f"{where}: score must be finite and >= 0, got {score!r}")
    try:
        if rec.get("bbox") is not None:
            box = Box(*_finite_numbers(rec["bbox"], f"{where} bbox", 4), score=float(rec.get("box_score", 1.0)))
        else:
            x0, y0 = kp[:, :2].min(axis=0)
            x1, y1 = kp[:, :2].max(axis=0)
            box = Box.from_xyxy(x0, y0, x1, y1)
        return PoseDetection(kp[:, :2], kp[:, 2], float(score), box, rec["image_id"])
    except InvalidInputError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def write_detections(dets: Iterable[PoseDetection], path: PathLike) -> None:
    _write_json([detection_to_record(d) for d in dets], path)


def load_detections(path: PathLike) -> list[PoseDetection]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: detections file must hold a JSON list")
    return [record_to_detection(r, f"{path}: [{n}]") for n, r in enumerate(data)]


def write_boxes(boxes: dict[Hashable, Sequence[Box]], path: PathLike) -> None:
    records = [
        {"image_id": img, "bbox": b.as_xywh(), "score": b.score}
        for img, bs in boxes.items()
        for b in bs
    ]
    _write_json(records, path)


def load_boxes(path: PathLike) -> dict[Hashable, list[Box]]:
    """Person proposals grouped by image, in file order (the order defines box indices)."""
    data = _read_json(path)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: boxes file must hold a JSON list")
    out: dict[Hashable, list[Box]] = {}
    for n, rec in enumerate(data):
        where = f"{path}: [{n}]"
        if not isinstance(rec, dict) or "image_id" not in rec:
            raise SchemaError(f"{where}: record needs image_id")
        try:
            box = Box(*_finite_numbers(rec.get("bbox"), f"{where} bbox", 4), score=float(rec.get("score", 1.0)))
        except InvalidInputError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        out.setdefault(rec["image_id"], []).append(box)
    return out


def write_tensor(array: np.ndarray, path: PathLike) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack(f"<II{arr.ndim}I", TENSOR_VERSION, arr.ndim, *arr.shape)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_tensor(path: PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != TENSOR_MAGIC:
        raise SchemaError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < 16:
        raise SchemaError(f"{path}: truncated header")
    version, ndim = struct.unpack_from("<II", raw, 8)
    if version != TENSOR_VERSION:
        raise SchemaError(f"{path}: unsupported version {version}")
    offset = 16 + 4 * ndim
    if len(raw) < offset:
        raise SchemaError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}I", raw, 16)
    count = int(np.prod(dims, dtype=np.int64))
    if len(raw) - offset != 4 * count:
        raise SchemaError(
            f"{path}: expected {count} float32 values for dims {dims}, found {(len(raw) - offset) / 4:g}"
        )
    return np.frombuffer(raw, dtype="<f4", offset=offset).reshape(dims).astype(np.float32)


def tensor_path(tensors_dir: PathLike, image_id: Hashable, box_index: int, kind: str) -> Path:
    if kind not in ("heat", "off"):
        raise ValueError(f"unknown tensor kind {kind!r}")
    return Path(tensors_dir) / f"{image_id}_{box_index}_{kind}.tns"
