from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError
from ..flowmatch import ToyScene
from ..prompt import BBox
from ..scenes import DetectedBox
from ..utils.box_ops import as_boxes, box_iou

__all__ = ["SUCCESS_IOU", "EvalRecord", "MatchResult", "iou", "match_instances"]

# an instance succeeds when its IoU is strictly above this
SUCCESS_IOU = 0.5

GroundTruth = Tuple[int, BBox]


def iou(a: BBox, b: BBox) -> float:
    """
    Example:
        >>> iou(BBox(0, 0, 0.5, 0.5), BBox(0.25, 0.25, 0.75, 0.75))  # 0.0625 / 0.4375
        0.14285714285714285
    """
    return float(box_iou(as_boxes([a]), as_boxes([b]))[0, 0])


@dataclass(frozen=True)
class EvalRecord:
    """Ground truth and detections of one image. ``scene`` is only needed by crop scorers."""

    gt: Tuple[GroundTruth, ...]
    detections: Tuple[DetectedBox, ...] = field(default_factory=tuple)
    scene: Optional[ToyScene] = None

    def __post_init__(self):
        object.__setattr__(self, "gt", tuple((int(c), b.checked()) for c, b in self.gt))
        object.__setattr__(self, "detections", tuple(self.detections))
        if not self.gt:
            raise DataError("an evaluation record needs at least one ground-truth instance")

    @property
    def level(self) -> int:
        return len(self.gt)


@dataclass(frozen=True)
class MatchResult:
    """Per ground-truth instance: index of the claiming detection (or None), IoU and success flag."""

    matched: Tuple[Optional[int], ...]
    ious: Tuple[float, ...]

    @property
    def success(self) -> Tuple[bool, ...]:
        return tuple(v > SUCCESS_IOU for v in self.ious)

    @property
    def image_success(self) -> bool:
        return all(self.success)


def _score_order(detections: Sequence[DetectedBox]) -> List[int]:
    return sorted(range(len(detections)), key=lambda i: -detections[i].score)


def match_instances(gt: Sequence[GroundTruth], detections: Sequence[DetectedBox]) -> MatchResult:
    """
    Greedy per-class matching. Detections are visited by descending score (stable on input order);
    each claims the unmatched same-class ground truth it overlaps most. Detections that overlap no
    remaining ground truth claim nothing.
    """
    n = len(gt)
    matched: List[Optional[int]] = [None] * n
    ious = [0.0] * n
    if n == 0 or not detections:
        return MatchResult(tuple(matched), tuple(ious))

    overlap = box_iou(as_boxes([d.box for d in detections]), as_boxes([b for _, b in gt]))
    gt_classes = np.asarray([c for c, _ in gt])
    for d in _score_order(detections):
        candidates = (gt_classes == detections[d].class_id) & np.asarray([m is None for m in matched])
        if not candidates.any():
            continue
        row = np.where(candidates, overlap[d], -1.0)
        g = int(np.argmax(row))
        if row[g] <= 0.0:
            continue
        matched[g] = d
        ious[g] = float(row[g])
    return MatchResult(tuple(matched), tuple(ious))
