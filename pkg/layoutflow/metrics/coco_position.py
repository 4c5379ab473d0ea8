"""
Layout adherence scores over a set of evaluation records: instance and image success ratios
per instance-count level, mean IoU and COCO-style average precision.

Level keys are ``"L<count>"``; the ``"avg"`` entry pools every instance (or image) of every level
rather than averaging the per-level ratios. Levels with no records are absent.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError
from ..scenes import DEFAULT_PALETTE, Palette
from ..utils.box_ops import as_boxes, box_iou
from .matching import EvalRecord, MatchResult, match_instances
from .similarity import aggregate_similarity, pairs_from_records

__all__ = [
    "COCO_IOU_THRESHOLDS",
    "RECALL_POINTS",
    "ScoreSummary",
    "instance_success_ratio",
    "image_success_ratio",
    "mean_iou",
    "average_precision",
    "match_records",
    "summarize",
]

COCO_IOU_THRESHOLDS = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2).tolist())
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


def _check_nonempty(records: Sequence[EvalRecord]) -> None:
    if len(records) == 0:
        raise DataError("no evaluation records")


def match_records(records: Sequence[EvalRecord]) -> List[MatchResult]:
    return [match_instances(r.gt, r.detections) for r in records]


def _level_key(level: int) -> str:
    return f"L{level}"


def _ratios(levels: Sequence[int], hits: Sequence[bool]) -> Dict[str, float]:
    per_level = defaultdict(list)
    for level, hit in zip(levels, hits):
        per_level[level].append(hit)
    out = {_level_key(k): float(np.mean(per_level[k])) for k in sorted(per_level)}
    out["avg"] = float(np.mean(hits))
    return out


def instance_success_ratio(
    records: Sequence[EvalRecord], matches: Optional[Sequence[MatchResult]] = None
) -> Dict[str, float]:
    """Fraction of ground-truth instances localized with IoU > 0.5, per level and pooled."""
    _check_nonempty(records)
    matches = match_records(records) if matches is None else matches
    levels, hits = [], []
    for record, m in zip(records, matches):
        levels.extend([record.level] * record.level)
        hits.extend(m.success)
    return _ratios(levels, hits)


def image_success_ratio(
    records: Sequence[EvalRecord], matches: Optional[Sequence[MatchResult]] = None
) -> Dict[str, float]:
    """Fraction of images whose every instance succeeded, per level and pooled."""
    _check_nonempty(records)
    matches = match_records(records) if matches is None else matches
    return _ratios([r.level for r in records], [m.image_success for m in matches])


def mean_iou(records: Sequence[EvalRecord], matches: Optional[Sequence[MatchResult]] = None) -> float:
    """Mean achieved IoU over all ground-truth instances; unmatched instances count as 0."""
    _check_nonempty(records)
    matches = match_records(records) if matches is None else matches
    return float(np.mean([v for m in matches for v in m.ious]))


def _interpolated_ap(tp: np.ndarray, n_gt: int) -> float:
    """101-point interpolated AP from a score-ranked true-positive indicator."""
    if tp.size == 0:
        return 0.0
    acc_tp = np.cumsum(tp)
    acc_fp = np.cumsum(1 - tp)
    recall = acc_tp / n_gt
    precision = acc_tp / (acc_tp + acc_fp)
    # monotone precision envelope, right to left
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(sampled.mean())


def _class_tp(
    records: Sequence[EvalRecord], class_id: int, thresholds: Sequence[float]
) -> Tuple[np.ndarray, int]:
    """``[T, D]`` true-positive indicators of the class's detections ranked by score, and the GT count."""
    dets = []  # (score, record index, detection index)
    n_gt = 0
    for ri, r in enumerate(records):
        n_gt += sum(1 for c, _ in r.gt if c == class_id)
        dets.extend((d.score, ri, di) for di, d in enumerate(r.detections) if d.class_id == class_id)
    dets.sort(key=lambda x: -x[0])

    tp = np.zeros((len(thresholds), len(dets)), dtype=np.float64)
    overlaps = {}
    for ri, r in enumerate(records):
        gt_boxes = [b for c, b in r.gt if c == class_id]
        det_boxes = [d.box for d in r.detections]
        overlaps[ri] = box_iou(as_boxes(det_boxes), as_boxes(gt_boxes))

    for t, thr in enumerate(thresholds):
        taken = {ri: np.zeros(overlaps[ri].shape[1], dtype=bool) for ri in overlaps}
        for k, (_, ri, di) in enumerate(dets):
            row = np.where(taken[ri], -1.0, overlaps[ri][di])
            if row.size == 0:
                continue
            g = int(np.argmax(row))
            if row[g] >= thr:
                taken[ri][g] = True
                tp[t, k] = 1.0
    return tp, n_gt


def average_precision(
    records: Sequence[EvalRecord], thresholds: Sequence[float] = COCO_IOU_THRESHOLDS
) -> Tuple[float, float, float]:
    """
    COCO-style ``(ap, ap50, ap75)``: per class and IoU threshold, greedy score-ranked matching
    with ``IoU >= threshold``, 101-point interpolated precision, then averaged over classes that
    have ground truth. ``ap50``/``ap75`` are 0 when their threshold is not in ``thresholds``.
    """
    _check_nonempty(records)
    thresholds = [float(t) for t in thresholds]
    classes = sorted({c for r in records for c, _ in r.gt})
    per_threshold = np.zeros((len(thresholds), len(classes)), dtype=np.float64)
    for k, class_id in enumerate(classes):
        tp, n_gt = _class_tp(records, class_id, thresholds)
        for t in range(len(thresholds)):
            per_threshold[t, k] = _interpolated_ap(tp[t], n_gt)

    by_threshold = per_threshold.mean(axis=1) if classes else np.zeros(len(thresholds))

    def at(value: float) -> float:
        hits = [i for i, t in enumerate(thresholds) if abs(t - value) < 1e-9]
        return float(by_threshold[hits[0]]) if hits else 0.0

    ap = float(by_threshold.mean()) if len(thresholds) else 0.0
    return ap, at(0.50), at(0.75)


@dataclass
class ScoreSummary:
    instance_sr: Dict[str, float]
    image_sr: Dict[str, float]
    miou: float
    ap: float
    ap50: float
    ap75: float
    n_images: int
    clip_t_mean: Optional[float] = None
    dino_mean: Optional[float] = None
    scorers: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        out = {
            "instance_sr": dict(self.instance_sr),
            "image_sr": dict(self.image_sr),
            "miou": self.miou,
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "n_images": self.n_images,
            "matcher": "greedy-coco",
            "pooling": "instances",
        }
        if self.clip_t_mean is not None:
            out["clip_t_mean"] = self.clip_t_mean
        if self.dino_mean is not None:
            out["dino_mean"] = self.dino_mean
        if self.scorers:
            out["scorers"] = dict(self.scorers)
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "ScoreSummary":
        keys = ("instance_sr", "image_sr", "miou", "ap", "ap50", "ap75", "n_images", "clip_t_mean", "dino_mean")
        return cls(**{k: data[k] for k in keys if k in data}, scorers=dict(data.get("scorers", {})))


def summarize(
    records: Sequence[EvalRecord],
    text_scorer=None,
    image_scorer=None,
    palette: Palette = DEFAULT_PALETTE,
) -> ScoreSummary:
    """
    All layout scores of ``records``; ``text_scorer``/``image_scorer`` (registered scorer names or
    configs) additionally fill ``clip_t_mean``/``dino_mean`` from crops of the matched detections.
    """
    _check_nonempty(records)
    matches = match_records(records)
    ap, ap50, ap75 = average_precision(records)
    summary = ScoreSummary(
        instance_sr=instance_success_ratio(records, matches),
        image_sr=image_success_ratio(records, matches),
        miou=mean_iou(records, matches),
        ap=ap,
        ap50=ap50,
        ap75=ap75,
        n_images=len(records),
    )
    if text_scorer is not None or image_scorer is not None:
        pairs = pairs_from_records(records, matches, palette)
        if text_scorer is not None:
            result = aggregate_similarity(pairs, text_scorer)
            summary.clip_t_mean = result.mean
            summary.scorers["clip_t"] = result.scorer
        if image_scorer is not None:
            result = aggregate_similarity(pairs, image_scorer)
            summary.dino_mean = result.mean
            summary.scorers["dino"] = result.scorer
    return summary
