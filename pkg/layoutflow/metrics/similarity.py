"""
Pluggable crop similarity scorers.

A scorer is a registered class (group ``"scorer"``) whose instances map a ``CropPair`` to a score.
Scorers declare their output range: ``"unit"`` scores are used as is, ``"cosine"`` scores in
[-1, 1] are mapped to [0, 1].
"""

import math
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidConfig, ScorerFailure
from ..flowmatch import ToyScene
from ..loaders import create_from_config, register
from ..prompt import BBox
from ..scenes import DEFAULT_PALETTE, Palette
from ..utils.logging import LOGGER
from .matching import EvalRecord, MatchResult, iou

__all__ = [
    "CropPair",
    "SimilarityResult",
    "ConstantScorer",
    "BoxIoUScorer",
    "ColorMatchScorer",
    "aggregate_similarity",
    "pairs_from_records",
    "crop_scene",
    "build_scorer",
]


@dataclass(frozen=True)
class CropPair:
    """
    A generated crop and what it should show.

    ``box`` is the crop's box in the generated image (None when nothing was detected),
    ``reference_box`` the box it was asked for and ``text`` the subject phrase.
    """

    text: str
    box: Optional[BBox] = None
    reference_box: Optional[BBox] = None
    crop: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SimilarityResult:
    mean: Optional[float]
    scorer: str
    n_pairs: int
    n_failed: int


class Scorer(object):
    name = "scorer"
    output_range = "unit"

    def __call__(self, pair: CropPair) -> float:
        raise NotImplementedError


@register("scorer", name="constant")
class ConstantScorer(Scorer):
    name = "constant"

    def __init__(self, value: float = 0.5):
        self.value = float(value)

    def __call__(self, pair: CropPair) -> float:
        return self.value


@register("scorer", name="box_iou")
class BoxIoUScorer(Scorer):
    """IoU between the crop box and the requested box; a missing crop scores 0."""

    name = "box_iou"

    def __call__(self, pair: CropPair) -> float:
        if pair.reference_box is None:
            raise ScorerFailure(f"'{pair.text}' has no reference box")
        if pair.box is None:
            return 0.0
        return iou(pair.box, pair.reference_box)


@register("scorer", name="color_match")
class ColorMatchScorer(Scorer):
    """``1 - L_inf`` distance between the crop's mean color and the color the phrase names."""

    name = "color_match"

    def __init__(self, palette: Optional[Any] = None):
        if palette is None:
            palette = DEFAULT_PALETTE
        elif isinstance(palette, dict):
            palette = Palette.from_dict(palette)
        self.palette = palette

    def __call__(self, pair: CropPair) -> float:
        if pair.box is None:
            return 0.0
        if pair.crop is None or pair.crop.size == 0:
            raise ScorerFailure(f"no pixels to score for '{pair.text}'")
        color = np.asarray(self.palette.color(self.palette.class_id(pair.text)), dtype=np.float64)
        mean = pair.crop.reshape(-1, pair.crop.shape[-1]).astype(np.float64).mean(axis=0)
        return float(np.clip(1.0 - np.abs(mean - color).max(), 0.0, 1.0))


def build_scorer(spec: Any) -> Scorer:
    if isinstance(spec, Scorer):
        return spec
    scorer = create_from_config("scorer", spec)
    if scorer.output_range not in ("unit", "cosine"):
        raise InvalidConfig("scorer", f"unknown output range '{scorer.output_range}'")
    return scorer


def _to_unit(value: float, output_range: str) -> float:
    if output_range == "cosine":
        lo, value = -1.0, (value + 1.0) / 2.0
    else:
        lo = 0.0
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ScorerFailure(f"score {value} outside the {output_range} range (lower bound {lo})")
    return value


def aggregate_similarity(pairs: Sequence[CropPair], scorer: Any) -> SimilarityResult:
    """
    Mean score over ``pairs``. Pairs whose scorer call fails are excluded and counted; the mean is
    None when no pair could be scored.
    """
    scorer = build_scorer(scorer)
    scores, failed = [], 0
    for pair in pairs:
        try:
            scores.append(_to_unit(float(scorer(pair)), scorer.output_range))
        except ScorerFailure as e:
            failed += 1
            LOGGER.debug(f"Scorer {scorer.name} skipped a pair: {e}")
    if failed:
        LOGGER.warning(f"Scorer {scorer.name} failed on {failed} of {len(pairs)} pair(s)")
    mean = float(np.mean(scores)) if scores else None
    return SimilarityResult(mean, scorer.name, len(pairs), failed)


def crop_scene(scene: ToyScene, box: BBox) -> np.ndarray:
    """Pixels whose centers fall inside ``box``."""
    H, W = scene.height, scene.width
    r0, r1 = math.ceil(box.y1 * H - 0.5), math.ceil(box.y2 * H - 0.5)
    c0, c1 = math.ceil(box.x1 * W - 0.5), math.ceil(box.x2 * W - 0.5)
    return scene.pixels[max(r0, 0) : min(r1, H), max(c0, 0) : min(c1, W)]


def pairs_from_records(
    records: Sequence[EvalRecord], matches: Sequence[MatchResult], palette: Palette = DEFAULT_PALETTE
) -> Tuple[CropPair, ...]:
    """One pair per ground-truth instance, cropped at the detection it was matched to."""
    pairs = []
    for record, m in zip(records, matches):
        for (class_id, ref), d in zip(record.gt, m.matched):
            box = None if d is None else record.detections[d].box
            crop = crop_scene(record.scene, box) if (box is not None and record.scene is not None) else None
            pairs.append(CropPair(palette.names[class_id], box, ref, crop))
    return tuple(pairs)
