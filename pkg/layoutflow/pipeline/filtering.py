from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..errors import InvalidConfig, OutOfRange
from ..prompt import BBox
from ..utils.box_ops import as_boxes, box_iou
from ..utils.logging import LOGGER

__all__ = ["Candidate", "FilterConfig", "FilterResult", "filter_candidates", "crop_gate", "refine_gate"]

CLIP_T_GATE = 0.25
CLIP_I_GATE = 0.50


@dataclass(frozen=True)
class Candidate:
    box: BBox
    score: float

    def __post_init__(self):
        object.__setattr__(self, "box", self.box.checked())


@dataclass(frozen=True)
class FilterConfig:
    area_min: float = 0.20
    area_max: float = 0.60
    dedup_iou: float = 0.9
    min_subjects: int = 3

    def __post_init__(self):
        if not 0 <= self.area_min <= self.area_max <= 1:
            raise InvalidConfig("filter", f"need 0 <= area_min <= area_max <= 1, got {self.area_min}, {self.area_max}")
        if not 0 < self.dedup_iou <= 1:
            raise InvalidConfig("filter.dedup_iou", f"must lie in (0, 1], got {self.dedup_iou}")

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "FilterConfig":
        cfg = dict(cfg or {})
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig("filter", f"unknown keys {sorted(unknown)}")
        return cls(**cfg)


@dataclass(frozen=True)
class FilterResult:
    kept: Tuple[int, ...]
    accepted: bool
    reasons: Tuple[str, ...] = field(default_factory=tuple)


def filter_candidates(candidates: Sequence[Candidate], cfg: FilterConfig = FilterConfig()) -> FilterResult:
    """
    Keep candidate boxes whose normalized area lies in ``[area_min, area_max]``, then drop
    near-duplicates: of two boxes with IoU >= ``dedup_iou`` the higher score survives, ties going
    to the lower index. The image is rejected with ``TooFewSubjects`` when fewer than
    ``min_subjects`` remain. ``kept`` lists surviving indices in input order.
    """
    in_range = []
    for i, c in enumerate(candidates):
        if cfg.area_min <= c.box.area <= cfg.area_max:
            in_range.append(i)
        else:
            LOGGER.debug(f"Dropping candidate {i}: area {c.box.area:.3f} outside [{cfg.area_min}, {cfg.area_max}]")

    order = sorted(in_range, key=lambda i: (-candidates[i].score, i))
    overlap = box_iou(as_boxes([c.box for c in candidates]), as_boxes([c.box for c in candidates]))
    kept: List[int] = []
    for i in order:
        if any(overlap[i, k] >= cfg.dedup_iou for k in kept):
            LOGGER.debug(f"Dropping candidate {i}: duplicate of a higher-scored box")
            continue
        kept.append(i)

    kept.sort()
    if len(kept) < cfg.min_subjects:
        return FilterResult(tuple(kept), False, ("TooFewSubjects",))
    return FilterResult(tuple(kept), True)


def _unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise OutOfRange(f"{name}={value} must lie in [0, 1]")
    return value


def crop_gate(s_t: float, threshold: float = CLIP_T_GATE) -> bool:
    """Text-crop similarity check; passes at the threshold itself."""
    return _unit("s_t", s_t) >= threshold


def refine_gate(s_t: float, s_i: float, t_min: float = CLIP_T_GATE, i_min: float = CLIP_I_GATE) -> bool:
    """Refined subject versus its crop: both the text and the image similarity must reach their minimum."""
    return _unit("s_t", s_t) >= t_min and _unit("s_i", s_i) >= i_min
