from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from ..errors import InvalidConfig, RejectionExhausted
from ..flowmatch import ToyScene
from ..prompt import BBox, InstanceTag, LayoutDocument, LayoutPrompt, normalize_box
from ..utils.box_ops import as_boxes, box_iou
from .palette import DEFAULT_PALETTE, Palette

__all__ = ["LayoutSpec", "LayoutSamplerConfig", "sample_layout", "render", "instance_masks"]

Instance = Tuple[int, BBox]


@dataclass(frozen=True)
class LayoutSpec:
    instances: Tuple[Instance, ...]
    height: int = 32
    width: int = 32
    palette: Palette = DEFAULT_PALETTE

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple((int(c), b.checked()) for c, b in self.instances))
        for class_id, _ in self.instances:
            self.palette.color(class_id)

    @property
    def level(self) -> int:
        return len(self.instances)

    @property
    def boxes(self) -> List[BBox]:
        return [b for _, b in self.instances]

    @property
    def class_ids(self) -> List[int]:
        return [c for c, _ in self.instances]

    def to_prompt(self) -> LayoutPrompt:
        """``a red_rect <bbox>[...]</bbox>, a green_rect <bbox>[...]</bbox> and a blue_rect <bbox>[...]</bbox>.``"""
        parts: List[Any] = []
        n = len(self.instances)
        for i, (class_id, box) in enumerate(self.instances):
            if i > 0:
                parts.append(" and a " if i == n - 1 else ", a ")
            else:
                parts.append("a ")
            parts.append(InstanceTag(self.palette.names[class_id], 1, (box,)))
        if n:
            parts.append(".")
        return LayoutPrompt.from_parts(*parts)

    def to_document(self) -> LayoutDocument:
        prompt = self.to_prompt()
        return LayoutDocument(prompt.original_caption, list(prompt.tags))

    @classmethod
    def from_document(
        cls, doc: LayoutDocument, height: int = 32, width: int = 32, palette: Palette = DEFAULT_PALETTE
    ) -> "LayoutSpec":
        instances = []
        for tag in doc.instances:
            class_id = palette.class_id(tag.subject_phrase)
            instances.extend((class_id, b) for b in tag.boxes)
        return cls(tuple(instances), height, width, palette)


@dataclass(frozen=True)
class LayoutSamplerConfig:
    n_min: int = 2
    n_max: int = 6
    min_side: float = 0.125
    max_side: float = 0.5
    max_overlap_iou: float = 0.1
    max_attempts: int = 1000
    height: int = 32
    width: int = 32
    # reject placements that split or clip an earlier instance's visible region
    keep_visible: bool = True

    def __post_init__(self):
        if not 2 <= self.n_min <= self.n_max <= 6:
            raise InvalidConfig("layout", f"need 2 <= n_min <= n_max <= 6, got {self.n_min}, {self.n_max}")
        if not 0 < self.min_side <= self.max_side <= 1:
            raise InvalidConfig("layout", f"need 0 < min_side <= max_side <= 1, got {self.min_side}, {self.max_side}")
        if not 0 <= self.max_overlap_iou <= 1:
            raise InvalidConfig("layout.max_overlap_iou", f"must lie in [0, 1], got {self.max_overlap_iou}")
        if round(self.min_side * self.width) * round(self.min_side * self.height) < 4:
            raise InvalidConfig("layout.min_side", "boxes must cover at least 4 pixels at render resolution")

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "LayoutSamplerConfig":
        cfg = dict(cfg or {})
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig("layout", f"unknown keys {sorted(unknown)}")
        return cls(**cfg)


def _pixel_span(lo: float, hi: float, size: int) -> np.ndarray:
    """Pixels whose centers fall in ``[lo * size, hi * size)``."""
    centers = np.arange(size) + 0.5
    return (centers >= lo * size) & (centers < hi * size)


def instance_masks(spec: LayoutSpec) -> List[np.ndarray]:
    """Boolean ``H x W`` mask of each instance's box, before occlusion."""
    masks = []
    for _, b in spec.instances:
        rows = _pixel_span(b.y1, b.y2, spec.height)
        cols = _pixel_span(b.x1, b.x2, spec.width)
        masks.append(rows[:, None] & cols[None, :])
    return masks


def render(spec: LayoutSpec) -> ToyScene:
    """Paint instances over the background in order; later instances cover earlier ones."""
    canvas = np.empty((spec.height, spec.width, 3), dtype=np.float32)
    canvas[:] = np.asarray(spec.palette.background, dtype=np.float32)
    for (class_id, _), mask in zip(spec.instances, instance_masks(spec)):
        canvas[mask] = np.asarray(spec.palette.color(class_id), dtype=np.float32)
    return ToyScene(canvas)


def _visible_intact(masks: Sequence[np.ndarray]) -> bool:
    """Every instance still shows as one 4-connected region with its full bounding box."""
    covered = np.zeros_like(masks[0])
    for i in range(len(masks) - 1, -1, -1):
        visible = masks[i] & ~covered
        covered |= masks[i]
        _, n = ndimage.label(visible)
        if n != 1:
            return False
        rows, cols = np.nonzero(visible)
        full_rows, full_cols = np.nonzero(masks[i])
        if (rows.min(), rows.max(), cols.min(), cols.max()) != (
            full_rows.min(),
            full_rows.max(),
            full_cols.min(),
            full_cols.max(),
        ):
            return False
    return True


def sample_layout(
    seed: int, cfg: LayoutSamplerConfig = LayoutSamplerConfig(), palette: Palette = DEFAULT_PALETTE
) -> LayoutSpec:
    """
    Draw a layout: instance count uniform in ``[n_min, n_max]``, distinct classes, pixel-aligned
    boxes with sides in ``[min_side, max_side]``, placed by rejection until pairwise IoU is at most
    ``max_overlap_iou``.
    """
    if cfg.n_max > len(palette):
        raise InvalidConfig("layout.n_max", f"{cfg.n_max} instances need as many classes, palette has {len(palette)}")
    rng = np.random.default_rng(seed)
    H, W = cfg.height, cfg.width
    n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    class_ids = [int(c) for c in rng.choice(len(palette), size=n, replace=False)]

    lo_w, hi_w = max(int(round(cfg.min_side * W)), 1), max(int(round(cfg.max_side * W)), 1)
    lo_h, hi_h = max(int(round(cfg.min_side * H)), 1), max(int(round(cfg.max_side * H)), 1)

    attempts = 0
    boxes: List[BBox] = []
    while len(boxes) < n:
        if attempts >= cfg.max_attempts:
            raise RejectionExhausted(
                f"could not place {n} boxes with IoU <= {cfg.max_overlap_iou} in {cfg.max_attempts} attempts"
            )
        attempts += 1
        w = int(rng.integers(lo_w, hi_w + 1))
        h = int(rng.integers(lo_h, hi_h + 1))
        x = int(rng.integers(0, W - w + 1))
        y = int(rng.integers(0, H - h + 1))
        candidate = normalize_box((x, y, x + w, y + h), W, H)
        if boxes and box_iou(as_boxes([candidate]), as_boxes(boxes)).max() > cfg.max_overlap_iou:
            continue
        if cfg.keep_visible and boxes:
            trial = LayoutSpec(tuple(zip(class_ids, boxes + [candidate])), H, W, palette)
            if not _visible_intact(instance_masks(trial)):
                continue
        boxes.append(candidate)

    return LayoutSpec(tuple(zip(class_ids, boxes)), H, W, palette)
