"""Reference placement and subject sampling for corpus construction."""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, TypeVar

from ..errors import InvalidConfig, NoValidPlacement
from ..prompt import BBox, round3
from ..utils.seeding import STAGE_PLACEMENT, STAGE_SUBJECTS, numpy_rng

__all__ = ["PlacementConfig", "sample_placement", "sample_subject_set"]

T = TypeVar("T")


@dataclass(frozen=True)
class PlacementConfig:
    r_min: float = 0.6
    r_max: float = 0.8
    canvas_width: int = 512
    canvas_height: int = 512

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max <= 1:
            raise InvalidConfig("placement", f"need 0 < r_min <= r_max <= 1, got {self.r_min}, {self.r_max}")
        if self.canvas_width <= 0 or self.canvas_height <= 0:
            raise InvalidConfig("placement", f"canvas must be non-empty, got {self.canvas_width}x{self.canvas_height}")

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "PlacementConfig":
        cfg = dict(cfg or {})
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig("placement", f"unknown keys {sorted(unknown)}")
        return cls(**cfg)


def _source_extent(cfg: PlacementConfig, aspect: float, source_size: Optional[Tuple[int, int]]) -> Tuple[float, float]:
    """Source size as fractions of the canvas; without ``source_size`` the aspect is fit inside the canvas."""
    if source_size is not None:
        w, h = source_size
        if w <= 0 or h <= 0:
            raise NoValidPlacement(f"source size must be positive, got {w}x{h}")
        return w / cfg.canvas_width, h / cfg.canvas_height
    if not aspect > 0:
        raise NoValidPlacement(f"aspect ratio must be positive, got {aspect}")
    canvas_aspect = cfg.canvas_width / cfg.canvas_height
    if aspect >= canvas_aspect:
        return 1.0, canvas_aspect / aspect
    return aspect / canvas_aspect, 1.0


def sample_placement(
    seed: int,
    cfg: PlacementConfig = PlacementConfig(),
    aspect: float = 1.0,
    source_size: Optional[Tuple[int, int]] = None,
    index: int = 0,
) -> Tuple[float, BBox]:
    """
    Scale the reference by ``r ~ U(r_min, r_max)`` (aspect kept) and put it at a uniformly drawn
    position fully inside the canvas. Returns ``r`` and the normalized box.
    """
    rng = numpy_rng(seed, STAGE_PLACEMENT, index)
    r = float(rng.uniform(cfg.r_min, cfg.r_max)) if cfg.r_max > cfg.r_min else cfg.r_min
    sw, sh = _source_extent(cfg, aspect, source_size)
    bw, bh = r * sw, r * sh
    if bw > 1.0 or bh > 1.0:
        raise NoValidPlacement(f"a {bw:.3f} x {bh:.3f} box (r={r:.3f}) does not fit the canvas")
    # width and height are rounded once; corners are not rounded independently
    bw, bh = round3(bw), round3(bh)
    x1 = round3(rng.uniform(0.0, 1.0 - bw)) if bw < 1.0 else 0.0
    y1 = round3(rng.uniform(0.0, 1.0 - bh)) if bh < 1.0 else 0.0
    box = BBox(x1, y1, round3(x1 + bw), round3(y1 + bh))
    if not box.is_valid:
        raise NoValidPlacement(f"r={r:.3f} leaves a degenerate box {box.as_tuple()} at 3-decimal precision")
    return r, box


def sample_subject_set(seed: int, bank: Sequence[T], k_min: int = 2, k_max: int = 4, index: int = 0) -> List[T]:
    """Draw ``K ~ U{k_min..k_max}`` distinct entries of ``bank``, in draw order."""
    if not 1 <= k_min <= k_max:
        raise InvalidConfig("subjects", f"need 1 <= k_min <= k_max, got {k_min}, {k_max}")
    if len(bank) < k_max:
        raise InvalidConfig("subjects.bank", f"bank holds {len(bank)} subject(s), k_max is {k_max}")
    rng = numpy_rng(seed, STAGE_SUBJECTS, index)
    k = int(rng.integers(k_min, k_max + 1))
    return [bank[int(i)] for i in rng.choice(len(bank), size=k, replace=False)]
