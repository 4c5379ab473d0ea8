"""Normalized boxes with a fixed 3-decimal grid."""

import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from typing import List, Sequence, Tuple

from ..errors import DegenerateBox, OutOfRange

__all__ = ["BBox", "round3", "normalize_box", "format_coord", "format_box"]

_GRID = Decimal("0.001")


def round3(value) -> float:
    """Round half-up to 3 decimals. Floats go through their shortest repr, so 0.3335 -> 0.334."""
    if not isinstance(value, (str, int, Decimal)):
        value = float(value)
        if not math.isfinite(value):
            return value
        value = repr(value)
    return float(Decimal(value).quantize(_GRID, rounding=ROUND_HALF_UP)) + 0.0


@dataclass(frozen=True)
class BBox:
    """
    Axis-aligned box in normalized image coordinates, corners ``(x1, y1)`` top-left and
    ``(x2, y2)`` bottom-right. Coordinates are rounded to 3 decimals on construction; validity is
    checked separately (``violations`` / ``checked``) so that invalid boxes can still be reported.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, round3(getattr(self, name)))

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(self.width, 0.0) * max(self.height, 0.0)

    def violations(self) -> List[str]:
        coords = self.as_tuple()
        if not all(math.isfinite(c) and 0.0 <= c <= 1.0 for c in coords):
            return ["OutOfRange"]
        if self.x1 > self.x2 or self.y1 > self.y2:
            return ["OutOfRange"]
        if self.x1 == self.x2 or self.y1 == self.y2:
            return ["DegenerateBox"]
        return []

    @property
    def is_valid(self) -> bool:
        return not self.violations()

    def checked(self) -> "BBox":
        problems = self.violations()
        if "OutOfRange" in problems:
            raise OutOfRange(f"box {self.as_tuple()} must satisfy 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1")
        if "DegenerateBox" in problems:
            raise DegenerateBox(f"box {self.as_tuple()} has zero width or height")
        return self

    @classmethod
    def from_seq(cls, values: Sequence[float]) -> "BBox":
        if len(values) != 4:
            raise OutOfRange(f"a box needs 4 coordinates, got {len(values)}")
        return cls(*(float(v) for v in values)).checked()


def normalize_box(pixel_box: Sequence[int], width: int, height: int) -> BBox:
    """
    Convert a pixel box ``(x1, y1, x2, y2)`` to a normalized ``BBox``.

    Example:
        >>> normalize_box((100, 200, 300, 400), 1000, 1000)
        BBox(x1=0.1, y1=0.2, x2=0.3, y2=0.4)
    """
    if width <= 0 or height <= 0:
        raise OutOfRange(f"image size must be positive, got {width}x{height}")
    x1, y1, x2, y2 = (int(v) for v in pixel_box)
    if not (0 <= x1 <= x2 <= width and 0 <= y1 <= y2 <= height):
        raise OutOfRange(f"pixel box {tuple(pixel_box)} is unordered or outside a {width}x{height} image")

    w, h = Decimal(width), Decimal(height)
    coords = [
        (Decimal(v) / d).quantize(_GRID, rounding=ROUND_HALF_UP) for v, d in ((x1, w), (y1, h), (x2, w), (y2, h))
    ]
    return BBox(*coords).checked()


def format_coord(value: float) -> str:
    text = f"{round3(value):.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def format_box(b: BBox) -> str:
    return "<bbox>[" + ",".join(format_coord(c) for c in b.as_tuple()) + "]</bbox>"
