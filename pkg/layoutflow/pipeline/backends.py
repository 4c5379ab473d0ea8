"""Deterministic stand-ins for the generative steps of corpus construction."""

import math
from typing import Any, Dict, Optional, Tuple

from PIL import Image

from ..loaders import register
from ..prompt import BBox
from .assignment import Assignment, Verdict

__all__ = ["CopyPasteOutpainter", "verdict_to_dict"]


@register("outpainter", name="copy_paste")
class CopyPasteOutpainter(object):
    """Resize the reference into the box and paste it onto a blank canvas."""

    def __init__(self, background: Tuple[int, int, int] = (255, 255, 255), resample: str = "BICUBIC"):
        self.background = tuple(background)
        self.resample = getattr(Image.Resampling, resample)

    def box_pixels(self, box: BBox, canvas_size: Tuple[int, int]) -> Tuple[int, int, int, int]:
        W, H = canvas_size
        x1, y1 = int(round(box.x1 * W)), int(round(box.y1 * H))
        x2, y2 = max(int(round(box.x2 * W)), x1 + 1), max(int(round(box.y2 * H)), y1 + 1)
        return x1, y1, min(x2, W), min(y2, H)

    def compose(self, reference: Image.Image, box: BBox, canvas_size: Tuple[int, int]) -> Image.Image:
        canvas = Image.new("RGB", tuple(canvas_size), self.background)
        x1, y1, x2, y2 = self.box_pixels(box, canvas_size)
        patch = reference.convert("RGB").resize((x2 - x1, y2 - y1), self.resample)
        canvas.paste(patch, (x1, y1))
        return canvas


def verdict_to_dict(scene_id: str, assignment: Optional[Assignment], verdict: Verdict) -> Dict[str, Any]:
    pairs = None
    total: Optional[float] = None
    if assignment is not None and assignment.pairs:
        pairs = [[int(i), int(j)] for i, j in assignment.pairs]
    if assignment is not None and math.isfinite(assignment.total_cost):
        total = float(assignment.total_cost)
    return {
        "scene_id": str(scene_id),
        "assignment": pairs,
        "total_cost": total,
        "verdict": verdict.label,
        "reasons": list(verdict.reasons),
    }
