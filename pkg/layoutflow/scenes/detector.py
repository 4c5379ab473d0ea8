"""Oracle detector for rendered and sampled toy scenes."""

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from ..errors import InvalidConfig
from ..flowmatch import ToyScene
from ..prompt import BBox, normalize_box
from .palette import Palette

__all__ = ["DetectedBox", "detect", "DEFAULT_TOLERANCE", "MIN_COMPONENT_AREA"]

DEFAULT_TOLERANCE = 0.25
MIN_COMPONENT_AREA = 4


@dataclass(frozen=True)
class DetectedBox:
    class_id: int
    box: BBox
    score: float

    def __post_init__(self):
        object.__setattr__(self, "box", self.box.checked())
        object.__setattr__(self, "score", float(min(max(self.score, 0.0), 1.0)))


def detect(
    scene: ToyScene,
    palette: Palette,
    tol: float = DEFAULT_TOLERANCE,
    min_area: int = MIN_COMPONENT_AREA,
) -> List[DetectedBox]:
    """
    Threshold every class color with an L-infinity tolerance, split the mask into 4-connected
    components and report each component of at least ``min_area`` pixels by its tight box.

    The score is the mean color match ``1 - d / tol`` over the component's pixels. Results are
    sorted by score, highest first; ties keep class order then component label order.
    """
    if not tol > 0:
        raise InvalidConfig("detect.tol", f"must be positive, got {tol}")
    palette.check_separable(tol)

    pixels = scene.pixels.astype(np.float64)
    H, W = scene.height, scene.width
    found: List[DetectedBox] = []
    for class_id, color in enumerate(palette.colors):
        dist = np.abs(pixels - np.asarray(color, dtype=np.float64)).max(axis=-1)
        mask = dist <= tol
        if not mask.any():
            continue
        labels, n = ndimage.label(mask)
        for sl, label in zip(ndimage.find_objects(labels), range(1, n + 1)):
            component = labels[sl] == label
            area = int(component.sum())
            if area < min_area:
                continue
            rows, cols = sl
            box = normalize_box((cols.start, rows.start, cols.stop, rows.stop), W, H)
            score = float(np.mean(1.0 - dist[sl][component] / tol))
            found.append(DetectedBox(class_id, box, score))

    found.sort(key=lambda d: -d.score)
    return found
