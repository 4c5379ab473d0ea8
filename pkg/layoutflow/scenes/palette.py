from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..errors import InvalidConfig, UnknownClass

__all__ = ["Palette", "DEFAULT_PALETTE"]

Color = Tuple[float, float, float]


@dataclass(frozen=True)
class Palette:
    """Class names and their RGB colors in [0, 1]; ``background`` fills unpainted pixels."""

    names: Tuple[str, ...]
    colors: Tuple[Color, ...]
    background: Color = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "colors", tuple(tuple(float(c) for c in col) for col in self.colors))
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        if len(self.names) != len(self.colors):
            raise InvalidConfig("palette", f"{len(self.names)} names but {len(self.colors)} colors")
        everything = list(self.colors) + [self.background]
        if len(set(everything)) != len(everything):
            raise InvalidConfig("palette", "class colors must be pairwise distinct and differ from the background")

    def __len__(self) -> int:
        return len(self.names)

    def color(self, class_id: int) -> Color:
        if not 0 <= class_id < len(self.colors):
            raise UnknownClass(f"class id {class_id} outside palette of {len(self.colors)} classes")
        return self.colors[class_id]

    def class_id(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownClass(f"'{name}' is not a palette class {list(self.names)}") from None

    def min_separation(self) -> float:
        """Smallest L-infinity distance between two colors, background included."""
        cols = np.asarray(list(self.colors) + [self.background], dtype=np.float64)
        d = np.abs(cols[:, None, :] - cols[None, :, :]).max(axis=-1)
        d[np.eye(len(cols), dtype=bool)] = np.inf
        return float(d.min())

    def check_separable(self, tol: float) -> None:
        if self.min_separation() < 2 * tol:
            raise InvalidConfig(
                "palette", f"colors closer than 2 x tolerance ({self.min_separation()} < {2 * tol}) are ambiguous"
            )

    @classmethod
    def from_dict(cls, cfg) -> "Palette":
        return cls(tuple(cfg["names"]), tuple(tuple(c) for c in cfg["colors"]), tuple(cfg.get("background", (0, 0, 0))))

    def subset(self, names: Sequence[str]) -> "Palette":
        return Palette(tuple(names), tuple(self.color(self.class_id(n)) for n in names), self.background)


DEFAULT_PALETTE = Palette(
    names=(
        "red_rect",
        "green_rect",
        "blue_rect",
        "yellow_rect",
        "magenta_rect",
        "cyan_rect",
        "white_rect",
        "gray_rect",
    ),
    colors=(
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
        (1.0, 1.0, 0.0),
        (1.0, 0.0, 1.0),
        (0.0, 1.0, 1.0),
        (1.0, 1.0, 1.0),
        (0.5, 0.5, 0.5),
    ),
)
