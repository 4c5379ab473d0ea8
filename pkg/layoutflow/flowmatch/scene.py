from dataclasses import dataclass
from typing import Union
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from ..errors import NonFinite, OutOfRange, ShapeMismatch

__all__ = ["ToyScene"]


@dataclass(frozen=True)
class ToyScene:
    """``H x W x C`` float32 raster with every entry in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 3:
            raise ShapeMismatch(f"scene pixels must be H x W x C, got shape {pixels.shape}")
        if not np.isfinite(pixels).all():
            raise NonFinite("scene contains NaN or Inf")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise OutOfRange(f"scene intensities must lie in [0, 1], got [{pixels.min()}, {pixels.max()}]")
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def to_tensor(self) -> torch.Tensor:
        """``C x H x W`` float32 tensor."""
        return torch.from_numpy(np.ascontiguousarray(self.pixels.transpose(2, 0, 1)).copy())

    @classmethod
    def from_tensor(cls, tensor: torch.Tensor, clamp: bool = True) -> "ToyScene":
        t = tensor.detach().to(torch.float32).cpu()
        if clamp:
            t = t.clamp(0.0, 1.0)
        return cls(t.permute(1, 2, 0).numpy())

    def to_image(self) -> Image.Image:
        data = np.rint(self.pixels * 255.0).astype(np.uint8)
        return Image.fromarray(data if self.channels != 1 else data[..., 0])

    @classmethod
    def from_image(cls, image: Union[Image.Image, str, Path]) -> "ToyScene":
        if not isinstance(image, Image.Image):
            image = Image.open(image)
        data = np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0
        return cls(data)

    def __eq__(self, other) -> bool:
        return isinstance(other, ToyScene) and np.array_equal(self.pixels, other.pixels)
