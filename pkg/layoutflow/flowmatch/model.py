import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidConfig
from .condition import ROW_WIDTH

__all__ = ["ModelConfig", "SinusoidalTimeEmbedding", "VelocityMLP", "layout_canvas"]


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 256
    time_dim: int = 32
    prediction: str = "velocity"
    t_floor: float = 0.05
    # width of the per-pixel layout pathway, 0 disables it
    pixel_hidden: int = 32

    PREDICTIONS = ("velocity", "data")

    def __post_init__(self):
        if self.prediction not in self.PREDICTIONS:
            raise InvalidConfig("model.prediction", f"expected one of {self.PREDICTIONS}, got {self.prediction!r}")
        if self.hidden_dim < 1 or self.time_dim < 2:
            raise InvalidConfig("model", f"hidden_dim must be >= 1 and time_dim >= 2, got {self}")
        if self.pixel_hidden < 0:
            raise InvalidConfig("model.pixel_hidden", f"must be >= 0, got {self.pixel_hidden}")
        if not 0 < self.t_floor <= 1:
            raise InvalidConfig("model.t_floor", f"must lie in (0, 1], got {self.t_floor}")

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "ModelConfig":
        return cls(**(cfg or {}))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class SinusoidalTimeEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        scale = math.log(10000.0) / max(half - 1, 1)
        freqs = torch.exp(torch.arange(half, dtype=t.dtype, device=t.device) * -scale)
        args = t[:, None] * freqs[None, :]
        emb = torch.cat([args.sin(), args.cos()], dim=-1)
        if self.dim % 2 == 1:
            emb = F.pad(emb, (0, 1))
        return emb


def layout_canvas(cond: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """
    Rasterize the mean box of every pooled condition row into a ``[B, rows, H, W]`` occupancy map.

    A pixel is inside when its center lies in ``[x1, x2) x [y1, y2)``, the rule ``scenes.render``
    paints with. Dropped coordinates are all zero and give an empty map.
    """
    batch = cond.shape[0]
    boxes = cond.reshape(batch, -1, ROW_WIDTH)[..., 1:]
    cols = torch.arange(width, dtype=cond.dtype, device=cond.device) + 0.5
    rows = torch.arange(height, dtype=cond.dtype, device=cond.device) + 0.5
    in_x = (cols >= boxes[..., 0:1] * width) & (cols < boxes[..., 2:3] * width)
    in_y = (rows >= boxes[..., 1:2] * height) & (rows < boxes[..., 3:4] * height)
    return (in_y[..., :, None] & in_x[..., None, :]).to(cond.dtype)


class VelocityMLP(nn.Module):
    """
    Two-hidden-layer network ``(x_t, t, pooled condition) -> velocity`` over a flattened scene.

    The time and condition features are fed to both hidden layers. A second, per-pixel pathway
    (two 1x1 convolutions) reads the noisy pixel, ``t`` and the rasterized condition boxes, and its
    output is added to the head. With ``prediction="data"`` the summed output predicts the data
    endpoint and the velocity is ``(x0_hat - x_t) / max(t, t_floor)``.
    """

    def __init__(self, scene_shape: Sequence[int], cond_dim: int, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.scene_shape: Tuple[int, ...] = tuple(int(s) for s in scene_shape)
        self.scene_dim = math.prod(self.scene_shape)
        self.cond_dim = int(cond_dim)
        self.cfg = cfg

        side = cfg.time_dim + self.cond_dim
        self.time_embed = SinusoidalTimeEmbedding(cfg.time_dim)
        self.fc1 = nn.Linear(self.scene_dim + side, cfg.hidden_dim)
        self.fc2 = nn.Linear(cfg.hidden_dim + side, cfg.hidden_dim)
        self.head = nn.Linear(cfg.hidden_dim, self.scene_dim)

        self.pixel = None
        if cfg.pixel_hidden > 0:
            if len(self.scene_shape) != 3 or self.cond_dim % ROW_WIDTH:
                raise InvalidConfig(
                    "model.pixel_hidden",
                    f"the layout pathway needs a (C, H, W) scene and pooled rows of {ROW_WIDTH}, "
                    f"got {self.scene_shape} and cond_dim {self.cond_dim}",
                )
            channels = self.scene_shape[0]
            in_channels = channels + self.cond_dim // ROW_WIDTH + 1
            self.pixel = nn.Sequential(
                nn.Conv2d(in_channels, cfg.pixel_hidden, kernel_size=1),
                nn.SiLU(),
                nn.Conv2d(cfg.pixel_hidden, channels, kernel_size=1),
            )

    def forward(self, x: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        batch = x.shape[0]
        x_flat = x.reshape(batch, self.scene_dim)
        t = t.reshape(batch).to(x.dtype)
        cond = cond.reshape(batch, self.cond_dim).to(x.dtype)
        side = torch.cat([self.time_embed(t), cond], dim=-1)

        h = F.silu(self.fc1(torch.cat([x_flat, side], dim=-1)))
        h = F.silu(self.fc2(torch.cat([h, side], dim=-1)))
        out = self.head(h)

        if self.pixel is not None:
            _, height, width = self.scene_shape
            grid = x_flat.reshape(batch, *self.scene_shape)
            t_map = t[:, None, None, None].expand(batch, 1, height, width)
            feats = torch.cat([grid, layout_canvas(cond, height, width), t_map], dim=1)
            out = out + self.pixel(feats).reshape(batch, self.scene_dim)

        if self.cfg.prediction == "data":
            out = (out - x_flat) / t.clamp(min=self.cfg.t_floor)[:, None]
        return out.reshape(x.shape)

    def layer_shapes(self) -> List[List[int]]:
        return [list(p.shape) for p in self.parameters()]

    def spec(self) -> Dict[str, Any]:
        return {"scene_shape": list(self.scene_shape), "cond_dim": self.cond_dim, **self.cfg.to_dict()}

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> "VelocityMLP":
        spec = dict(spec)
        scene_shape = spec.pop("scene_shape")
        cond_dim = spec.pop("cond_dim")
        return cls(scene_shape, cond_dim, ModelConfig.from_dict(spec))
