import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import torch

from ..errors import InvalidConfig, NonFinite, ShapeMismatch

__all__ = [
    "VelocityBatch",
    "BranchSet",
    "GuidanceScales",
    "NormConfig",
    "GuidanceConfig",
    "as_tensor",
    "check_same_shape",
]


@dataclass(frozen=True)
class VelocityBatch:
    """
    Predicted velocity for one latent state, shaped ``(C, H, W)`` or ``(dim,)``, optionally with a
    leading batch dimension (``batched=True``).
    """

    data: torch.Tensor
    batched: bool = False

    def __post_init__(self):
        data = self.data if isinstance(self.data, torch.Tensor) else torch.as_tensor(self.data)
        if not torch.is_floating_point(data):
            data = data.to(torch.get_default_dtype())
        if not bool(torch.isfinite(data).all()):
            raise NonFinite("velocity contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_flat(cls, values: Sequence[float], shape: Sequence[int], dtype=torch.float64) -> "VelocityBatch":
        shape = tuple(int(s) for s in shape)
        flat = torch.as_tensor(values, dtype=dtype).reshape(-1)
        if math.prod(shape) != flat.numel():
            raise ShapeMismatch(f"shape {shape} holds {math.prod(shape)} values, got {flat.numel()}")
        return cls(flat.reshape(shape))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def batch_dims(self) -> int:
        return 1 if self.batched else 0

    def flat(self) -> torch.Tensor:
        return self.data.reshape(-1)

    def with_data(self, data: torch.Tensor) -> "VelocityBatch":
        return VelocityBatch(data, self.batched)


Velocity = Union[VelocityBatch, torch.Tensor]


def as_tensor(v: Velocity) -> torch.Tensor:
    return v.data if isinstance(v, VelocityBatch) else v


def check_same_shape(*vs: Velocity) -> None:
    shapes = {tuple(as_tensor(v).shape) for v in vs}
    if len(shapes) > 1:
        raise ShapeMismatch(f"velocities disagree in shape: {sorted(shapes)}")


@dataclass
class BranchSet:
    """
    Model predictions under the condition sets guidance needs.

    v_full       every condition kept
    v_text_drop  text and coordinates dropped, image kept
    v_coord_drop coordinates dropped
    v_img_drop   image dropped, text and coordinates kept
    """

    v_full: Velocity
    v_text_drop: Optional[Velocity] = None
    v_coord_drop: Optional[Velocity] = None
    v_img_drop: Optional[Velocity] = None
    coord_enabled: bool = True
    img_enabled: bool = False

    def __post_init__(self):
        present = (self.v_full, self.v_text_drop, self.v_coord_drop, self.v_img_drop)
        check_same_shape(*(v for v in present if v is not None))


@dataclass(frozen=True)
class GuidanceScales:
    s_text: float = 1.0
    s_img: float = 1.0
    s_coord: float = 1.6

    def __post_init__(self):
        for name in ("s_text", "s_img", "s_coord"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidConfig(f"guidance.{name}", f"must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class NormConfig:
    domain: str = "global"
    epsilon: float = 1e-8

    DOMAINS = ("global", "per_channel")

    def __post_init__(self):
        domain = str(self.domain).lower().replace("-", "_")
        if domain == "perchannel":
            domain = "per_channel"
        if domain not in self.DOMAINS:
            raise InvalidConfig("guidance.norm.domain", f"expected one of {self.DOMAINS}, got {self.domain!r}")
        if not self.epsilon > 0:
            raise InvalidConfig("guidance.norm.epsilon", f"must be > 0, got {self.epsilon}")
        object.__setattr__(self, "domain", domain)


@dataclass(frozen=True)
class GuidanceConfig:
    """The ``guidance`` block of a harness config."""

    scales: GuidanceScales = GuidanceScales()
    coord_enabled: bool = True
    img_enabled: bool = False
    norm: Optional[NormConfig] = None
    norm_base: str = "text_cfg"

    BASES = ("text_cfg", "coord_drop")

    def __post_init__(self):
        if self.norm_base not in self.BASES:
            raise InvalidConfig("guidance.norm_base", f"expected one of {self.BASES}, got {self.norm_base!r}")

    @classmethod
    def from_dict(cls, cfg: Optional[Dict[str, Any]]) -> "GuidanceConfig":
        cfg = dict(cfg or {})
        known = {"s_text", "s_img", "s_coord", "coord_enabled", "img_enabled", "norm", "norm_base"}
        unknown = set(cfg) - known
        if unknown:
            raise InvalidConfig("guidance", f"unknown keys {sorted(unknown)}")
        scales = GuidanceScales(
            s_text=cfg.get("s_text", 1.0),
            s_img=cfg.get("s_img", 1.0),
            s_coord=cfg.get("s_coord", 1.6),
        )
        norm = cfg.get("norm")
        return cls(
            scales=scales,
            coord_enabled=bool(cfg.get("coord_enabled", True)),
            img_enabled=bool(cfg.get("img_enabled", False)),
            norm=NormConfig(**norm) if norm else None,
            norm_base=cfg.get("norm_base", "text_cfg"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s_text": self.scales.s_text,
            "s_img": self.scales.s_img,
            "s_coord": self.scales.s_coord,
            "coord_enabled": self.coord_enabled,
            "img_enabled": self.img_enabled,
            "norm": None if self.norm is None else {"domain": self.norm.domain, "epsilon": self.norm.epsilon},
            "norm_base": self.norm_base,
        }

    def with_coord_scale(self, s_coord: float) -> "GuidanceConfig":
        return GuidanceConfig(
            GuidanceScales(self.scales.s_text, self.scales.s_img, s_coord),
            self.coord_enabled,
            self.img_enabled,
            self.norm,
            self.norm_base,
        )
