from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import torch

from ..errors import InvalidConfig, NonFinite
from ..guidance import BranchSet, GuidanceConfig, VelocityBatch, hierarchical_fuse
from ..prompt import LayoutPrompt
from ..utils.seeding import STAGE_SAMPLE, torch_generator
from .condition import DROP_ALL, DROP_COORD, FULL, ClassVocab, encode_condition, stack_pooled
from .model import VelocityMLP
from .path import shift_timestep
from .scene import ToyScene

__all__ = ["SamplerConfig", "sample", "sample_batch", "timestep_schedule"]


@dataclass
class SamplerConfig:
    num_steps: int = 20
    timestep_shift: float = 4.0
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0
    batch_size: int = 256

    def __post_init__(self):
        if isinstance(self.guidance, dict):
            self.guidance = GuidanceConfig.from_dict(self.guidance)
        if self.num_steps < 1:
            raise InvalidConfig("sampler.num_steps", f"must be >= 1, got {self.num_steps}")
        if self.timestep_shift < 1:
            raise InvalidConfig("sampler.timestep_shift", f"must be >= 1, got {self.timestep_shift}")

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any], guidance: Dict[str, Any] = None) -> "SamplerConfig":
        cfg = dict(cfg or {})
        if guidance is not None:
            cfg["guidance"] = guidance
        unknown = set(cfg) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig("sampler", f"unknown keys {sorted(unknown)}")
        return cls(**cfg)


def timestep_schedule(num_steps: int, shift: float) -> torch.Tensor:
    """``num_steps + 1`` times running from 1 (noise) down to 0 (data)."""
    u = torch.linspace(1.0, 0.0, num_steps + 1, dtype=torch.float64)
    return shift_timestep(u, shift)


def initial_noise(cfg: SamplerConfig, scene_shape: Sequence[int], index: int) -> torch.Tensor:
    gen = torch_generator(cfg.seed, STAGE_SAMPLE, index)
    return torch.randn(tuple(scene_shape), generator=gen, dtype=torch.float32)


@torch.no_grad()
def _integrate(model: VelocityMLP, x: torch.Tensor, conds: Dict[str, torch.Tensor], cfg: SamplerConfig) -> torch.Tensor:
    guidance = cfg.guidance
    names = list(conds)
    cond_all = torch.cat([conds[k] for k in names])
    batch = x.shape[0]
    times = timestep_schedule(cfg.num_steps, cfg.timestep_shift)

    for k in range(cfg.num_steps):
        t_now, t_next = float(times[k]), float(times[k + 1])
        x_rep = x.repeat(len(names), *([1] * (x.ndim - 1)))
        t_rep = torch.full((batch * len(names),), t_now, dtype=x.dtype)
        preds = dict(zip(names, model(x_rep, t_rep, cond_all).split(batch)))

        branches = BranchSet(
            v_full=VelocityBatch(preds["full"], batched=True),
            v_text_drop=VelocityBatch(preds["text_drop"], batched=True),
            v_coord_drop=VelocityBatch(preds["coord_drop"], batched=True) if "coord_drop" in preds else None,
            # the toy generator has no image condition, so dropping it changes nothing
            v_img_drop=VelocityBatch(preds["full"], batched=True),
            coord_enabled="coord_drop" in preds,
            img_enabled=guidance.img_enabled,
        )
        v = hierarchical_fuse(branches, guidance.scales, guidance.norm, guidance.norm_base)
        x = x + (t_now - t_next) * v.data
        if not bool(torch.isfinite(x).all()):
            raise NonFinite(f"sampler state became non-finite at step {k}")
    return x


def sample_batch(
    model: VelocityMLP,
    prompts: Sequence[LayoutPrompt],
    cfg: SamplerConfig,
    vocab: ClassVocab,
    start_index: int = 0,
    use_coords: bool = True,
) -> List[ToyScene]:
    """
    Euler-integrate from seeded Gaussian noise at t=1 to the data end t=0, guiding every step.

    Sample ``i`` draws its noise from ``(cfg.seed, sample stage, start_index + i)``, so a prompt's
    starting noise does not depend on which other prompts share its batch. With ``use_coords``
    off the conditioned branch never sees box coordinates and the coordinate branch is skipped.
    """
    scenes: List[ToyScene] = []
    for lo in range(0, len(prompts), cfg.batch_size):
        chunk = prompts[lo : lo + cfg.batch_size]
        x = torch.stack([initial_noise(cfg, model.scene_shape, start_index + lo + i) for i in range(len(chunk))])
        conds = {
            "full": stack_pooled(encode_condition(p, vocab, FULL if use_coords else DROP_COORD) for p in chunk),
            "text_drop": stack_pooled(encode_condition(p, vocab, DROP_ALL) for p in chunk),
        }
        if cfg.guidance.coord_enabled and use_coords:
            conds["coord_drop"] = stack_pooled(encode_condition(p, vocab, DROP_COORD) for p in chunk)
        x = _integrate(model, x, conds, cfg)
        scenes.extend(ToyScene.from_tensor(xi, clamp=True) for xi in x)
    return scenes


def sample(
    model: VelocityMLP,
    prompt: LayoutPrompt,
    cfg: SamplerConfig,
    vocab: ClassVocab,
    index: int = 0,
    use_coords: bool = True,
) -> ToyScene:
    return sample_batch(model, [prompt], cfg, vocab, start_index=index, use_coords=use_coords)[0]
