"""
Classifier-free guidance with a coordinate branch.

Guidance runs as a chain of stages, each one ``cfg_combine(v_drop, v_prev, s)``::

    text_cfg  = cfg_combine(v_text_drop,  v_full,   s_text)
    coord_cfg = cfg_combine(v_coord_drop, text_cfg, s_coord)   # optionally renormalized
    final     = cfg_combine(v_img_drop,   coord_cfg, s_img)

Disabling the coordinate stage gives the usual text/image guidance; disabling both the coordinate
and image stages gives plain text guidance.
"""

from typing import Dict, Optional, Tuple

import torch

from ..errors import InvalidConfig, MissingBranch, ShapeMismatch
from ..utils.logging import LOGGER
from .velocity import (
    BranchSet,
    GuidanceConfig,
    GuidanceScales,
    NormConfig,
    Velocity,
    VelocityBatch,
    as_tensor,
    check_same_shape,
)

__all__ = [
    "RECOMMENDED_COORD_SCALE",
    "cfg_combine",
    "renormalize",
    "hierarchical_fuse",
    "check_coord_scale",
]

RECOMMENDED_COORD_SCALE: Dict[str, Tuple[float, float]] = {
    "t2i": (0.6, 3.0),
    "multi_reference": (0.4, 1.6),
}


def _wrap_like(template: Velocity, data: torch.Tensor) -> Velocity:
    return template.with_data(data) if isinstance(template, VelocityBatch) else data


def cfg_combine(v_uncond: Velocity, v_cond: Velocity, s: float) -> Velocity:
    """
    ``v_uncond + s * (v_cond - v_uncond)``. ``s == 0`` returns ``v_uncond`` and ``s == 1`` returns
    ``v_cond`` bit for bit.
    """
    check_same_shape(v_uncond, v_cond)
    u, c = as_tensor(v_uncond), as_tensor(v_cond)
    if s == 0:
        out = u.clone()
    elif s == 1:
        out = c.clone()
    else:
        out = u + s * (c - u)
    return _wrap_like(v_uncond, out)


def _batch_dims(*vs: Velocity, batch_dims: Optional[int]) -> int:
    if batch_dims is not None:
        return batch_dims
    for v in vs:
        if isinstance(v, VelocityBatch):
            return v.batch_dims
    return 0


def renormalize(
    v_guided: Velocity,
    v_base: Velocity,
    cfg: Optional[NormConfig] = None,
    batch_dims: Optional[int] = None,
) -> Velocity:
    """
    Rescale ``v_guided`` to the norm of ``v_base``: ``alpha = |v_base| / (|v_guided| + eps)``.

    ``global`` uses one alpha per sample; ``per_channel`` one alpha per channel of a ``(C, H, W)``
    velocity, computed over its ``H x W`` slice.
    """
    cfg = cfg or NormConfig()
    check_same_shape(v_guided, v_base)
    g, b = as_tensor(v_guided), as_tensor(v_base)
    lead = _batch_dims(v_guided, v_base, batch_dims=batch_dims)

    if cfg.domain == "global":
        dims = tuple(range(lead, g.ndim))
    else:
        if g.ndim - lead < 2:
            raise ShapeMismatch(f"per_channel renormalization needs (C, H, W) velocities, got {tuple(g.shape)}")
        dims = tuple(range(lead + 1, g.ndim))

    if not dims:
        g_norm, b_norm = g.abs(), b.abs()
    else:
        g_norm = torch.linalg.vector_norm(g, dim=dims, keepdim=True)
        b_norm = torch.linalg.vector_norm(b, dim=dims, keepdim=True)
    alpha = b_norm / (g_norm + cfg.epsilon)
    return _wrap_like(v_guided, alpha * g)


def hierarchical_fuse(
    branches: BranchSet,
    scales: GuidanceScales,
    norm: Optional[NormConfig] = None,
    base: str = "text_cfg",
) -> Velocity:
    """
    Chain the text, coordinate and image guidance stages.

    ``base`` picks the reference velocity for renormalizing the coordinate stage: ``"text_cfg"``
    (the text-guided velocity without the coordinate stage) or ``"coord_drop"``.
    """
    if base not in GuidanceConfig.BASES:
        raise InvalidConfig("guidance.norm_base", f"expected one of {GuidanceConfig.BASES}, got {base!r}")
    if branches.v_text_drop is None:
        raise MissingBranch("text guidance needs v_text_drop")
    out = cfg_combine(branches.v_text_drop, branches.v_full, scales.s_text)

    if branches.coord_enabled:
        if branches.v_coord_drop is None:
            raise MissingBranch("coordinate guidance is enabled but v_coord_drop is missing")
        text_cfg = out
        out = cfg_combine(branches.v_coord_drop, text_cfg, scales.s_coord)
        if norm is not None:
            reference = text_cfg if base == "text_cfg" else branches.v_coord_drop
            out = renormalize(out, reference, norm)

    if branches.img_enabled:
        if branches.v_img_drop is None:
            raise MissingBranch("image guidance is enabled but v_img_drop is missing")
        out = cfg_combine(branches.v_img_drop, out, scales.s_img)

    return out


def check_coord_scale(s_coord: float, task: str = "t2i") -> bool:
    """Whether ``s_coord`` lies in the recommended range for ``task``; logs a warning when not."""
    if task not in RECOMMENDED_COORD_SCALE:
        raise InvalidConfig("task", f"expected one of {sorted(RECOMMENDED_COORD_SCALE)}, got {task!r}")
    low, high = RECOMMENDED_COORD_SCALE[task]
    inside = low <= s_coord <= high
    if not inside:
        LOGGER.warning(f"s_coord={s_coord} is outside the recommended {task} range [{low}, {high}]")
    return inside
