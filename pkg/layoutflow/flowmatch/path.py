"""Linear probability path between data ``x0`` (t=0) and noise ``x1`` (t=1)."""

from typing import Callable, Union

import torch

from ..errors import NonFinite, OutOfRange, ShapeMismatch

__all__ = ["interpolate", "fm_loss", "shift_timestep", "velocity_target"]

TimeLike = Union[float, torch.Tensor]


def _time_like(t: TimeLike, x: torch.Tensor) -> torch.Tensor:
    t = torch.as_tensor(t, dtype=x.dtype, device=x.device)
    if bool(((t < 0) | (t > 1)).any()) or not bool(torch.isfinite(t).all()):
        raise OutOfRange(f"t must lie in [0, 1], got {t.tolist()}")
    if t.ndim == 1 and x.ndim > 1 and t.shape[0] == x.shape[0]:
        t = t.reshape((-1,) + (1,) * (x.ndim - 1))
    return t


def interpolate(x0: torch.Tensor, x1: torch.Tensor, t: TimeLike) -> torch.Tensor:
    """``(1 - t) * x0 + t * x1``; ``t`` is a scalar or one value per batch row."""
    if x0.shape != x1.shape:
        raise ShapeMismatch(f"x0 {tuple(x0.shape)} and x1 {tuple(x1.shape)} differ in shape")
    t = _time_like(t, x0)
    return (1 - t) * x0 + t * x1


def velocity_target(x0: torch.Tensor, x1: torch.Tensor) -> torch.Tensor:
    return x0 - x1


def fm_loss(
    model: Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor],
    x0: torch.Tensor,
    x1: torch.Tensor,
    t: TimeLike,
    cond: torch.Tensor,
) -> torch.Tensor:
    """
    Batch mean of ``|| v(x_t | cond) - (x0 - x1) ||^2``.

    ``x0``/``x1`` are ``[B, ...]``, ``t`` is a scalar or ``[B]`` and ``cond`` is ``[B, cond_dim]``.
    """
    batch = x0.shape[0]
    t_vec = torch.as_tensor(t, dtype=x0.dtype, device=x0.device)
    if t_vec.ndim == 0:
        t_vec = t_vec.expand(batch)
    x_t = interpolate(x0, x1, t_vec)
    pred = model(x_t, t_vec, cond)
    if pred.shape != x0.shape:
        raise ShapeMismatch(f"model output {tuple(pred.shape)} does not match scene batch {tuple(x0.shape)}")
    err = (pred - velocity_target(x0, x1)).reshape(batch, -1)
    loss = err.pow(2).sum(dim=1).mean()
    if not bool(torch.isfinite(loss)):
        raise NonFinite(f"flow-matching loss is {loss.item()}")
    return loss


def shift_timestep(u: TimeLike, shift: float = 4.0) -> TimeLike:
    """
    ``t = shift * u / (1 + (shift - 1) * u)``: a monotone bijection of [0, 1] that keeps both
    endpoints and, for ``shift > 1``, spends more of a uniform grid near t=1.

    Example:
        >>> shift_timestep(0.5, 4.0)
        0.8
    """
    if shift < 1:
        raise OutOfRange(f"timestep shift must be >= 1, got {shift}")
    if isinstance(u, torch.Tensor):
        if bool(((u < 0) | (u > 1)).any()):
            raise OutOfRange("u must lie in [0, 1]")
        return shift * u / (1 + (shift - 1) * u)
    if not 0 <= u <= 1:
        raise OutOfRange(f"u must lie in [0, 1], got {u}")
    return shift * u / (1 + (shift - 1) * u)
