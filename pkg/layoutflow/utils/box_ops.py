"""Vectorised box arithmetic on ``[N, 4]`` arrays of ``(x1, y1, x2, y2)`` corners."""

import numpy as np

__all__ = ["box_area", "box_iou", "elementwise_box_iou", "as_boxes"]


def as_boxes(boxes) -> np.ndarray:
    """Stack BBox objects or raw 4-sequences into a float64 ``[N, 4]`` array."""
    rows = [b.as_tuple() if hasattr(b, "as_tuple") else tuple(b) for b in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64).reshape(-1, 4)


def box_area(boxes: np.ndarray) -> np.ndarray:
    return np.clip(boxes[:, 2] - boxes[:, 0], 0, None) * np.clip(boxes[:, 3] - boxes[:, 1], 0, None)


def box_iou(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    """
    Args:
        boxes1, [N, 4]
        boxes2, [M, 4]
    Returns:
        iou, [N, M]
    """
    area1 = box_area(boxes1)
    area2 = box_area(boxes2)

    lt = np.maximum(boxes1[:, None, :2], boxes2[None, :, :2])  # [N,M,2]
    rb = np.minimum(boxes1[:, None, 2:], boxes2[None, :, 2:])  # [N,M,2]
    wh = np.clip(rb - lt, 0, None)
    inter = wh[..., 0] * wh[..., 1]

    union = area1[:, None] + area2[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return iou


def elementwise_box_iou(boxes1: np.ndarray, boxes2: np.ndarray) -> np.ndarray:
    """
    Args:
        boxes1, [N, 4]
        boxes2, [N, 4]
    Returns:
        iou, [N, ]
    """
    lt = np.maximum(boxes1[:, :2], boxes2[:, :2])
    rb = np.minimum(boxes1[:, 2:], boxes2[:, 2:])
    wh = np.clip(rb - lt, 0, None)
    inter = wh[:, 0] * wh[:, 1]
    union = box_area(boxes1) + box_area(boxes2) - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
