"""Box coordinate conversions, IoU and generalized IoU (torch, differentiable)."""

from __future__ import annotations

import torch
from torch import Tensor


def box_cxcywh_to_xyxy(boxes: Tensor) -> Tensor:
    cx, cy, w, h = boxes.unbind(-1)
    return torch.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], dim=-1)


def box_xyxy_to_cxcywh(boxes: Tensor) -> Tensor:
    x1, y1, x2, y2 = boxes.unbind(-1)
    return torch.stack([0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1], dim=-1)


def box_area(boxes: Tensor) -> Tensor:
    return (boxes[..., 2] - boxes[..., 0]) * (boxes[..., 3] - boxes[..., 1])


def elementwise_iou(boxes_a: Tensor, boxes_b: Tensor) -> tuple[Tensor, Tensor]:
    """IoU and union area for broadcastable stacks of xyxy boxes."""
    lt = torch.maximum(boxes_a[..., :2], boxes_b[..., :2])
    rb = torch.minimum(boxes_a[..., 2:], boxes_b[..., 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = box_area(boxes_a) + box_area(boxes_b) - inter
    return inter / union.clamp(min=1e-12), union


def elementwise_giou(boxes_a: Tensor, boxes_b: Tensor) -> Tensor:
    """Generalized IoU: IoU minus the hull area not covered by the union."""
    iou, union = elementwise_iou(boxes_a, boxes_b)
    lt = torch.minimum(boxes_a[..., :2], boxes_b[..., :2])
    rb = torch.maximum(boxes_a[..., 2:], boxes_b[..., 2:])
    hull = (rb - lt).clamp(min=0)
    hull_area = hull[..., 0] * hull[..., 1]
    return iou - (hull_area - union) / hull_area.clamp(min=1e-12)


def pairwise_giou(boxes_a: Tensor, boxes_b: Tensor) -> Tensor:
    """All-pairs GIoU matrix, (N, M) for (N, 4) x (M, 4) xyxy inputs."""
    return elementwise_giou(boxes_a[:, None, :], boxes_b[None, :, :])
