"""Training losses: focal, GIoU, coordinate composite, relation classification,
text alignment, and their weighted total.

All losses take probabilities (not logits) where classification is involved
and are differentiable torch expressions. Conventions:

* box regression uses L1 on the internal cxcywh parameterization and GIoU on
  xyxy, both in normalized [0, 1] coordinates;
* presence scores are supervised with binary focal terms (target 1 for
  matched queries, 0 otherwise);
* relation classification is focal over every (prediction, class) cell,
  normalized by the number of positive labels (clamped to at least 1);
* the total is loss_coord + lambda_cls * loss_cls + lambda_text * loss_text.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor

from .boxes import box_cxcywh_to_xyxy, elementwise_giou

PROB_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    lambda_cls: float = 1.0
    lambda_text: float = 0.1
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    w_l1: float = 5.0
    w_giou: float = 2.0

    def __post_init__(self) -> None:
        for name in ("lambda_cls", "lambda_text", "focal_alpha", "focal_gamma", "w_l1", "w_giou"):
            value = getattr(self, name)
            if not torch.isfinite(torch.as_tensor(float(value))):
                raise ValueError(f"loss weight {name} must be finite, got {value}")
        if self.lambda_cls < 0 or self.lambda_text < 0:
            raise ValueError("lambda weights must be non-negative")


def focal_loss(prob, target, alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """Elementwise binary focal term on probabilities.

    target 1: -alpha * (1 - p)^gamma * log(p)
    target 0: -(1 - alpha) * p^gamma * log(1 - p)

    Probabilities outside (0, 1) are clamped to [eps, 1 - eps].
    """
    prob = torch.as_tensor(prob, dtype=torch.get_default_dtype()) if not torch.is_tensor(prob) else prob
    target = torch.as_tensor(target, dtype=prob.dtype, device=prob.device)
    prob = prob.clamp(PROB_EPS, 1.0 - PROB_EPS)
    pos = -alpha * (1.0 - prob) ** gamma * torch.log(prob)
    neg = -(1.0 - alpha) * prob**gamma * torch.log(1.0 - prob)
    return target * pos + (1.0 - target) * neg


def giou_loss(box_a: Tensor, box_b: Tensor) -> Tensor:
    """1 - GIoU for xyxy boxes (elementwise over leading dims)."""
    box_a = torch.as_tensor(box_a) if not torch.is_tensor(box_a) else box_a
    box_b = torch.as_tensor(box_b) if not torch.is_tensor(box_b) else box_b
    for name, box in (("box_a", box_a), ("box_b", box_b)):
        wh = box[..., 2:] - box[..., :2]
        if (wh <= 0).any():
            raise ValueError(f"{name} has a zero-area (or inverted) box")
    return 1.0 - elementwise_giou(box_a, box_b)


def coord_loss(
    pred_boxes: Tensor,
    subject_scores: Tensor,
    object_scores: Tensor,
    gt_boxes: Tensor,
    assignment,
    weights: LossWeights,
) -> Tensor:
    """Box-regression plus presence-score loss for a set of pair queries.

    pred_boxes: (Q, V, 2, 4) cxcywh; gt_boxes: (G, V, 2, 4) cxcywh;
    assignment: iterable of (query_index, gt_index). For each matched pair,
    each view and each role contributes w_l1 * mean|delta| + w_giou * (1 - GIoU);
    presence scores of all Q queries contribute focal terms (matched -> 1).
    The sum is normalized by max(#matched, 1).
    """
    assignment = list(assignment)
    device = pred_boxes.device
    total = pred_boxes.new_zeros(())

    matched_queries = torch.zeros(pred_boxes.shape[0], dtype=pred_boxes.dtype, device=device)
    if assignment:
        q_idx = torch.as_tensor([q for q, _ in assignment], dtype=torch.long, device=device)
        g_idx = torch.as_tensor([g for _, g in assignment], dtype=torch.long, device=device)
        matched_queries[q_idx] = 1.0

        pred = pred_boxes[q_idx]  # (M, V, 2, 4)
        gt = gt_boxes[g_idx]
        l1 = (pred - gt).abs().mean(dim=-1)  # (M, V, 2) mean over 4 coords
        giou = giou_loss(box_cxcywh_to_xyxy(pred), box_cxcywh_to_xyxy(gt))
        total = total + (weights.w_l1 * l1 + weights.w_giou * giou).sum()

    presence = focal_loss(
        torch.stack([subject_scores, object_scores], dim=-1),
        matched_queries[:, None].expand(-1, 2),
        alpha=weights.focal_alpha,
        gamma=weights.focal_gamma,
    ).sum()
    total = total + presence
    return total / max(len(assignment), 1)


def relation_cls_loss(
    scores: Tensor, labels: Tensor, alpha: float = 0.25, gamma: float = 2.0
) -> Tensor:
    """Focal loss summed over every (prediction, class) cell, divided by the
    positive-label count (clamped to 1 for all-negative batches)."""
    if scores.numel() == 0:
        return scores.new_zeros(())
    labels = torch.as_tensor(labels, dtype=scores.dtype, device=scores.device)
    terms = focal_loss(scores, labels, alpha=alpha, gamma=gamma)
    denom = labels.sum().clamp(min=1.0)
    return terms.sum() / denom


def align_loss(unified: Tensor, targets: Tensor) -> Tensor:
    """Mean absolute difference between unified pair features and their text
    embedding targets, averaged over pairs. Zero (with zero grad) when empty."""
    if unified.numel() == 0:
        return unified.new_zeros(()) if torch.is_tensor(unified) else torch.zeros(())
    targets = torch.as_tensor(targets, dtype=unified.dtype, device=unified.device)
    return (unified - targets).abs().mean(dim=-1).mean()


def total_loss(loss_coord, loss_cls, loss_text, weights: LossWeights) -> Tensor:
    parts = {"coord": loss_coord, "cls": loss_cls, "text": loss_text}
    for name, value in parts.items():
        value_t = value if torch.is_tensor(value) else torch.as_tensor(float(value))
        if not torch.isfinite(value_t).all():
            raise ValueError(f"non-finite loss component: {name} = {value}")
    return loss_coord + weights.lambda_cls * loss_cls + weights.lambda_text * loss_text
