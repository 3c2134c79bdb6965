"""One-to-one assignment between pair queries and ground-truth pairs.

The cost of matching query i to ground-truth pair j sums, over both views and
both roles (subject/object), an L1 box term and a (1 - GIoU) term, plus a
focal-style presence cost that rewards confident queries. The globally
optimal assignment is solved as a linear sum assignment problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment
from torch import Tensor

from .boxes import box_cxcywh_to_xyxy, elementwise_giou
from .losses import PROB_EPS


@dataclass(frozen=True)
class MatchWeights:
    w_score: float = 2.0
    w_l1: float = 5.0
    w_giou: float = 2.0
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0


@dataclass(frozen=True)
class MatchResult:
    """Optimal one-to-one assignment; covers min(Q, G) pairs."""

    assignment: tuple[tuple[int, int], ...]
    total_cost: float

    def query_indices(self) -> list[int]:
        return [q for q, _ in self.assignment]

    def gt_indices(self) -> list[int]:
        return [g for _, g in self.assignment]


def hungarian_match(cost) -> MatchResult:
    """Minimum-cost one-to-one assignment for an arbitrary cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2D, got shape {cost.shape}")
    if cost.size and not np.isfinite(cost).all():
        raise ValueError("cost matrix contains non-finite entries")
    if 0 in cost.shape:
        return MatchResult(assignment=(), total_cost=0.0)
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(sorted(zip(rows.tolist(), cols.tolist())))
    return MatchResult(assignment=pairs, total_cost=float(cost[rows, cols].sum()))


def _presence_cost(prob: Tensor, alpha: float, gamma: float) -> Tensor:
    # DETR-style focal matching cost for target=1: pos-term minus neg-term.
    prob = prob.clamp(PROB_EPS, 1.0 - PROB_EPS)
    pos = alpha * (1.0 - prob) ** gamma * (-torch.log(prob))
    neg = (1.0 - alpha) * prob**gamma * (-torch.log(1.0 - prob))
    return pos - neg


def build_cost_matrix(
    pred_boxes: Tensor,
    subject_scores: Tensor,
    object_scores: Tensor,
    gt_boxes: Tensor,
    weights: MatchWeights | None = None,
) -> Tensor:
    """(Q, G) matching cost. pred_boxes (Q, V, 2, 4) and gt_boxes (G, V, 2, 4)
    are cxcywh in [0, 1]."""
    weights = weights or MatchWeights()
    q = pred_boxes.shape[0]
    g = gt_boxes.shape[0]
    if g == 0:
        return pred_boxes.new_zeros((q, 0))

    pred = pred_boxes.reshape(q, -1, 4)[:, None]  # (Q, 1, V*2, 4)
    gt = gt_boxes.reshape(g, -1, 4)[None]  # (1, G, V*2, 4)
    cost_l1 = (pred - gt).abs().mean(dim=-1).sum(dim=-1)
    cost_giou = (1.0 - elementwise_giou(box_cxcywh_to_xyxy(pred), box_cxcywh_to_xyxy(gt))).sum(dim=-1)

    score = _presence_cost(subject_scores, weights.focal_alpha, weights.focal_gamma)
    score = score + _presence_cost(object_scores, weights.focal_alpha, weights.focal_gamma)
    cost_score = score[:, None].expand(q, g)

    return weights.w_l1 * cost_l1 + weights.w_giou * cost_giou + weights.w_score * cost_score


def match_pairs(
    pred_boxes: Tensor,
    subject_scores: Tensor,
    object_scores: Tensor,
    gt_boxes: Tensor,
    weights: MatchWeights | None = None,
) -> MatchResult:
    """Build the spec cost matrix and solve the assignment."""
    with torch.no_grad():
        cost = build_cost_matrix(pred_boxes, subject_scores, object_scores, gt_boxes, weights)
    return hungarian_match(cost.detach().cpu().numpy())
