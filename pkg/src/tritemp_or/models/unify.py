"""Relation-aware feature unification and text-initialized classification.

Per subject-object pair, 2D features come from RoIAlign pooling on the fused
maps and 3D features from max-pooling the point features selected by the
pair's frustums. The four role vectors (plus 3D validity flags) pass through
a 2-layer MLP into the text-embedding width E, where they can be aligned
with language-model embeddings. Classification cross-attends the unified
vectors to the flattened scene context and applies a linear head whose rows
can be initialized from predicate embeddings.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import Tensor, nn

from ..embeddings import EmbeddingTable, predicate_prompt
from ..taxonomy import RelationTaxonomy


def pool_point_features(indices, point_features: Tensor) -> tuple[Tensor, bool]:
    """Coordinate-wise max over the selected point features.

    Empty selection yields a zero vector and a False validity flag."""
    indices = torch.as_tensor(np.asarray(indices), dtype=torch.long, device=point_features.device)
    if indices.numel() == 0:
        return point_features.new_zeros(point_features.shape[1]), False
    return point_features[indices].max(dim=0).values, True


class FeatureUnifier(nn.Module):
    """Concat(sub2d, obj2d, sub3d, obj3d, validity flags) -> MLP -> E."""

    def __init__(self, width: int, embed_dim: int):
        super().__init__()
        self.width = width
        self.embed_dim = embed_dim
        hidden = max(2 * embed_dim, width)
        self.fc1 = nn.Linear(4 * width + 2, hidden)
        self.fc2 = nn.Linear(hidden, embed_dim)

    def forward(
        self,
        sub2d: Tensor,
        obj2d: Tensor,
        sub3d: Tensor,
        obj3d: Tensor,
        sub_valid: Tensor | None = None,
        obj_valid: Tensor | None = None,
    ) -> Tensor:
        """Role vectors (..., D) -> unified (..., E)."""
        if sub_valid is None:
            sub_valid = sub2d.new_ones(sub2d.shape[:-1])
        if obj_valid is None:
            obj_valid = obj2d.new_ones(obj2d.shape[:-1])
        packed = torch.cat(
            [sub2d, obj2d, sub3d, obj3d, sub_valid[..., None], obj_valid[..., None]], dim=-1
        )
        return self.fc2(torch.relu(self.fc1(packed)))


class RelationClassifier(nn.Module):
    """Cross-attention from unified pair vectors to scene context, then a
    linear multi-label head with sigmoid scores."""

    def __init__(self, width: int, embed_dim: int, num_classes: int, heads: int = 4):
        super().__init__()
        if embed_dim % heads:
            raise ValueError(f"embed_dim {embed_dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = embed_dim // heads
        self.context_proj = nn.Linear(width, embed_dim)
        self.q_proj = nn.Linear(embed_dim, embed_dim)
        self.k_proj = nn.Linear(embed_dim, embed_dim)
        self.v_proj = nn.Linear(embed_dim, embed_dim)
        self.out_proj = nn.Linear(embed_dim, embed_dim)
        self.classifier = nn.Linear(embed_dim, num_classes)

    def init_from_embeddings(self, table: EmbeddingTable, relations: RelationTaxonomy | None = None) -> None:
        """Set classifier row z to the embedding of predicate z; zero bias."""
        relations = relations or RelationTaxonomy()
        rows = [table[predicate_prompt(p, relations)] for p in relations]
        weight = torch.as_tensor(np.stack(rows), dtype=self.classifier.weight.dtype)
        if weight.shape != self.classifier.weight.shape:
            raise ValueError(
                f"embedding table width {weight.shape[1]} does not match classifier in_features "
                f"{self.classifier.weight.shape[1]}"
            )
        with torch.no_grad():
            self.classifier.weight.copy_(weight)
            self.classifier.bias.zero_()

    def forward(self, unified: Tensor, context: Tensor, return_weights: bool = False):
        """unified (N, E), context (S, D) -> scores (N, Z) in (0, 1)."""
        ctx = self.context_proj(context)  # (S, E)
        n = unified.shape[0]
        s = ctx.shape[0]
        q = self.q_proj(unified).reshape(n, self.heads, self.head_dim)
        k = self.k_proj(ctx).reshape(s, self.heads, self.head_dim)
        v = self.v_proj(ctx).reshape(s, self.heads, self.head_dim)
        logits = torch.einsum("nhd,shd->hns", q, k) / self.head_dim**0.5
        weights = logits.softmax(dim=-1)  # (heads, N, S)
        mixed = torch.einsum("hns,shd->nhd", weights, v).reshape(n, -1)
        attended = unified + self.out_proj(mixed)
        scores = torch.sigmoid(self.classifier(attended))
        if return_weights:
            return scores, weights
        return scores
