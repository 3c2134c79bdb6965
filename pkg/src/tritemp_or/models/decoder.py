"""Relation-aware query decoder over fused multi-view feature maps.

The fused maps of both views are flattened into one memory sequence with 2D
sine positional encodings plus a learned per-view embedding. A small
transformer decoder turns Q learned queries into pair proposals: for each
query, a subject box and an object box per view (cxcywh through a sigmoid)
and subject/object presence scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import torch
from torch import Tensor, nn


def sine_position_encoding(h: int, w: int, dim: int, temperature: float = 10000.0) -> Tensor:
    """(h*w, dim) 2D sine encoding, half the channels for y and half for x."""
    if dim % 4:
        raise ValueError(f"dim must be divisible by 4, got {dim}")
    quarter = dim // 4
    omega = 1.0 / temperature ** (torch.arange(quarter, dtype=torch.float32) / quarter)
    ys = torch.arange(h, dtype=torch.float32)[:, None] * omega[None, :]  # (h, quarter)
    xs = torch.arange(w, dtype=torch.float32)[:, None] * omega[None, :]
    enc = torch.zeros(h, w, dim)
    enc[:, :, 0 * quarter : 1 * quarter] = torch.sin(ys)[:, None, :].expand(h, w, quarter)
    enc[:, :, 1 * quarter : 2 * quarter] = torch.cos(ys)[:, None, :].expand(h, w, quarter)
    enc[:, :, 2 * quarter : 3 * quarter] = torch.sin(xs)[None, :, :].expand(h, w, quarter)
    enc[:, :, 3 * quarter : 4 * quarter] = torch.cos(xs)[None, :, :].expand(h, w, quarter)
    return enc.reshape(h * w, dim)


class MLP(nn.Module):
    def __init__(self, in_dim: int, hidden: int, out_dim: int, layers: int = 3):
        super().__init__()
        dims = [in_dim] + [hidden] * (layers - 1) + [out_dim]
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = torch.relu(x)
        return x


@dataclass
class PairProposals:
    """Q pair proposals: per-view subject/object boxes and presence scores."""

    boxes: Tensor  # (Q, V, 2, 4) cxcywh in (0, 1); roles ordered [subject, object]
    subject_scores: Tensor  # (Q,) in (0, 1)
    object_scores: Tensor  # (Q,) in (0, 1)
    embeddings: Tensor  # (Q, D) decoder output
    views: tuple[str, ...]

    @property
    def num_queries(self) -> int:
        return self.boxes.shape[0]

    def boxes_for(self, view: str) -> Tensor:
        return self.boxes[:, self.views.index(view)]


class PairDecoder(nn.Module):
    def __init__(
        self,
        width: int = 256,
        views: tuple[str, ...] = ("view1", "view6"),
        num_queries: int = 20,
        layers: int = 3,
        heads: int = 8,
    ):
        super().__init__()
        self.views = tuple(views)
        self.width = width
        self.query_embed = nn.Parameter(torch.empty(num_queries, width).normal_(std=0.02))
        self.view_embed = nn.Parameter(torch.zeros(len(self.views), width))
        layer = nn.TransformerDecoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=width * 4,
            dropout=0.0,
            batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=layers)
        self.box_head = MLP(width, width, len(self.views) * 2 * 4)
        self.score_head = nn.Linear(width, 2)

    def forward(self, fused_by_view: dict[str, Tensor]) -> PairProposals:
        """Per-view (D, h, w) fused maps -> Q pair proposals."""
        memory = []
        for vi, view in enumerate(self.views):
            if view not in fused_by_view:
                raise ValueError(f"missing fused features for {view!r}")
            fmap = fused_by_view[view]
            d, h, w = fmap.shape
            tokens = fmap.reshape(d, h * w).T
            pos = sine_position_encoding(h, w, d).to(tokens.dtype)
            memory.append(tokens + pos + self.view_embed[vi][None, :])
        memory = torch.cat(memory, dim=0)[None]  # (1, S, D)

        queries = self.query_embed[None]  # (1, Q, D)
        decoded = self.decoder(queries, memory)[0]  # (Q, D)

        q = decoded.shape[0]
        boxes = torch.sigmoid(self.box_head(decoded)).reshape(q, len(self.views), 2, 4)
        scores = torch.sigmoid(self.score_head(decoded))
        return PairProposals(
            boxes=boxes,
            subject_scores=scores[:, 0],
            object_scores=scores[:, 1],
            embeddings=decoded,
            views=self.views,
        )
