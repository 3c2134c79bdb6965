"""Geometric-temporal point aggregation.

Anchors are farthest-point-sampled per frame (deterministically, from
coordinates). Each anchor gathers the points within a radius across its
temporal window, encodes every neighbor's displacement (dx, dy, dz, dt)
together with its attributes through a shared per-point map, max-reduces,
and projects to the model width. Stacked layers repeat this over the anchor
tokens with a doubled radius. A global self-attention block then lets all
(frame, anchor) tokens interact, with a positional encoding of anchor
coordinates and frame index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import Tensor, nn


def farthest_point_sample(points: np.ndarray, count: int) -> np.ndarray:
    """Deterministic FPS: start at the point closest to the centroid, then
    repeatedly take the point farthest from the selected set. Ties break by
    lexicographically smallest (x, y, z), so storage order never matters."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if count > n:
        raise ValueError(f"cannot sample {count} anchors from {n} points")

    def tie_break(candidates: np.ndarray) -> int:
        coords = points[candidates]
        order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
        return int(candidates[order[0]])

    centroid = points.mean(axis=0)
    d0 = np.linalg.norm(points - centroid, axis=1)
    first = tie_break(np.flatnonzero(d0 == d0.min()))

    selected = [first]
    min_dist = np.linalg.norm(points - points[first], axis=1)
    for _ in range(count - 1):
        far = min_dist.max()
        nxt = tie_break(np.flatnonzero(min_dist == far))
        selected.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.asarray(selected, dtype=np.int64)


@dataclass
class AnchorTokenSet:
    """Per-frame anchor coordinates plus one token per (frame, anchor)."""

    anchors: Tensor  # (l, A, 3)
    tokens: Tensor  # (l * A, D)
    frame_index: Tensor  # (l * A,) long
    empty_flags: Tensor  # (l * A,) bool; True when a neighborhood was empty

    @property
    def num_frames(self) -> int:
        return self.anchors.shape[0]

    @property
    def anchors_per_frame(self) -> int:
        return self.anchors.shape[1]


class Point4DConvLayer(nn.Module):
    """One point 4D convolution: neighborhood encode, max-reduce, project."""

    def __init__(self, in_channels: int, out_channels: int, radius: float, temporal_window: int, hidden: int = 64):
        super().__init__()
        if temporal_window % 2 == 0:
            raise ValueError(f"temporal_window must be odd, got {temporal_window}")
        if radius <= 0:
            raise ValueError(f"radius must be positive, got {radius}")
        self.radius = radius
        self.temporal_window = temporal_window
        self.encoder = nn.Sequential(
            nn.Linear(4 + in_channels, hidden), nn.ReLU(inplace=True), nn.Linear(hidden, hidden)
        )
        self.project = nn.Linear(hidden, out_channels)
        self.empty_token = nn.Parameter(torch.zeros(out_channels))

    def forward(
        self,
        coords: list[Tensor],
        features: list[Tensor],
        anchors: list[Tensor],
    ) -> tuple[Tensor, Tensor]:
        """coords[t]: (P_t, 3); features[t]: (P_t, C); anchors[t]: (A, 3).

        Returns tokens (l, A, D) and empty flags (l, A)."""
        num_frames = len(coords)
        num_anchors = anchors[0].shape[0]
        half = self.temporal_window // 2

        rows, group_ids = [], []
        for t in range(num_frames):
            frame_anchors = anchors[t]  # (A, 3)
            for u in range(max(0, t - half), min(num_frames - 1, t + half) + 1):
                dists = torch.cdist(frame_anchors, coords[u])
                a_idx, p_idx = (dists <= self.radius).nonzero(as_tuple=True)
                if a_idx.numel() == 0:
                    continue
                delta = coords[u][p_idx] - frame_anchors[a_idx]
                dt = torch.full((a_idx.numel(), 1), float(u - t), dtype=delta.dtype, device=delta.device)
                rows.append(torch.cat([delta, dt, features[u][p_idx]], dim=1))
                group_ids.append(t * num_anchors + a_idx)

        hidden = self.encoder[-1].out_features
        maxed = torch.zeros(num_frames * num_anchors, hidden, dtype=anchors[0].dtype, device=anchors[0].device)
        present = torch.zeros(num_frames * num_anchors, dtype=torch.bool)
        if rows:
            encoded = self.encoder(torch.cat(rows, dim=0))
            groups = torch.cat(group_ids)
            maxed = maxed.index_reduce(0, groups, encoded, "amax", include_self=False)
            present[groups] = True

        projected = self.project(maxed)
        flags = ~present
        tokens = torch.where(flags[:, None], self.empty_token[None, :].to(projected.dtype), projected)
        return tokens.reshape(num_frames, num_anchors, -1), flags.reshape(num_frames, num_anchors)


class GlobalTemporalAggregation(nn.Module):
    """Pre-norm self-attention + MLP block over all (frame, anchor) tokens."""

    def __init__(self, channels: int, heads: int = 4, use_positions: bool = True):
        super().__init__()
        if channels % heads:
            raise ValueError(f"channels {channels} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = channels // heads
        self.use_positions = use_positions
        self.pos_encoder = nn.Sequential(nn.Linear(4, channels), nn.ReLU(inplace=True), nn.Linear(channels, channels))
        self.norm1 = nn.LayerNorm(channels)
        self.norm2 = nn.LayerNorm(channels)
        self.q_proj = nn.Linear(channels, channels)
        self.k_proj = nn.Linear(channels, channels)
        self.v_proj = nn.Linear(channels, channels)
        self.out_proj = nn.Linear(channels, channels)
        self.mlp = nn.Sequential(nn.Linear(channels, channels * 2), nn.ReLU(inplace=True), nn.Linear(channels * 2, channels))

    def forward(self, tokens: Tensor, positions: Tensor, frame_index: Tensor, return_weights: bool = False):
        """tokens (N, D); positions (N, 3); frame_index (N,)."""
        if tokens.shape[0] == 0:
            raise ValueError("need at least one token")
        if self.use_positions:
            denom = max(float(frame_index.max().item()), 1.0)
            pos = torch.cat([positions, (frame_index.to(tokens.dtype) / denom)[:, None]], dim=1)
            tokens = tokens + self.pos_encoder(pos)

        n = tokens.shape[0]
        x = self.norm1(tokens)
        q = self.q_proj(x).reshape(n, self.heads, self.head_dim)
        k = self.k_proj(x).reshape(n, self.heads, self.head_dim)
        v = self.v_proj(x).reshape(n, self.heads, self.head_dim)
        logits = torch.einsum("qhd,khd->hqk", q, k) / self.head_dim**0.5
        weights = logits.softmax(dim=-1)  # (heads, N, N)
        mixed = torch.einsum("hqk,khd->qhd", weights, v).reshape(n, -1)
        tokens = tokens + self.out_proj(mixed)
        tokens = tokens + self.mlp(self.norm2(tokens))
        if return_weights:
            return tokens, weights
        return tokens


class PointTemp(nn.Module):
    """Stacked point 4D convolutions plus one global aggregation block."""

    def __init__(
        self,
        in_channels: int,
        width: int,
        anchors: int = 64,
        radius: float = 0.2,
        temporal_window: int = 3,
        layers: int = 2,
        heads: int = 4,
    ):
        super().__init__()
        self.num_anchors = anchors
        conv_layers = []
        for i in range(layers):
            conv_layers.append(
                Point4DConvLayer(
                    in_channels if i == 0 else width,
                    width,
                    radius=radius * (2.0**i),
                    temporal_window=temporal_window,
                )
            )
        self.conv_layers = nn.ModuleList(conv_layers)
        self.aggregate = GlobalTemporalAggregation(width, heads=heads)

    def select_anchors(self, coords: list[Tensor]) -> list[Tensor]:
        return [
            frame[farthest_point_sample(frame.detach().cpu().numpy(), self.num_anchors)]
            for frame in coords
        ]

    def forward(self, coords: list[Tensor], features: list[Tensor], anchors: list[Tensor] | None = None) -> AnchorTokenSet:
        if anchors is None:
            anchors = self.select_anchors(coords)
        layer_coords, layer_feats = coords, features
        flags = None
        for layer in self.conv_layers:
            tokens, layer_flags = layer(layer_coords, layer_feats, anchors)
            flags = layer_flags if flags is None else flags | layer_flags
            layer_coords = anchors
            layer_feats = list(tokens)
        l, a, d = tokens.shape
        anchor_stack = torch.stack(anchors)  # (l, A, 3)
        frame_index = torch.arange(l).repeat_interleave(a)
        out_tokens = self.aggregate(
            tokens.reshape(l * a, d),
            anchor_stack.reshape(l * a, 3).to(tokens.dtype),
            frame_index,
        )
        return AnchorTokenSet(
            anchors=anchor_stack,
            tokens=out_tokens,
            frame_index=frame_index,
            empty_flags=flags.reshape(l * a),
        )


def per_point_features(points: Tensor, tokenset: AnchorTokenSet) -> Tensor:
    """Feature for each final-frame point: its nearest final-frame anchor's
    token; ties resolve to the lowest anchor index."""
    final = tokenset.num_frames - 1
    anchors = tokenset.anchors[final]  # (A, 3)
    tokens = tokenset.tokens.reshape(tokenset.num_frames, tokenset.anchors_per_frame, -1)[final]
    dists = torch.cdist(points.to(anchors.dtype), anchors)  # (P, A)
    nearest = dists.argmin(dim=1)  # argmin returns the first (lowest) index on ties
    return tokens[nearest]
