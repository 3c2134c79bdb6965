"""Scale-adaptive multi-view temporal interaction over 2D feature maps.

Per view, each frame's feature map passes through a bank of various-size
convolutions (one map per kernel size). For every scale, the latest frame
queries the temporal window through a location-consistent cross-attention:
at each spatial position, attention runs over the l temporal slices at that
same position only, so no spatial mixing happens inside the attention. The
per-scale results are then merged by a position-wise MLP.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import Tensor, nn


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ViewKernelSet:
    view_id: str
    kernel_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.kernel_sizes:
            raise ConfigError(f"{self.view_id}: kernel set must not be empty")
        for k in self.kernel_sizes:
            if k % 2 == 0:
                raise ConfigError(f"{self.view_id}: kernel size {k} is even; same-padding needs odd sizes")


class MultiScaleConv(nn.Module):
    """One depthwise + pointwise convolution per kernel size, same padding."""

    def __init__(self, channels: int, kernels: ViewKernelSet):
        super().__init__()
        self.kernels = kernels
        self.depthwise = nn.ModuleList(
            nn.Conv2d(channels, channels, kernel_size=k, padding=k // 2, groups=channels)
            for k in kernels.kernel_sizes
        )
        self.pointwise = nn.ModuleList(
            nn.Conv2d(channels, channels, kernel_size=1) for _ in kernels.kernel_sizes
        )

    def forward(self, feature: Tensor) -> list[Tensor]:
        """(..., C, h, w) -> one same-shape map per kernel size."""
        return [pw(dw(feature)) for dw, pw in zip(self.depthwise, self.pointwise)]


class LocalTemporalAttention(nn.Module):
    """Cross-attention from the latest frame to the temporal window at each
    spatial location independently.

    Keys carry a learned per-offset temporal embedding, initialized to zero
    so that a fresh module attends uniformly over identical frames. With a
    single-frame window the output reduces exactly to out_proj(v_proj(x)).
    """

    def __init__(self, channels: int, window: int, heads: int = 4):
        super().__init__()
        if channels % heads:
            raise ConfigError(f"channels {channels} not divisible by heads {heads}")
        self.window = window
        self.heads = heads
        self.head_dim = channels // heads
        self.q_proj = nn.Linear(channels, channels)
        self.k_proj = nn.Linear(channels, channels)
        self.v_proj = nn.Linear(channels, channels)
        self.out_proj = nn.Linear(channels, channels)
        self.time_embed = nn.Parameter(torch.zeros(window, channels))

    def forward(self, window: Tensor, return_weights: bool = False):
        """window: (l, C, h, w), temporally ordered with the query frame last."""
        l, c, h, w = window.shape
        if l != self.window:
            raise ValueError(f"expected window of {self.window} frames, got {l}")
        tokens = window.permute(0, 2, 3, 1).reshape(l, h * w, c)

        q = self.q_proj(tokens[-1])  # (hw, C)
        k = self.k_proj(tokens) + self.time_embed[:, None, :]  # (l, hw, C)
        v = self.v_proj(tokens)

        q = q.reshape(h * w, self.heads, self.head_dim)
        k = k.reshape(l, h * w, self.heads, self.head_dim)
        v = v.reshape(l, h * w, self.heads, self.head_dim)

        logits = torch.einsum("phd,lphd->phl", q, k) / self.head_dim**0.5
        weights = logits.softmax(dim=-1)  # (hw, heads, l)
        mixed = torch.einsum("phl,lphd->phd", weights, v).reshape(h * w, c)
        out = self.out_proj(mixed).reshape(h, w, c).permute(2, 0, 1)
        if return_weights:
            return out, weights
        return out


class ScaleMerge(nn.Module):
    """Concatenate per-scale maps on channels, then a position-wise 2-layer MLP."""

    def __init__(self, channels: int, num_scales: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or channels * 2
        self.fc1 = nn.Conv2d(num_scales * channels, hidden, kernel_size=1)
        self.fc2 = nn.Conv2d(hidden, channels, kernel_size=1)
        self.act = nn.ReLU(inplace=True)

    def forward(self, scale_maps: list[Tensor]) -> Tensor:
        return self.fc2(self.act(self.fc1(torch.cat(scale_maps, dim=0)[None])))[0]


class ViewTemp(nn.Module):
    """Full per-view pipeline: multi-scale conv, temporal attention, merge."""

    def __init__(
        self,
        channels: int,
        kernel_sets: dict[str, tuple[int, ...]],
        window: int,
        heads: int = 4,
        shared_qkv: bool = False,
    ):
        super().__init__()
        self.window = window
        self.views = tuple(kernel_sets)
        self.convs = nn.ModuleDict(
            {v: MultiScaleConv(channels, ViewKernelSet(v, tuple(ks))) for v, ks in kernel_sets.items()}
        )
        self.attention = nn.ModuleDict()
        for view, ks in kernel_sets.items():
            if shared_qkv:
                shared = LocalTemporalAttention(channels, window, heads)
                self.attention[view] = nn.ModuleList([shared] * len(ks))
            else:
                self.attention[view] = nn.ModuleList(
                    LocalTemporalAttention(channels, window, heads) for _ in ks
                )
        self.merge = nn.ModuleDict(
            {v: ScaleMerge(channels, len(ks)) for v, ks in kernel_sets.items()}
        )

    def forward(self, features_by_view: dict[str, Tensor]) -> dict[str, Tensor]:
        """Per-view (l, D, h, w) stacks -> per-view fused (D, h, w) maps."""
        fused = {}
        for view in self.views:
            frames = features_by_view[view]  # (l, D, h, w)
            per_scale_windows = [
                torch.stack(maps, dim=0)
                for maps in zip(*(self.convs[view](frames[t]) for t in range(frames.shape[0])))
            ]
            dynamics = [
                attn(window)
                for attn, window in zip(self.attention[view], per_scale_windows)
            ]
            fused[view] = self.merge[view](dynamics)
        return fused
