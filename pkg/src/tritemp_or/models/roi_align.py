"""RoIAlign: quantization-free region pooling by bilinear sampling.

The box (normalized xyxy) is scaled to the feature grid, split into
output_size x output_size bins, and each bin is averaged over a regular
2x2 grid of sample points (4 per bin). Samples use bilinear interpolation
in a convention where the pixel at index (r, c) has its center at
continuous coordinate (c + 0.5, r + 0.5); out-of-range samples clamp to
the border. Everything is expressed with torch ops, so the result is
differentiable in both the feature map and the box.
"""

from __future__ import annotations

import torch
from torch import Tensor


def bilinear_sample(feature: Tensor, x: Tensor, y: Tensor) -> Tensor:
    """Sample (C, h, w) at continuous coords; x/y share any shape; returns (C, *shape)."""
    _, h, w = feature.shape
    xg = (x - 0.5).clamp(0.0, w - 1.0)
    yg = (y - 0.5).clamp(0.0, h - 1.0)
    x0 = xg.floor().long().clamp(0, w - 1)
    y0 = yg.floor().long().clamp(0, h - 1)
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)
    tx = xg - x0.to(xg.dtype)
    ty = yg - y0.to(yg.dtype)

    flat = feature.reshape(feature.shape[0], -1)  # (C, h*w)

    def gather(yi, xi):
        return flat[:, (yi * w + xi).reshape(-1)].reshape(feature.shape[0], *x.shape)

    v00, v01 = gather(y0, x0), gather(y0, x1)
    v10, v11 = gather(y1, x0), gather(y1, x1)
    top = v00 * (1 - tx) + v01 * tx
    bot = v10 * (1 - tx) + v11 * tx
    return top * (1 - ty) + bot * ty


def roi_align(feature: Tensor, box, output_size: int = 7, samples_per_side: int = 2) -> Tensor:
    """Pool a normalized-xyxy box region of a (C, h, w) map to (C, out, out)."""
    if feature.dim() != 3:
        raise ValueError(f"feature must be (C, h, w), got {tuple(feature.shape)}")
    box = torch.as_tensor(box, dtype=feature.dtype, device=feature.device)
    x1, y1, x2, y2 = box.unbind(-1)
    if (x2 - x1).item() <= 0 or (y2 - y1).item() <= 0:
        raise ValueError(f"degenerate box {box.tolist()}")

    _, h, w = feature.shape
    bx1, bx2 = x1 * w, x2 * w
    by1, by2 = y1 * h, y2 * h
    bin_w = (bx2 - bx1) / output_size
    bin_h = (by2 - by1) / output_size

    # sample points at fractions (i + 0.5) / samples_per_side within each bin
    frac = (torch.arange(samples_per_side, dtype=feature.dtype, device=feature.device) + 0.5) / samples_per_side
    bins = torch.arange(output_size, dtype=feature.dtype, device=feature.device)
    # (out, samples): absolute coordinates of sample columns/rows
    xs = bx1 + (bins[:, None] + frac[None, :]) * bin_w
    ys = by1 + (bins[:, None] + frac[None, :]) * bin_h

    # full grid: (out, samples, out, samples)
    grid_x = xs[None, None, :, :].expand(output_size, samples_per_side, output_size, samples_per_side)
    grid_y = ys[:, :, None, None].expand(output_size, samples_per_side, output_size, samples_per_side)
    sampled = bilinear_sample(feature, grid_x, grid_y)  # (C, out, s, out, s)
    return sampled.mean(dim=(2, 4))
