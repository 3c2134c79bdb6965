"""Image backbones feeding the multi-view temporal interaction.

Two options share one contract: consume a stack of frames and emit
stride-16 feature maps projected to the model width. "tiny" is a small
strided CNN for CPU-scale runs; "resnet50" taps a configurable stage of
torchvision's ResNet-50 (randomly initialized unless a weight file is
loaded separately). GroupNorm keeps statistics per-sample so train and
eval passes are identical.
"""

from __future__ import annotations

import torch
from torch import Tensor, nn


class ShapeError(ValueError):
    """Input resolution incompatible with the backbone stride."""


class TinyBackbone(nn.Module):
    stride = 16

    def __init__(self, width: int = 128):
        super().__init__()
        chans = [32, 64, 96, 128]
        layers = []
        prev = 3
        for c in chans:
            layers += [
                nn.Conv2d(prev, c, kernel_size=3, stride=2, padding=1),
                nn.GroupNorm(8, c),
                nn.ReLU(inplace=True),
            ]
            prev = c
        self.stem = nn.Sequential(*layers)
        self.project = nn.Conv2d(prev, width, kernel_size=1)

    def forward(self, frames: Tensor) -> Tensor:
        return self.project(self.stem(frames))


class ResNet50Stage(nn.Module):
    _stage_specs = {"layer2": (8, 512), "layer3": (16, 1024), "layer4": (32, 2048)}

    def __init__(self, width: int = 256, stage: str = "layer3"):
        super().__init__()
        if stage not in self._stage_specs:
            raise ValueError(f"unsupported stage {stage!r}; pick from {sorted(self._stage_specs)}")
        from torchvision.models import resnet50

        self.stride, channels = self._stage_specs[stage]
        net = resnet50(weights=None)
        stages = [net.conv1, net.bn1, net.relu, net.maxpool, net.layer1, net.layer2]
        if stage in ("layer3", "layer4"):
            stages.append(net.layer3)
        if stage == "layer4":
            stages.append(net.layer4)
        self.stem = nn.Sequential(*stages)
        self.project = nn.Conv2d(channels, width, kernel_size=1)

    def forward(self, frames: Tensor) -> Tensor:
        return self.project(self.stem(frames))


def build_backbone(name: str = "tiny", width: int = 128, stage: str = "layer3") -> nn.Module:
    if name == "tiny":
        return TinyBackbone(width=width)
    if name == "resnet50":
        return ResNet50Stage(width=width, stage=stage)
    raise ValueError(f"unknown backbone {name!r}")


def extract_features(backbone: nn.Module, frames_by_view: dict[str, Tensor]) -> dict[str, Tensor]:
    """Per-view (l, D, h, w) feature stacks from per-view (l, 3, H, W) frames."""
    counts = {view: frames.shape[0] for view, frames in frames_by_view.items()}
    if len(set(counts.values())) > 1:
        raise ValueError(f"mismatched per-view frame counts: {counts}")
    stride = backbone.stride
    features = {}
    for view, frames in frames_by_view.items():
        _, _, h, w = frames.shape
        if h % stride or w % stride:
            raise ShapeError(f"{view}: resolution {h}x{w} not divisible by stride {stride}")
        features[view] = backbone(frames)
    return features
