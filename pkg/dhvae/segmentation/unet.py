"""
U-Net slice segmenter.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import torch
from torch import nn

from dhvae.core.errors import ConfigError
from dhvae.networks.layers import group_count


@dataclass(frozen=True)
class SegConfig:
    """
    Segmenter architecture and training schedule.

    Parameters
    ----------
    depth : int, optional
        Number of downsampling levels. Default is 4.
    base_filters : int, optional
        Filters of the first level, doubled per level. Default is 16.
    max_filters : int, optional
        Cap on the filters of any level. Default is 128.
    epochs : int, optional
        Passes over the training set. Default is 20.
    batch_size : int, optional
        Slices per optimizer step. Default is 16.
    lr : float, optional
        Adam learning rate. Default is 1e-3.
    seed : int, optional
        Seed of initialization and shuffling. Default is 0.
    """

    depth: int = 4
    base_filters: int = 16
    max_filters: int = 128
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ('depth', 'base_filters', 'max_filters', 'epochs',
                     'batch_size'):
            if getattr(self, name) < 1:
                raise ConfigError(
                    f"SegConfig.{name} must be >= 1, got {getattr(self, name)}"
                )
        if not self.lr > 0:
            raise ConfigError(f"SegConfig.lr must be > 0, got {self.lr}")

    def filters(self, level: int) -> int:
        return min(self.base_filters * 2 ** level, self.max_filters)

    def check_shape(self, slice_shape: tuple[int, int]) -> None:
        """
        Raises
        ------
        ConfigError
            If the slice shape is not divisible by ``2 ** depth``.
        """
        factor = 2 ** self.depth
        if slice_shape[0] % factor or slice_shape[1] % factor:
            raise ConfigError(
                f"Slice shape {slice_shape} is not divisible by "
                f"2**depth = {factor}"
            )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _double_conv(in_channels: int, out_channels: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, 3, padding=1),
        nn.GroupNorm(group_count(out_channels), out_channels),
        nn.ReLU(),
        nn.Conv2d(out_channels, out_channels, 3, padding=1),
        nn.GroupNorm(group_count(out_channels), out_channels),
        nn.ReLU(),
    )


class UNet(nn.Module):
    """
    Encoder-decoder with skip connections producing one logit map.

    Parameters
    ----------
    cfg : SegConfig
        Depth and filter counts.
    in_channels : int, optional
        Image channels. Default is 1.
    """

    def __init__(self, cfg: SegConfig, in_channels: int = 1) -> None:
        super().__init__()
        self.cfg = cfg
        self.down = nn.ModuleList()
        channels = in_channels
        for level in range(cfg.depth):
            self.down.append(_double_conv(channels, cfg.filters(level)))
            channels = cfg.filters(level)
        self.pool = nn.MaxPool2d(2)
        self.bottom = _double_conv(channels, cfg.filters(cfg.depth))
        channels = cfg.filters(cfg.depth)
        self.up = nn.ModuleList()
        self.merge = nn.ModuleList()
        for level in reversed(range(cfg.depth)):
            skip = cfg.filters(level)
            self.up.append(nn.ConvTranspose2d(channels, skip, 2, stride=2))
            self.merge.append(_double_conv(2 * skip, skip))
            channels = skip
        self.head = nn.Conv2d(channels, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for block in self.down:
            x = block(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottom(x)
        for up, merge, skip in zip(self.up, self.merge, reversed(skips)):
            x = merge(torch.cat([up(x), skip], dim=1))
        return self.head(x)


def init_segmenter(cfg: SegConfig, in_channels: int = 1) -> UNet:
    """Freshly initialized segmenter, deterministic in ``cfg.seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        return UNet(cfg, in_channels)
