"""
Building blocks shared by the autoencoder and the discriminator.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

WS_EPS = 1e-12
MAX_GROUPS = 8


def group_count(channels: int) -> int:
    """
    Number of GroupNorm groups for ``channels``.

    The largest divisor of ``channels`` not above 8, i.e. min(8, channels)
    whenever that divides evenly.
    """
    groups = min(MAX_GROUPS, channels)
    while channels % groups:
        groups -= 1
    return groups


class WSConv2d(nn.Conv2d):
    """
    Convolution with weight standardization.

    The kernel of every output channel is shifted to zero mean and
    scaled to unit variance right before it is applied.
    """

    def standardized_weight(self) -> torch.Tensor:
        """Return the kernel actually used by :meth:`forward`."""
        weight = self.weight
        var, mean = torch.var_mean(
            weight, dim=(1, 2, 3), keepdim=True, unbiased=False
        )
        return (weight - mean) * torch.rsqrt(var + WS_EPS)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.conv2d(
            x, self.standardized_weight(), self.bias, self.stride,
            self.padding, self.dilation, self.groups
        )


class ResBlock(nn.Module):
    """
    Two weight-standardized convolutions with GroupNorm and swish, plus
    a residual connection (1x1 projection when channel counts differ).
    """

    def __init__(self, in_channels: int, out_channels: int) -> None:
        super().__init__()
        self.conv1 = WSConv2d(in_channels, out_channels, 3, padding=1)
        self.norm1 = nn.GroupNorm(group_count(out_channels), out_channels)
        self.conv2 = WSConv2d(out_channels, out_channels, 3, padding=1)
        self.norm2 = nn.GroupNorm(group_count(out_channels), out_channels)
        self.skip: nn.Module = (
            nn.Identity() if in_channels == out_channels
            else WSConv2d(in_channels, out_channels, 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.norm1(self.conv1(x)))
        h = F.silu(self.norm2(self.conv2(h)))
        return h + self.skip(x)


class SelfAttention2d(nn.Module):
    """
    Single-head scaled dot-product attention over spatial positions,
    added back to its input.
    """

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.norm = nn.GroupNorm(group_count(channels), channels)
        self.qkv = nn.Conv2d(channels, 3 * channels, 1)
        self.proj = nn.Conv2d(channels, channels, 1)
        self.scale = 1.0 / math.sqrt(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, c, h, w = x.shape
        q, k, v = self.qkv(self.norm(x)).reshape(n, 3, c, h * w).unbind(1)
        weights = torch.softmax(
            torch.einsum('ncq,nck->nqk', q, k) * self.scale, dim=-1
        )
        out = torch.einsum('nqk,nck->ncq', weights, v).reshape(n, c, h, w)
        return x + self.proj(out)
