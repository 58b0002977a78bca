"""
Fully convolutional patch discriminator over (image, mask) pairs.
"""

from __future__ import annotations

from typing import Any

import torch
from torch import nn

from dhvae.core.errors import ShapeError
from dhvae.networks.autoencoder import ModelConfig, as_batch
from dhvae.networks.layers import WSConv2d, group_count

LEAKY_SLOPE = 0.2


class PatchDiscriminator(nn.Module):
    """
    Stack of stride-2 weight-standardized convolutions ending in a
    one-channel logit map; every output entry scores one receptive patch.

    Parameters
    ----------
    in_channels : int
        Channels of the concatenated (image, mask) input.
    slice_shape : tuple of int
        Expected input (H, W), divisible by ``2 ** depth``.
    base_filters : int, optional
        Filters of the first block, doubled per block. Default is 32.
    depth : int, optional
        Number of stride-2 blocks. Default is 3.
    """

    def __init__(
        self,
        in_channels: int,
        slice_shape: tuple[int, int],
        base_filters: int = 32,
        depth: int = 3
    ) -> None:
        super().__init__()
        self.in_channels = in_channels
        self.slice_shape = tuple(slice_shape)
        self.depth = depth
        layers: list[nn.Module] = []
        channels = in_channels
        for i in range(depth):
            filters = base_filters * 2 ** i
            layers.append(WSConv2d(channels, filters, 4, stride=2, padding=1))
            if i > 0:
                layers.append(nn.GroupNorm(group_count(filters), filters))
            layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            channels = filters
        layers.append(nn.Conv2d(channels, 1, 3, padding=1))
        self.model = nn.Sequential(*layers)

    def forward(self, pair: torch.Tensor) -> torch.Tensor:
        return self.model(pair)


def init_discriminator(
    cfg: ModelConfig,
    depth: int = 3,
    base_filters: int | None = None,
    seed: int | None = None,
    dtype: torch.dtype = torch.float32
) -> PatchDiscriminator:
    """
    Build a discriminator matching a model configuration.

    Parameters
    ----------
    cfg : ModelConfig
        Supplies input channels and slice shape.
    depth : int, optional
        Stride-2 block count ``k``. Default is 3.
    base_filters : int, optional
        Defaults to ``cfg.base_filters``.
    seed : int, optional
        Initialization seed; defaults to ``cfg.seed + 1``.
    dtype : torch.dtype, optional
        Parameter dtype. Default is float32.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed + 1 if seed is None else seed)
        disc = PatchDiscriminator(
            cfg.in_channels, cfg.slice_shape,
            base_filters or cfg.base_filters, depth
        )
    return disc.to(dtype)


def discriminate(
    disc: PatchDiscriminator,
    image: Any,
    mask: Any
) -> torch.Tensor:
    """
    Patch realness logits for an (image, mask) pair or batch.

    Returns
    -------
    torch.Tensor
        Shape (N, 1, H / 2**k, W / 2**k).

    Raises
    ------
    ShapeError
        If the inputs do not have the discriminator's slice shape.
    """
    reference = disc.model[0].weight
    image = as_batch(image, reference)
    mask = as_batch(mask, reference)
    for name, tensor in (('image', image), ('mask', mask)):
        if tuple(tensor.shape[-2:]) != disc.slice_shape:
            raise ShapeError(
                f"{name} has spatial shape {tuple(tensor.shape[-2:])}, "
                f"discriminator expects {disc.slice_shape}"
            )
    if image.shape[0] != mask.shape[0] or (
        image.shape[1] + mask.shape[1] != disc.in_channels
    ):
        raise ShapeError(
            f"image {tuple(image.shape)} and mask {tuple(mask.shape)} "
            f"do not form a batch of {disc.in_channels} channels"
        )
    return disc(torch.cat([image, mask], dim=1))
