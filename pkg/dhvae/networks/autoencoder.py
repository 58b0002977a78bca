"""
Joint image/mask variational autoencoder.

The encoder sees the channel-wise concatenation of image and mask and
produces a spatial Gaussian posterior; the decoder maps a latent grid
back to an image and a mask probability map. Encoder and decoder are
mirror images of each other in their block structure.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from dhvae.core.errors import ConfigError, ShapeError
from dhvae.networks.layers import (
    ResBlock,
    SelfAttention2d,
    WSConv2d,
    group_count,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    """
    Architecture of the joint autoencoder.

    Parameters
    ----------
    in_channels : int, optional
        Image channels plus one mask channel. Default is 2.
    base_filters : int, optional
        Filters of the first block. Default is 32.
    depth : int, optional
        Number of encoding (and decoding) blocks. Default is 4.
    max_filters : int, optional
        Cap on the filter count of any block. Default is 128.
    latent_channels : int, optional
        Channels of the latent grid. Default is 16.
    slice_shape : tuple of int, optional
        Input (H, W); both divisible by ``2 ** depth``.
        Default is (32, 32).
    attention_at : tuple of int, optional
        Encoder block indices followed by self-attention; decoder block
        ``depth - 1 - i`` mirrors encoder block ``i``. Default is the
        deepest block only.
    seed : int, optional
        Initialization seed. Default is 0.

    Raises
    ------
    ConfigError
        If any invariant of the architecture is violated.
    """

    in_channels: int = 2
    base_filters: int = 32
    depth: int = 4
    max_filters: int = 128
    latent_channels: int = 16
    slice_shape: tuple[int, int] = (32, 32)
    attention_at: tuple[int, ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        shape = tuple(int(s) for s in self.slice_shape)
        object.__setattr__(self, 'slice_shape', shape)
        if len(shape) != 2:
            raise ConfigError(f"slice_shape must be (H, W), got {shape}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.in_channels < 2:
            raise ConfigError(
                "in_channels counts image channels plus the mask channel "
                f"and must be >= 2, got {self.in_channels}"
            )
        if self.base_filters < 1 or self.latent_channels < 1:
            raise ConfigError("base_filters and latent_channels must be >= 1")
        if self.max_filters < self.base_filters:
            raise ConfigError(
                f"max_filters ({self.max_filters}) must be >= "
                f"base_filters ({self.base_filters})"
            )
        factor = 2 ** self.depth
        if shape[0] % factor or shape[1] % factor:
            raise ConfigError(
                f"slice_shape {shape} is not divisible by 2**depth = {factor}"
            )
        if self.attention_at is not None:
            object.__setattr__(
                self, 'attention_at',
                tuple(sorted({int(i) for i in self.attention_at}))
            )
        attention = self.attention_blocks
        if any(i < 0 or i >= self.depth for i in attention):
            raise ConfigError(
                f"attention_at {attention} outside blocks 0..{self.depth - 1}"
            )

    def filters(self, block: int) -> int:
        """Filter count of encoder block ``block``."""
        return min(self.base_filters * 2 ** block, self.max_filters)

    @property
    def attention_blocks(self) -> tuple[int, ...]:
        """Resolved ``attention_at``; unset means the deepest block."""
        if self.attention_at is None:
            return (self.depth - 1,)
        return self.attention_at

    @property
    def image_channels(self) -> int:
        """Number of image channels (all but the mask channel)."""
        return self.in_channels - 1

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        """Shape (C, h, w) of one latent grid."""
        factor = 2 ** self.depth
        return (
            self.latent_channels,
            self.slice_shape[0] // factor,
            self.slice_shape[1] // factor,
        )

    def to_dict(self) -> dict[str, Any]:
        """Plain-data form used in checkpoints and config hashes."""
        data = asdict(self)
        data['slice_shape'] = list(self.slice_shape)
        if self.attention_at is not None:
            data['attention_at'] = list(self.attention_at)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        """Inverse of :meth:`to_dict`."""
        data = dict(data)
        data['slice_shape'] = tuple(data['slice_shape'])
        if data.get('attention_at') is not None:
            data['attention_at'] = tuple(data['attention_at'])
        return cls(**data)


@dataclass(frozen=True)
class LatentGaussian:
    """
    Diagonal Gaussian posterior over a latent grid.

    Both fields have shape (N, C, h, w).
    """

    mean: torch.Tensor
    log_variance: torch.Tensor

    def __post_init__(self) -> None:
        if self.mean.shape != self.log_variance.shape:
            raise ShapeError(
                f"mean {tuple(self.mean.shape)} and log_variance "
                f"{tuple(self.log_variance.shape)} differ"
            )

    def log_density(self, z: torch.Tensor) -> torch.Tensor:
        """Per-sample log q(z), summed over latent dimensions."""
        log_2pi = float(np.log(2.0 * np.pi))
        terms = (
            (z - self.mean) ** 2 * torch.exp(-self.log_variance)
            + self.log_variance + log_2pi
        )
        return -0.5 * terms.flatten(1).sum(dim=1)

    def kl_to_standard_normal(self) -> torch.Tensor:
        """Per-sample closed-form KL(q || N(0, I))."""
        terms = (
            torch.exp(self.log_variance) + self.mean ** 2
            - 1.0 - self.log_variance
        )
        return 0.5 * terms.flatten(1).sum(dim=1)


def as_batch(array: Any, reference: torch.Tensor) -> torch.Tensor:
    """
    Turn a slice or stack of slices into an (N, C, H, W) tensor.

    2D input is one single-channel slice, 3D input is (N, H, W), and 4D
    input is taken as is. The result matches the dtype and device of
    ``reference``; existing autograd history is kept.

    Raises
    ------
    ShapeError
        If the input has fewer than 2 or more than 4 dimensions.
    """
    if isinstance(array, np.ndarray):
        tensor = torch.from_numpy(np.array(array, copy=True))
    else:
        tensor = torch.as_tensor(array)
    tensor = tensor.to(dtype=reference.dtype, device=reference.device)
    if tensor.ndim == 2:
        return tensor[None, None]
    if tensor.ndim == 3:
        return tensor[:, None]
    if tensor.ndim != 4:
        raise ShapeError(
            f"Expected a 2D to 4D slice array, got shape {tuple(tensor.shape)}"
        )
    return tensor


class EncoderBlock(nn.Module):
    """Residual block, optional attention, stride-2 downsampling."""

    def __init__(
        self,
        in_channels: int,
        filters: int,
        attention: bool
    ) -> None:
        super().__init__()
        self.filters = filters
        self.res = ResBlock(in_channels, filters)
        self.attn: nn.Module = (
            SelfAttention2d(filters) if attention else nn.Identity()
        )
        self.down = WSConv2d(filters, filters, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(self.attn(self.res(x)))


class DecoderBlock(nn.Module):
    """Nearest-neighbor upsampling and conv, residual block, attention."""

    def __init__(
        self,
        in_channels: int,
        filters: int,
        attention: bool
    ) -> None:
        super().__init__()
        self.filters = filters
        self.up = WSConv2d(in_channels, filters, 3, padding=1)
        self.res = ResBlock(filters, filters)
        self.attn: nn.Module = (
            SelfAttention2d(filters) if attention else nn.Identity()
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.up(F.interpolate(x, scale_factor=2.0, mode='nearest'))
        return self.attn(self.res(x))


class JointVAE(nn.Module):
    """
    Encoder/decoder pair over (image, mask) slices.

    Parameters
    ----------
    cfg : ModelConfig
        Architecture description.

    Examples
    --------
    >>> model = JointVAE(ModelConfig(depth=4, slice_shape=(64, 64)))
    >>> model.cfg.latent_shape
    (16, 4, 4)
    """

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        depth = cfg.depth
        attention = set(cfg.attention_blocks)
        deepest = cfg.filters(depth - 1)

        self.stem = WSConv2d(cfg.in_channels, cfg.filters(0), 3, padding=1)
        self.encoder_blocks = nn.ModuleList(
            EncoderBlock(cfg.filters(max(i - 1, 0)), cfg.filters(i),
                         i in attention)
            for i in range(depth)
        )
        self.encoder_mid = nn.Sequential(
            ResBlock(deepest, deepest), SelfAttention2d(deepest)
        )
        self.encoder_out = nn.Sequential(
            nn.GroupNorm(group_count(deepest), deepest),
            nn.SiLU(),
            nn.Conv2d(deepest, 2 * cfg.latent_channels, 1),
        )

        self.decoder_in = WSConv2d(cfg.latent_channels, deepest, 3, padding=1)
        self.decoder_mid = nn.Sequential(
            ResBlock(deepest, deepest), SelfAttention2d(deepest)
        )
        blocks = []
        for j in range(depth):
            mirror = depth - 1 - j
            in_channels = deepest if j == 0 else cfg.filters(mirror + 1)
            blocks.append(DecoderBlock(
                in_channels, cfg.filters(mirror), mirror in attention
            ))
        self.decoder_blocks = nn.ModuleList(blocks)
        self.decoder_out = nn.Sequential(
            nn.GroupNorm(group_count(cfg.filters(0)), cfg.filters(0)),
            nn.SiLU(),
            nn.Conv2d(cfg.filters(0), cfg.in_channels, 3, padding=1),
        )

    @property
    def parameter_count(self) -> int:
        """Number of scalar parameters."""
        return sum(p.numel() for p in self.parameters())

    def _reference(self) -> torch.Tensor:
        return self.stem.weight

    def _check_spatial(self, tensor: torch.Tensor, what: str) -> None:
        if tuple(tensor.shape[-2:]) != self.cfg.slice_shape:
            raise ShapeError(
                f"{what} has spatial shape {tuple(tensor.shape[-2:])}, "
                f"model expects {self.cfg.slice_shape}"
            )

    def encode(self, image: Any, mask: Any) -> LatentGaussian:
        """
        Posterior parameters for a slice pair or a batch of pairs.

        Parameters
        ----------
        image : array-like or torch.Tensor
            (H, W), (N, H, W) or (N, C_img, H, W) intensities.
        mask : array-like or torch.Tensor
            (H, W), (N, H, W) or (N, 1, H, W) labels.

        Returns
        -------
        LatentGaussian
            Mean and log-variance of shape (N, C, h, w).

        Raises
        ------
        ShapeError
            If shapes disagree with the configuration or each other.
        """
        image = as_batch(image, self._reference())
        mask = as_batch(mask, self._reference())
        self._check_spatial(image, 'image')
        self._check_spatial(mask, 'mask')
        if image.shape[0] != mask.shape[0] or (
            image.shape[1] + mask.shape[1] != self.cfg.in_channels
        ):
            raise ShapeError(
                f"image {tuple(image.shape)} and mask {tuple(mask.shape)} "
                f"do not form a batch of {self.cfg.in_channels} channels"
            )
        h = self.stem(torch.cat([image, mask], dim=1))
        for block in self.encoder_blocks:
            h = block(h)
        mean, log_variance = self.encoder_out(
            self.encoder_mid(h)
        ).chunk(2, dim=1)
        return LatentGaussian(mean, log_variance)

    def decode(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """
        Decode latent grids into image and mask probabilities.

        Parameters
        ----------
        z : torch.Tensor
            Latent grids of shape (N, C, h, w) or (C, h, w).

        Returns
        -------
        image_out : torch.Tensor
            (N, C_img, H, W) values in (0, 1).
        mask_prob : torch.Tensor
            (N, 1, H, W) foreground probabilities in (0, 1).

        Raises
        ------
        ShapeError
            If ``z`` does not have the latent shape.
        """
        if z.ndim == 3:
            z = z[None]
        if z.ndim != 4 or tuple(z.shape[1:]) != self.cfg.latent_shape:
            raise ShapeError(
                f"Latent of shape {tuple(z.shape)} does not match "
                f"(N, {', '.join(map(str, self.cfg.latent_shape))})"
            )
        h = self.decoder_mid(self.decoder_in(z))
        for block in self.decoder_blocks:
            h = block(h)
        out = torch.sigmoid(self.decoder_out(h))
        return out[:, :-1], out[:, -1:]

    def forward(
        self,
        image: Any,
        mask: Any
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Reconstruct a pair through the posterior mean."""
        return self.decode(self.encode(image, mask).mean)


def reparameterize(g: LatentGaussian, noise: torch.Tensor) -> torch.Tensor:
    """
    Draw ``z0 = mean + exp(0.5 * log_variance) * noise``.

    Raises
    ------
    ShapeError
        If ``noise`` does not match the posterior shape.

    Examples
    --------
    >>> g = LatentGaussian(torch.ones(1), torch.log(torch.full((1,), 4.0)))
    >>> reparameterize(g, torch.full((1,), 0.5))
    tensor([2.])
    """
    if noise.shape != g.mean.shape:
        raise ShapeError(
            f"noise {tuple(noise.shape)} does not match posterior "
            f"{tuple(g.mean.shape)}"
        )
    return g.mean + torch.exp(0.5 * g.log_variance) * noise


def init_model(
    cfg: ModelConfig,
    dtype: torch.dtype = torch.float32
) -> JointVAE:
    """
    Build a freshly initialized model, deterministic in ``cfg.seed``.

    The global torch RNG state is left untouched.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(cfg.seed)
        model = JointVAE(cfg)
    model = model.to(dtype)
    logger.debug(
        "Initialized model with %d parameters (seed %d)",
        model.parameter_count, cfg.seed
    )
    return model
