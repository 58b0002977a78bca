"""
Frozen feature extractors for perceptual losses and metrics.

Two kinds are registered in :class:`ExtractorRegistry`:

``fixed-random-test``
    A seeded, randomly initialized 16-layer convolution stack with
    reduced widths. It needs no downloads and is what tests use.
``pretrained-16-layer-conv``
    The same layout at full width with pretrained weights read from
    ``$DHVAE_ASSET_DIR/vgg16_features.pth``. Without the asset the
    builder logs a warning and falls back to the test kind.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import torch
import torch.nn.functional as F
from torch import nn

from dhvae.core.errors import ConfigError, ShapeError
from dhvae.core.registry import ExtractorRegistry
from dhvae.networks.autoencoder import as_batch

logger = logging.getLogger(__name__)

ASSET_ENV = 'DHVAE_ASSET_DIR'
ASSET_NAME = 'vgg16_features.pth'
RANDOM_KIND = 'fixed-random-test'
PRETRAINED_KIND = 'pretrained-16-layer-conv'
DEFAULT_TAPS = (2, 7, 12, 21)

# conv widths, 'M' for 2x2 max pooling
LAYOUT: tuple[int | str, ...] = (
    64, 64, 'M', 128, 128, 'M', 256, 256, 256, 'M',
    512, 512, 512, 'M', 512, 512, 512, 'M',
)
RANDOM_WIDTH_DIVISOR = 8
NATIVE_INPUT = 224
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


def _layers(width_divisor: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    channels = 3
    for entry in LAYOUT:
        if entry == 'M':
            layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
        else:
            width = max(int(entry) // width_divisor, 1)
            layers.append(nn.Conv2d(channels, width, 3, padding=1))
            layers.append(nn.ReLU())
            channels = width
    return nn.Sequential(*layers)


class FeatureExtractor(nn.Module):
    """
    Frozen convolution stack returning activations at tap layers.

    Parameters
    ----------
    kind : str
        Extractor kind (see module docstring).
    layers : nn.Sequential
        The full layer stack; it is truncated after the last tap.
    tap_indices : sequence of int
        Strictly increasing layer indices whose outputs are returned.
    imagenet_input : bool, optional
        Whether :meth:`embed` applies ImageNet normalization after
        resizing. Default is False.
    """

    def __init__(
        self,
        kind: str,
        layers: nn.Sequential,
        tap_indices: Sequence[int] = DEFAULT_TAPS,
        imagenet_input: bool = False
    ) -> None:
        super().__init__()
        taps = tuple(int(t) for t in tap_indices)
        if not taps or any(b <= a for a, b in zip(taps, taps[1:])):
            raise ConfigError(
                f"tap_indices must be non-empty and strictly increasing, "
                f"got {taps}"
            )
        if taps[0] < 0 or taps[-1] >= len(layers):
            raise ConfigError(
                f"tap_indices {taps} outside layers 0..{len(layers) - 1}"
            )
        self.kind = kind
        self.tap_indices = taps
        self.imagenet_input = imagenet_input
        self.layers = nn.Sequential(*list(layers)[: taps[-1] + 1])
        self.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> FeatureExtractor:
        # always in inference mode
        return super().train(False)

    def _prepare(self, images: Any) -> torch.Tensor:
        reference = self.layers[0].weight
        x = as_batch(images, reference)
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        elif x.shape[1] != 3:
            raise ShapeError(
                f"Extractor takes 1 or 3 channels, got {x.shape[1]}"
            )
        return x

    def forward(self, images: Any) -> list[torch.Tensor]:
        """
        Activations at every tap for images in [0, 1].

        Single-channel input is replicated to three channels.
        """
        x = self._prepare(images)
        taps = set(self.tap_indices)
        features = []
        for index, layer in enumerate(self.layers):
            x = layer(x)
            if index in taps:
                features.append(x)
        return features

    def embed(self, images: Any) -> torch.Tensor:
        """
        One embedding vector per image for distribution metrics.

        Images are resized bilinearly to the native input size when the
        extractor is pretrained, passed through the stack, and every tap
        is global-average pooled; the pooled taps are concatenated.

        Returns
        -------
        torch.Tensor
            Shape (N, sum of tap channel counts).
        """
        x = self._prepare(images)
        if self.imagenet_input:
            x = F.interpolate(
                x, size=(NATIVE_INPUT, NATIVE_INPUT), mode='bilinear',
                align_corners=False
            )
            mean = x.new_tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
            std = x.new_tensor(IMAGENET_STD).view(1, 3, 1, 1)
            x = (x - mean) / std
        pooled = [f.mean(dim=(2, 3)) for f in self.forward(x)]
        return torch.cat(pooled, dim=1)

    @property
    def preprocessing(self) -> str:
        """Human readable description recorded in metric reports."""
        if self.imagenet_input:
            return (
                f"bilinear resize to {NATIVE_INPUT}x{NATIVE_INPUT}, "
                f"3-channel replication, ImageNet normalization"
            )
        return "native resolution, 3-channel replication"


def _build_random(
    tap_indices: Sequence[int],
    seed: int
) -> FeatureExtractor:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        layers = _layers(RANDOM_WIDTH_DIVISOR)
    return FeatureExtractor(RANDOM_KIND, layers, tap_indices)


def _build_pretrained(
    tap_indices: Sequence[int],
    seed: int
) -> FeatureExtractor:
    asset_dir = os.environ.get(ASSET_ENV)
    path = Path(asset_dir) / ASSET_NAME if asset_dir else None
    if path is None or not path.is_file():
        logger.warning(
            "Pretrained extractor weights not found (%s=%r); "
            "falling back to '%s'", ASSET_ENV, asset_dir, RANDOM_KIND
        )
        return _build_random(tap_indices, seed)
    layers = _layers(1)
    state = torch.load(path, map_location='cpu', weights_only=True)
    # accept both a bare features state dict and a full classifier one
    state = {
        key.removeprefix('features.'): value
        for key, value in state.items()
        if not key.startswith('classifier.')
    }
    layers.load_state_dict(state)
    logger.info("Loaded pretrained extractor weights from '%s'", path)
    return FeatureExtractor(
        PRETRAINED_KIND, layers, tap_indices, imagenet_input=True
    )


def fetch_pretrained_weights(asset_dir: str | Path) -> Path:
    """
    Download ImageNet weights and store the convolution stack as the
    asset read by the pretrained kind. Needs the ``pretrained`` extra.

    Returns
    -------
    Path
        The written ``vgg16_features.pth``.
    """
    from torchvision.models import VGG16_Weights, vgg16

    model = vgg16(weights=VGG16_Weights.IMAGENET1K_V1)
    path = Path(asset_dir) / ASSET_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.features.state_dict(), path)
    logger.info("Wrote pretrained extractor weights to '%s'", path)
    return path


ExtractorRegistry.register(RANDOM_KIND, _build_random, override=True)
ExtractorRegistry.register(PRETRAINED_KIND, _build_pretrained, override=True)


def build_extractor(
    kind: str = RANDOM_KIND,
    tap_indices: Sequence[int] = DEFAULT_TAPS,
    seed: int = 0
) -> FeatureExtractor:
    """
    Build a frozen feature extractor by kind name.

    Parameters
    ----------
    kind : str, optional
        ``'fixed-random-test'`` or ``'pretrained-16-layer-conv'``.
        Default is the test kind.
    tap_indices : sequence of int, optional
        Layers to tap. Default is (2, 7, 12, 21).
    seed : int, optional
        Weight seed of the test kind. Default is 0.

    Raises
    ------
    ConfigError
        If ``kind`` is not registered.
    """
    try:
        builder = ExtractorRegistry.get(kind)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    return builder(tap_indices, seed)


def extract_features(
    fx: FeatureExtractor,
    image: Any
) -> list[torch.Tensor]:
    """Activations of ``fx`` at its taps for one image or a batch."""
    return fx(image)
