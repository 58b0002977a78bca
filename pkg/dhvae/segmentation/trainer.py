"""
Training and slice-wise inference of the segmenter.
"""

from __future__ import annotations

import logging
from typing import Any

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from tqdm.auto import tqdm

from dhvae.core.errors import ConfigError, ShapeError
from dhvae.data.slices import SliceDataset
from dhvae.metrics.masks import dsc
from dhvae.segmentation.unet import SegConfig, UNet, init_segmenter
from dhvae.utils.seeding import derive_seed, torch_generator

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'loss', 'train_dsc']
SOFT_DICE_SMOOTH = 1.0
PREDICT_BATCH = 64


def soft_dice_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """``1 - soft DSC`` of the whole batch, smoothed by 1."""
    prob = torch.sigmoid(logits)
    intersection = (prob * target).sum()
    return 1.0 - (2.0 * intersection + SOFT_DICE_SMOOTH) / (
        prob.sum() + target.sum() + SOFT_DICE_SMOOTH
    )


def segmentation_loss(
    logits: torch.Tensor,
    target: torch.Tensor
) -> torch.Tensor:
    """Pixelwise binary cross-entropy plus soft-DSC loss."""
    return (
        F.binary_cross_entropy_with_logits(logits, target)
        + soft_dice_loss(logits, target)
    )


def predict_slices(model: UNet, images: Any) -> np.ndarray:
    """
    Binary masks for an (N, H, W) stack; foreground where the predicted
    probability is at least 0.5.
    """
    images = np.asarray(images, dtype=np.float32)
    if images.ndim == 2:
        images = images[None]
    outputs = []
    model.eval()
    with torch.no_grad():
        for start in range(0, len(images), PREDICT_BATCH):
            chunk = torch.from_numpy(
                np.ascontiguousarray(images[start:start + PREDICT_BATCH])
            )[:, None]
            prob = torch.sigmoid(model(chunk))
            outputs.append((prob[:, 0] >= 0.5).numpy().astype(np.uint8))
    if not outputs:
        return np.zeros((0, *images.shape[1:]), dtype=np.uint8)
    return np.concatenate(outputs)


def predict_slice(
    model: UNet,
    image: Any,
    slice_shape: tuple[int, int] | None = None
) -> np.ndarray:
    """
    Binary mask of one slice.

    Raises
    ------
    ShapeError
        If ``image`` is not 2D or does not match ``slice_shape``.
    """
    image = np.asarray(image)
    if image.ndim != 2 or (
        slice_shape is not None and image.shape != tuple(slice_shape)
    ):
        raise ShapeError(
            f"Expected one slice of shape {slice_shape}, got {image.shape}"
        )
    try:
        return predict_slices(model, image)[0]
    except RuntimeError as exc:
        raise ShapeError(
            f"Slice of shape {image.shape} does not fit the segmenter"
        ) from exc


def train_segmenter(
    ds: SliceDataset,
    cfg: SegConfig,
    progress: bool = True
) -> tuple[UNet, pd.DataFrame]:
    """
    Train a U-Net on a slice dataset.

    Parameters
    ----------
    ds : SliceDataset
        Non-empty training pairs.
    cfg : SegConfig
        Architecture and schedule.
    progress : bool, optional
        Show a progress bar over epochs. Default is True.

    Returns
    -------
    model : UNet
        Trained segmenter in evaluation mode.
    history : pd.DataFrame
        One row per epoch: epoch, mean batch loss, train DSC.

    Raises
    ------
    ConfigError
        If the dataset is empty or its slice shape does not fit the
        segmenter depth.
    """
    if len(ds) == 0:
        raise ConfigError("Cannot train a segmenter on an empty dataset")
    cfg.check_shape(ds.slice_shape)
    images = torch.from_numpy(ds.images())[:, None]
    masks = torch.from_numpy(ds.masks().astype(np.float32))[:, None]
    model = init_segmenter(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    generator = torch_generator(derive_seed(cfg.seed, 'segmenter-shuffle'))

    rows = []
    epochs = tqdm(
        range(cfg.epochs), desc='segmenter', disable=not progress,
        leave=False
    )
    for epoch in epochs:
        model.train()
        order = torch.randperm(len(ds), generator=generator)
        losses = []
        for start in range(0, len(ds), cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            loss = segmentation_loss(model(images[index]), masks[index])
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        predicted = predict_slices(model, images[:, 0].numpy())
        train_dsc = dsc(predicted, ds.masks())
        rows.append((epoch, float(np.mean(losses)), train_dsc))
        logger.debug(
            "Segmenter epoch %d: loss %.4f, train DSC %.4f",
            epoch, rows[-1][1], train_dsc
        )
    model.eval()
    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    logger.info(
        "Trained segmenter on %d slices for %d epochs (final DSC %.3f)",
        len(ds), cfg.epochs, history['train_dsc'].iloc[-1]
    )
    return model, history
