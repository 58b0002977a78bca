"""
2D-to-3D segmentation: slice-wise prediction stacked into volumes.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from typing import Union

import numpy as np

from dhvae.core.errors import ConfigError
from dhvae.data.volumes import MaskVolume3D, Volume3D
from dhvae.metrics.masks import dsc
from dhvae.segmentation.selectors import SliceSelector, make_selector
from dhvae.segmentation.trainer import predict_slices
from dhvae.segmentation.unet import UNet

logger = logging.getLogger(__name__)

SlicePredictor = Callable[[np.ndarray], np.ndarray]
Predictor = Union[UNet, SlicePredictor]


def _predict(predictor: Predictor, images: np.ndarray) -> np.ndarray:
    if isinstance(predictor, UNet):
        return predict_slices(predictor, images)
    masks = [np.asarray(predictor(image), dtype=np.uint8) for image in images]
    return np.stack(masks)


def segment_volume(
    predictor: Predictor,
    vol: Volume3D,
    selector: SliceSelector | str | tuple[int, int] = 'full',
    gt: MaskVolume3D | None = None
) -> MaskVolume3D:
    """
    Segment a volume slice by slice along its last axis.

    Parameters
    ----------
    predictor : UNet or callable
        Trained segmenter, or any ``slice -> binary mask`` callable.
    vol : Volume3D
        Normalized image volume.
    selector : SliceSelector, str or (start, stop), optional
        Which slices to predict; the rest are background.
        Default is every slice.
    gt : MaskVolume3D, optional
        Ground truth for the oracle policy.

    Raises
    ------
    RangeError
        If an explicit range leaves the volume.
    """
    if isinstance(selector, tuple):
        selector = make_selector('range', start=selector[0], stop=selector[1])
    selected = make_selector(selector).select(vol, gt)
    labels = np.zeros(vol.shape, dtype=np.uint8)
    if len(selected):
        images = np.moveaxis(vol.values[..., selected.start:selected.stop],
                             -1, 0)
        labels[..., selected.start:selected.stop] = np.moveaxis(
            _predict(predictor, images), 0, -1
        )
    return MaskVolume3D(labels, vol.spacing, vol.subject_id)


def subject_dsc_scores(
    predictor: Predictor,
    test: Sequence[tuple[Volume3D, MaskVolume3D]],
    selector_policy: SliceSelector | str = 'oracle'
) -> list[float]:
    """Volume DSC of every test subject, in input order."""
    scores = []
    for volume, gt in test:
        predicted = segment_volume(predictor, volume, selector_policy, gt)
        scores.append(dsc(predicted.values, gt.values))
    return scores


def evaluate_dsc(
    predictor: Predictor,
    test: Sequence[tuple[Volume3D, MaskVolume3D]],
    selector_policy: SliceSelector | str = 'oracle'
) -> tuple[float, float]:
    """
    Mean and (population) standard deviation of per-subject volume DSC.

    Raises
    ------
    ConfigError
        If the test set is empty.
    """
    if not test:
        raise ConfigError("Cannot evaluate on an empty test set")
    scores = np.asarray(subject_dsc_scores(predictor, test, selector_policy))
    logger.debug("Volume DSC per subject: %s", np.round(scores, 4).tolist())
    return float(scores.mean()), float(scores.std())
