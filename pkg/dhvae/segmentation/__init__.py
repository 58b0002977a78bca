"""
Downstream slice-wise segmentation and volume-level evaluation.
"""

from dhvae.segmentation.selectors import (
    ClassifierSelector,
    FullSelector,
    OracleSelector,
    SliceRange,
    SliceSelector,
    make_selector,
)
from dhvae.segmentation.trainer import (
    HISTORY_COLUMNS,
    predict_slice,
    predict_slices,
    segmentation_loss,
    soft_dice_loss,
    train_segmenter,
)
from dhvae.segmentation.unet import SegConfig, UNet, init_segmenter
from dhvae.segmentation.volume import (
    evaluate_dsc,
    segment_volume,
    subject_dsc_scores,
)

__all__ = [
    'HISTORY_COLUMNS',
    'ClassifierSelector',
    'FullSelector',
    'OracleSelector',
    'SegConfig',
    'SliceRange',
    'SliceSelector',
    'UNet',
    'evaluate_dsc',
    'init_segmenter',
    'make_selector',
    'predict_slice',
    'predict_slices',
    'segment_volume',
    'segmentation_loss',
    'soft_dice_loss',
    'subject_dsc_scores',
    'train_segmenter',
]
