"""
Volumes to slice datasets.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

from dhvae.core.errors import ConfigError
from dhvae.data.slices import (
    SliceDataset,
    SlicePair,
    SplitTag,
    extract_tumor_slices,
)
from dhvae.data.volumes import MaskVolume3D, Volume3D, minmax_normalize
from dhvae.pipeline.config import DataConfig

logger = logging.getLogger(__name__)

Subject = tuple[Volume3D, MaskVolume3D]


def subject_slices(
    corpus: Sequence[Subject],
    cfg: DataConfig | None = None
) -> dict[str, list[SlicePair]]:
    """
    Tumor-bearing slices of every subject, keyed by subject id.

    Volumes are min-max normalized before slicing.
    """
    cfg = cfg or DataConfig()
    return {
        volume.subject_id: extract_tumor_slices(
            minmax_normalize(volume), mask, cfg.min_fg_pixels, cfg.axis
        )
        for volume, mask in corpus
    }


def prepare_dataset(
    corpus: Sequence[Subject],
    cfg: DataConfig | None = None,
    split_tag: SplitTag | str = SplitTag.TRAIN
) -> SliceDataset:
    """
    Build one slice dataset from paired volumes.

    Parameters
    ----------
    corpus : sequence of (Volume3D, MaskVolume3D)
        Paired subjects, in the order their slices are stored.
    cfg : DataConfig, optional
        Slicing settings (``min_fg_pixels``, ``axis``).
    split_tag : SplitTag or str, optional
        Role of the dataset. Default is train.

    Raises
    ------
    ConfigError
        If no subject has a tumor-bearing slice.
    """
    per_subject = subject_slices(corpus, cfg)
    pairs = [pair for slices in per_subject.values() for pair in slices]
    if not pairs:
        raise ConfigError(
            f"No tumor-bearing slices in {len(per_subject)} subjects"
        )
    empty = [sid for sid, slices in per_subject.items() if not slices]
    if empty:
        logger.warning("Subjects without tumor slices: %s", ', '.join(empty))
    logger.info(
        "Prepared %d slices from %d subjects", len(pairs), len(per_subject)
    )
    return SliceDataset.from_pairs(pairs, split_tag)
