"""
Data ingestion for dhvae.

Volumes and masks, tumor-slice extraction, slice datasets, the
synthetic blob corpus and classical augmentation.
"""

from dhvae.data.augment import classic_augment
from dhvae.data.blobs import make_blob_corpus
from dhvae.data.slices import (
    Provenance,
    SliceDataset,
    SlicePair,
    SplitTag,
    dataset_roundtrip,
    extract_tumor_slices,
    load_dataset,
    save_dataset,
)
from dhvae.data.volumes import (
    MaskVolume3D,
    Modality,
    Volume3D,
    check_pairing,
    list_volume_files,
    load_corpus,
    load_volume,
    mask_path_for,
    minmax_normalize,
    save_volume,
)

__all__ = [
    'MaskVolume3D',
    'Modality',
    'Provenance',
    'SliceDataset',
    'SlicePair',
    'SplitTag',
    'Volume3D',
    'check_pairing',
    'classic_augment',
    'dataset_roundtrip',
    'extract_tumor_slices',
    'list_volume_files',
    'load_corpus',
    'load_dataset',
    'load_volume',
    'make_blob_corpus',
    'mask_path_for',
    'minmax_normalize',
    'save_dataset',
    'save_volume',
]
