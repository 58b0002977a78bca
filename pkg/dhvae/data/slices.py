"""
2D slice pairs and slice datasets.

A :class:`SlicePair` is the unit of training: one image slice in [0, 1]
with its binary mask. A :class:`SliceDataset` is an ordered collection
of equally shaped pairs that can be saved to and loaded from a single
archive.
"""

from __future__ import annotations

import io
import json
import logging
import zipfile
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from dhvae.core.errors import (
    ConfigError,
    DomainError,
    FormatError,
    ShapeError,
)
from dhvae.data.volumes import MaskVolume3D, Volume3D, check_pairing

logger = logging.getLogger(__name__)

ARCHIVE_VERSION = 'dhvae-slices-1'
MANIFEST_COLUMNS = ['subject_id', 'slice_index', 'provenance']


class Provenance(str, Enum):
    """Origin of a slice pair."""

    REAL = 'real'
    SYNTHETIC = 'synthetic'


class SplitTag(str, Enum):
    """Role of a dataset in an experiment."""

    TRAIN = 'train'
    TEST = 'test'


@dataclass(frozen=True, eq=False)
class SlicePair:
    """
    One 2D image slice with its binary mask.

    Parameters
    ----------
    image : np.ndarray
        Intensities in [0, 1], shape (H, W). Stored read-only float32.
    mask : np.ndarray
        Labels in {0, 1}, shape (H, W). Stored read-only uint8.
    subject_id : str
        Subject the slice comes from (or a synthetic identifier).
    slice_index : int
        Index of the slice along the slicing axis.
    provenance : Provenance, optional
        Whether the pair is real or synthetic. Default is real.

    Raises
    ------
    ShapeError
        If image and mask are not 2D arrays of the same shape.
    DomainError
        If the image leaves [0, 1] or the mask is not binary.
    """

    image: np.ndarray
    mask: np.ndarray
    subject_id: str
    slice_index: int
    provenance: Provenance = Provenance.REAL

    def __post_init__(self) -> None:
        image = np.asarray(self.image, dtype=np.float32)
        mask = np.asarray(self.mask)
        if image.ndim != 2 or image.shape != mask.shape:
            raise ShapeError(
                f"Image {image.shape} and mask {mask.shape} must be "
                f"2D arrays of equal shape"
            )
        if not np.all(np.isfinite(image)) or image.size and (
            image.min() < 0.0 or image.max() > 1.0
        ):
            raise DomainError(
                f"Slice {self.subject_id}[{self.slice_index}] image "
                f"leaves [0, 1]"
            )
        if not np.all((mask == 0) | (mask == 1)):
            raise DomainError(
                f"Slice {self.subject_id}[{self.slice_index}] mask "
                f"is not binary"
            )
        image = np.ascontiguousarray(image)
        image.setflags(write=False)
        mask = np.ascontiguousarray(mask, dtype=np.uint8)
        mask.setflags(write=False)
        object.__setattr__(self, 'image', image)
        object.__setattr__(self, 'mask', mask)
        object.__setattr__(self, 'slice_index', int(self.slice_index))
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    @property
    def shape(self) -> tuple[int, int]:
        """Shape (H, W) of the slice."""
        return self.image.shape  # type: ignore[return-value]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SlicePair):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.slice_index == other.slice_index
            and self.provenance == other.provenance
            and np.array_equal(self.image, other.image)
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class SliceDataset:
    """
    An ordered collection of equally shaped slice pairs.

    Parameters
    ----------
    pairs : sequence of SlicePair
        The pairs, in their deterministic order.
    slice_shape : tuple of int
        Common (H, W) of all pairs.
    split_tag : SplitTag, optional
        Train or test role. Default is train.
    """

    pairs: tuple[SlicePair, ...]
    slice_shape: tuple[int, int]
    split_tag: SplitTag = SplitTag.TRAIN

    def __post_init__(self) -> None:
        pairs = tuple(self.pairs)
        shape = (int(self.slice_shape[0]), int(self.slice_shape[1]))
        for pair in pairs:
            if pair.shape != shape:
                raise ShapeError(
                    f"Pair {pair.subject_id}[{pair.slice_index}] has shape "
                    f"{pair.shape}, dataset expects {shape}"
                )
        object.__setattr__(self, 'pairs', pairs)
        object.__setattr__(self, 'slice_shape', shape)
        object.__setattr__(self, 'split_tag', SplitTag(self.split_tag))

    @classmethod
    def from_pairs(
        cls,
        pairs: Sequence[SlicePair],
        split_tag: SplitTag | str = SplitTag.TRAIN,
        slice_shape: tuple[int, int] | None = None
    ) -> SliceDataset:
        """
        Build a dataset, inferring the slice shape from the first pair.

        Raises
        ------
        ConfigError
            If the dataset is empty and no slice shape is given.
        """
        if slice_shape is None:
            if not pairs:
                raise ConfigError(
                    "Cannot infer slice_shape of an empty dataset"
                )
            slice_shape = pairs[0].shape
        return cls(tuple(pairs), slice_shape, SplitTag(split_tag))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SlicePair]:
        return iter(self.pairs)

    def __getitem__(self, index: int) -> SlicePair:
        return self.pairs[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SliceDataset):
            return NotImplemented
        return (
            self.slice_shape == other.slice_shape
            and self.split_tag == other.split_tag
            and self.pairs == other.pairs
        )

    __hash__ = None  # type: ignore[assignment]

    def images(self) -> np.ndarray:
        """Stack images into an (N, H, W) float32 array."""
        if not self.pairs:
            return np.zeros((0, *self.slice_shape), dtype=np.float32)
        return np.stack([p.image for p in self.pairs])

    def masks(self) -> np.ndarray:
        """Stack masks into an (N, H, W) uint8 array."""
        if not self.pairs:
            return np.zeros((0, *self.slice_shape), dtype=np.uint8)
        return np.stack([p.mask for p in self.pairs])

    def subjects(self) -> list[str]:
        """Distinct subject identifiers in order of first appearance."""
        return list(dict.fromkeys(p.subject_id for p in self.pairs))

    def merged(self, other: Sequence[SlicePair]) -> SliceDataset:
        """Return a new dataset with ``other`` appended."""
        return SliceDataset(
            self.pairs + tuple(other), self.slice_shape, self.split_tag
        )


def extract_tumor_slices(
    volume: Volume3D,
    mask: MaskVolume3D,
    min_fg_pixels: int = 10,
    axis: int = -1
) -> list[SlicePair]:
    """
    Extract the tumor-bearing 2D slices of a paired volume.

    Parameters
    ----------
    volume : Volume3D
        Image volume, already normalized to [0, 1].
    mask : MaskVolume3D
        Paired binary mask.
    min_fg_pixels : int, optional
        Minimum foreground pixel count for a slice to be kept
        (inclusive). Default is 10.
    axis : int, optional
        Slicing axis. Default is the last (axial) axis.

    Returns
    -------
    list of SlicePair
        Kept slices ordered by slice index, provenance real.

    Raises
    ------
    PairingError
        If image and mask shapes differ.
    ConfigError
        If ``min_fg_pixels`` is below 1.
    """
    if min_fg_pixels < 1:
        raise ConfigError(f"min_fg_pixels must be >= 1, got {min_fg_pixels}")
    check_pairing(volume, mask)
    images = np.moveaxis(volume.values, axis, 0)
    labels = np.moveaxis(mask.values, axis, 0)
    counts = labels.reshape(labels.shape[0], -1).sum(axis=1)

    pairs = []
    for index in np.flatnonzero(counts >= min_fg_pixels):
        pairs.append(SlicePair(
            image=np.clip(images[index], 0.0, 1.0),
            mask=labels[index],
            subject_id=volume.subject_id,
            slice_index=int(index),
            provenance=Provenance.REAL,
        ))
    logger.debug(
        "Subject '%s': kept %d of %d slices",
        volume.subject_id, len(pairs), len(counts)
    )
    return pairs


def save_dataset(dataset: SliceDataset, path: str | Path) -> Path:
    """
    Write a dataset as one archive: image block, mask block, manifest.

    Parameters
    ----------
    dataset : SliceDataset
        Dataset to save.
    path : str or Path
        Target file; written as-is (no suffix is appended).

    Returns
    -------
    Path
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = pd.DataFrame(
        [
            (p.subject_id, p.slice_index, p.provenance.value)
            for p in dataset.pairs
        ],
        columns=MANIFEST_COLUMNS,
    ).to_csv(index=False)
    meta = json.dumps({
        'version': ARCHIVE_VERSION,
        'slice_shape': list(dataset.slice_shape),
        'split_tag': dataset.split_tag.value,
    })
    with open(path, 'wb') as handle:
        np.savez_compressed(
            handle,
            images=dataset.images(),
            masks=dataset.masks(),
            manifest=np.frombuffer(manifest.encode('utf-8'), dtype=np.uint8),
            meta=np.frombuffer(meta.encode('utf-8'), dtype=np.uint8),
        )
    logger.info("Saved %d slice pairs to '%s'", len(dataset), path)
    return path


def _verify_archive(path: Path) -> None:
    size = path.stat().st_size
    try:
        with zipfile.ZipFile(path) as archive:
            broken = archive.testzip()
            if broken is not None:
                raise FormatError(
                    f"Archive member '{broken}' of '{path}' is corrupt",
                    offset=archive.getinfo(broken).header_offset
                )
    except zipfile.BadZipFile as exc:
        # the end-of-central-directory record sits in the last 22 bytes
        raise FormatError(
            f"'{path}' is not a dataset archive: {exc}",
            offset=max(size - 22, 0)
        ) from exc


def load_dataset(path: str | Path) -> SliceDataset:
    """
    Read a dataset written by :func:`save_dataset`.

    Raises
    ------
    FormatError
        If the archive is corrupt or incomplete; the error carries the
        byte offset where the problem was found.
    """
    path = Path(path)
    _verify_archive(path)
    with np.load(path, allow_pickle=False) as archive:
        missing = {'images', 'masks', 'manifest', 'meta'} - set(
            archive.files
        )
        if missing:
            raise FormatError(
                f"'{path}' lacks members {sorted(missing)}", offset=0
            )
        images = archive['images']
        masks = archive['masks']
        manifest_text = archive['manifest'].tobytes().decode('utf-8')
        meta = json.loads(archive['meta'].tobytes().decode('utf-8'))

    manifest = pd.read_csv(
        io.StringIO(manifest_text),
        dtype={'subject_id': str, 'slice_index': np.int64,
               'provenance': str},
        keep_default_na=False,
    )
    if len(manifest) != len(images) or len(images) != len(masks):
        raise FormatError(
            f"'{path}' manifest has {len(manifest)} rows for "
            f"{len(images)} images and {len(masks)} masks",
            offset=0
        )
    pairs = tuple(
        SlicePair(image, mask, row.subject_id, int(row.slice_index),
                  Provenance(row.provenance))
        for image, mask, row in zip(
            images, masks, manifest.itertuples(index=False), strict=True
        )
    )
    return SliceDataset(
        pairs, tuple(meta['slice_shape']), SplitTag(meta['split_tag'])
    )


def dataset_roundtrip(dataset: SliceDataset, path: str | Path) -> SliceDataset:
    """Save ``dataset`` to ``path`` and load it back."""
    save_dataset(dataset, path)
    return load_dataset(path)
