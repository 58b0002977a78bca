"""
Volume containers and readers.

This module defines the immutable 3D image and mask volumes, reads and
writes them in the NIfTI format and in a small raw float32 test
container, and pairs images with masks by file naming convention.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import nibabel as nib
import numpy as np

from dhvae.core.errors import (
    DomainError,
    FormatError,
    IngestionError,
    PairingError,
    ShapeError,
)
from dhvae.core.registry import ReaderRegistry

logger = logging.getLogger(__name__)

MASK_SUFFIX = '_mask'
RAW_SUFFIX = '.rawvol'
NIFTI_SUFFIXES = ('.nii', '.nii.gz')


class Modality(str, Enum):
    """Acquisition modality of a volume."""

    MRI_FLAIR = 'MRI-FLAIR'
    PET = 'PET'
    SYNTHETIC = 'SYNTHETIC'


def _spacing_tuple(spacing: Sequence[float]) -> tuple[float, float, float]:
    values = tuple(float(s) for s in spacing)
    if len(values) != 3 or not all(np.isfinite(values)) or min(values) <= 0:
        raise IngestionError(
            f"Voxel spacing must be three positive numbers, got {spacing}"
        )
    return values  # type: ignore[return-value]


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Volume3D:
    """
    A 3D scalar field with voxel spacing and modality metadata.

    Parameters
    ----------
    values : np.ndarray
        Intensities with shape (H, W, D). Stored as read-only float32.
    spacing : tuple of float, optional
        Voxel size in mm along each axis. Default is (1, 1, 1).
    modality : Modality, optional
        Acquisition modality. Default is ``Modality.SYNTHETIC``.
    subject_id : str, optional
        Identifier of the subject the volume belongs to.

    Raises
    ------
    ShapeError
        If the array is not 3D or any dimension is empty.
    IngestionError
        If values are non-finite or spacing is not positive.
    """

    values: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    modality: Modality = Modality.SYNTHETIC
    subject_id: str = ''

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 3 or min(values.shape) < 1:
            raise ShapeError(
                f"Volume must be 3D with non-empty axes, got {values.shape}"
            )
        bad = int(values.size - np.count_nonzero(np.isfinite(values)))
        if bad:
            raise IngestionError(
                f"Volume '{self.subject_id}' has {bad} non-finite voxels"
            )
        object.__setattr__(self, 'values', _frozen(values))
        object.__setattr__(self, 'spacing', _spacing_tuple(self.spacing))
        object.__setattr__(self, 'modality', Modality(self.modality))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Shape (H, W, D) of the volume."""
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class MaskVolume3D:
    """
    A binary label volume paired with a :class:`Volume3D`.

    Parameters
    ----------
    values : np.ndarray
        Labels in {0, 1} with shape (H, W, D). Stored as read-only uint8.
    spacing : tuple of float, optional
        Voxel size in mm; must match the paired image.
    subject_id : str, optional
        Identifier of the subject the mask belongs to.

    Raises
    ------
    ShapeError
        If the array is not 3D.
    DomainError
        If any label is outside {0, 1}.
    """

    values: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    subject_id: str = ''

    def __post_init__(self) -> None:
        raw = np.asarray(self.values)
        if raw.ndim != 3 or min(raw.shape) < 1:
            raise ShapeError(
                f"Mask must be 3D with non-empty axes, got {raw.shape}"
            )
        if not np.all((raw == 0) | (raw == 1)):
            raise DomainError(
                f"Mask '{self.subject_id}' contains labels outside {{0, 1}}"
            )
        object.__setattr__(self, 'values', _frozen(raw.astype(np.uint8)))
        object.__setattr__(self, 'spacing', _spacing_tuple(self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        """Shape (H, W, D) of the mask."""
        return self.values.shape  # type: ignore[return-value]

    @property
    def foreground_voxels(self) -> int:
        """Number of voxels labelled 1."""
        return int(self.values.sum(dtype=np.int64))


def check_pairing(volume: Volume3D, mask: MaskVolume3D) -> None:
    """
    Verify that a mask belongs to an image volume.

    Raises
    ------
    PairingError
        If shapes differ.
    """
    if volume.shape != mask.shape:
        raise PairingError(
            f"Image shape {volume.shape} and mask shape {mask.shape} "
            f"differ for subject '{volume.subject_id}'"
        )


def _read_nifti(path: Path) -> tuple[np.ndarray, tuple[float, ...]]:
    image = nib.load(str(path))
    values = np.asarray(image.get_fdata(dtype=np.float32))
    while values.ndim > 3 and values.shape[-1] == 1:
        values = values[..., 0]
    spacing = tuple(float(z) for z in image.header.get_zooms()[:3])
    return values, spacing


def _read_raw(path: Path) -> tuple[np.ndarray, tuple[float, ...]]:
    blob = path.read_bytes()
    newline = blob.find(b'\n')
    if newline < 0:
        raise FormatError(f"No header line in '{path}'", offset=0)
    fields = blob[:newline].decode('ascii', errors='replace').split()
    try:
        h, w, d = (int(f) for f in fields[:3])
        spacing = tuple(float(f) for f in fields[3:6])
    except ValueError as exc:
        raise FormatError(f"Malformed header in '{path}'", offset=0) from exc
    if len(fields) != 6:
        raise FormatError(
            f"Header of '{path}' must have 6 fields, got {len(fields)}",
            offset=0
        )
    payload = blob[newline + 1:]
    expected = h * w * d * 4
    if len(payload) != expected:
        raise FormatError(
            f"Payload of '{path}' holds {len(payload)} bytes, "
            f"header declares {expected}",
            offset=newline + 1 + min(len(payload), expected)
        )
    values = np.frombuffer(payload, dtype='<f4').reshape(h, w, d)
    return values.astype(np.float32), spacing


ReaderRegistry.register('.nii', _read_nifti)
ReaderRegistry.register('.nii.gz', _read_nifti)
ReaderRegistry.register(RAW_SUFFIX, _read_raw)


def split_suffix(path: Path) -> tuple[str, str]:
    """
    Split a volume file name into stem and container suffix.

    Examples
    --------
    >>> split_suffix(Path('sub01_mask.nii.gz'))
    ('sub01_mask', '.nii.gz')
    """
    name = path.name
    if name.endswith('.nii.gz'):
        return name[:-len('.nii.gz')], '.nii.gz'
    return path.stem, path.suffix


def mask_path_for(path: Path) -> Path:
    """Return the ``<stem>_mask`` companion path of an image file."""
    stem, suffix = split_suffix(Path(path))
    return Path(path).with_name(f"{stem}{MASK_SUFFIX}{suffix}")


def _read_array(path: Path) -> tuple[np.ndarray, tuple[float, ...]]:
    if not path.is_file():
        raise IngestionError(f"Volume file '{path}' does not exist")
    _, suffix = split_suffix(path)
    try:
        reader = ReaderRegistry.get(suffix)
    except KeyError as exc:
        raise IngestionError(
            f"Unsupported volume container '{suffix}' for '{path}'"
        ) from exc
    values, spacing = reader(path)
    bad = int(values.size - np.count_nonzero(np.isfinite(values)))
    if bad:
        raise IngestionError(f"'{path}' contains {bad} NaN/Inf voxels")
    return values, spacing


def load_volume(
    path: str | Path,
    modality: Modality | str | None = None,
    binarize_labels: bool = True
) -> tuple[Volume3D, MaskVolume3D | None]:
    """
    Load an image volume and, when present, its paired mask.

    Parameters
    ----------
    path : str or Path
        Image file (``.nii``, ``.nii.gz`` or ``.rawvol``).
    modality : Modality or str, optional
        Modality tag. Defaults to ``SYNTHETIC`` for the raw test
        container and ``MRI-FLAIR`` for NIfTI files.
    binarize_labels : bool, optional
        Map every positive mask label to 1 (whole-tumor union). When
        False, masks must already be binary. Default is True.

    Returns
    -------
    tuple
        ``(volume, mask)``; ``mask`` is None when no ``<stem>_mask``
        file sits next to the image.

    Raises
    ------
    IngestionError
        If the file is missing or contains NaN/Inf voxels.
    PairingError
        If the mask shape differs from the image shape.
    """
    path = Path(path)
    stem, suffix = split_suffix(path)
    if modality is None:
        modality = (
            Modality.SYNTHETIC if suffix == RAW_SUFFIX
            else Modality.MRI_FLAIR
        )
    values, spacing = _read_array(path)
    volume = Volume3D(values, spacing, Modality(modality), stem)

    mask_file = mask_path_for(path)
    if not mask_file.is_file():
        logger.debug("No mask found for '%s'", path)
        return volume, None

    labels, _ = _read_array(mask_file)
    if labels.shape != volume.shape:
        raise PairingError(
            f"Mask '{mask_file.name}' has shape {labels.shape}, "
            f"image '{path.name}' has {volume.shape}"
        )
    if binarize_labels:
        labels = (labels > 0).astype(np.uint8)
    mask = MaskVolume3D(labels, volume.spacing, stem)
    return volume, mask


def save_volume(volume: Volume3D | MaskVolume3D, path: str | Path) -> Path:
    """
    Write a volume or mask in the container implied by the suffix.

    Parameters
    ----------
    volume : Volume3D or MaskVolume3D
        The data to write.
    path : str or Path
        Target file ending in ``.nii``, ``.nii.gz`` or ``.rawvol``.

    Returns
    -------
    Path
        The written path.
    """
    path = Path(path)
    _, suffix = split_suffix(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if suffix in NIFTI_SUFFIXES:
        affine = np.diag([*volume.spacing, 1.0])
        dtype = np.uint8 if isinstance(volume, MaskVolume3D) else np.float32
        nib.save(
            nib.Nifti1Image(np.asarray(volume.values, dtype=dtype), affine),
            str(path)
        )
    elif suffix == RAW_SUFFIX:
        h, w, d = volume.shape
        sx, sy, sz = volume.spacing
        header = f"{h} {w} {d} {sx!r} {sy!r} {sz!r}\n".encode('ascii')
        payload = np.ascontiguousarray(volume.values, dtype='<f4').tobytes()
        path.write_bytes(header + payload)
    else:
        raise IngestionError(f"Unsupported volume container '{suffix}'")
    return path


def minmax_normalize(volume: Volume3D) -> Volume3D:
    """
    Map intensities affinely onto [0, 1].

    Constant volumes map to all zeros.

    Examples
    --------
    >>> v = Volume3D(np.array([0.0, 100.0, 200.0]).reshape(1, 1, 3))
    >>> minmax_normalize(v).values.ravel().tolist()
    [0.0, 0.5, 1.0]
    """
    values = volume.values.astype(np.float64)
    low, high = float(values.min()), float(values.max())
    if high == low:
        scaled = np.zeros_like(values)
    else:
        scaled = np.clip((values - low) / (high - low), 0.0, 1.0)
    return replace(volume, values=scaled.astype(np.float32))


def list_volume_files(directory: str | Path) -> list[Path]:
    """
    List image files (not masks) in a directory, sorted by name.
    """
    directory = Path(directory)
    files = []
    for path in sorted(directory.iterdir()):
        stem, suffix = split_suffix(path)
        if suffix in ReaderRegistry.list_available() and not (
            stem.endswith(MASK_SUFFIX)
        ):
            files.append(path)
    return files


def load_corpus(
    directory: str | Path,
    modality: Modality | str | None = None,
    workers: int = 1
) -> list[tuple[Volume3D, MaskVolume3D]]:
    """
    Load every image/mask pair of a directory.

    Files are read concurrently when ``workers > 1``; the result order
    always follows the sorted file names.

    Raises
    ------
    PairingError
        If an image has no mask.
    """
    files = list_volume_files(directory)

    def _load(path: Path) -> tuple[Volume3D, MaskVolume3D]:
        volume, mask = load_volume(path, modality)
        if mask is None:
            raise PairingError(f"No '{MASK_SUFFIX}' file next to '{path}'")
        return volume, mask

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        corpus = list(pool.map(_load, files))
    logger.info("Loaded %d subjects from '%s'", len(corpus), directory)
    return corpus
