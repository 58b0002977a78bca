"""
Classical geometric augmentation of slice pairs.

Reference method for the augmentation experiment: every copy applies
one label-preserving transform identically to image and mask.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from dhvae.core.errors import ConfigError
from dhvae.data.slices import SlicePair
from dhvae.utils.seeding import numpy_rng

MAX_SHIFT_FRACTION = 0.1


def _shift(
    array: np.ndarray,
    dy: int,
    dx: int
) -> np.ndarray:
    # crop on one side, zero-pad on the other
    shifted = np.zeros_like(array)
    h, w = array.shape
    src_y = slice(max(0, -dy), h - max(0, dy))
    dst_y = slice(max(0, dy), h - max(0, -dy))
    src_x = slice(max(0, -dx), w - max(0, dx))
    dst_x = slice(max(0, dx), w - max(0, -dx))
    shifted[dst_y, dst_x] = array[src_y, src_x]
    return shifted


def _transforms(
    shape: tuple[int, int],
    rng: np.random.Generator
) -> list[Callable[[np.ndarray], np.ndarray]]:
    transforms: list[Callable[[np.ndarray], np.ndarray]] = [
        np.fliplr,
        np.flipud,
        lambda a: np.rot90(a, 2),
    ]
    if shape[0] == shape[1]:
        transforms += [lambda a: np.rot90(a, 1), lambda a: np.rot90(a, 3)]
    limit = max(1, int(MAX_SHIFT_FRACTION * min(shape)))
    dy, dx = (int(v) for v in rng.integers(-limit, limit + 1, size=2))
    transforms.append(lambda a: _shift(a, dy, dx))
    return transforms


def classic_augment(
    pairs: Sequence[SlicePair],
    factor: int,
    seed: int = 0
) -> list[SlicePair]:
    """
    Multiply a set of pairs by geometric augmentation.

    Parameters
    ----------
    pairs : sequence of SlicePair
        Original pairs; they are kept first in the output.
    factor : int
        Output size as a multiple of the input size (>= 1).
    seed : int, optional
        Seed of the transform choices. Default is 0.

    Returns
    -------
    list of SlicePair
        ``factor * len(pairs)`` pairs. Copies keep the subject id, slice
        index and provenance of their source.

    Raises
    ------
    ConfigError
        If ``factor`` < 1.
    """
    if factor < 1:
        raise ConfigError(f"Augmentation factor must be >= 1, got {factor}")
    output = list(pairs)
    for copy in range(1, factor):
        for index, pair in enumerate(pairs):
            rng = numpy_rng(seed, 'classic', copy, index)
            options = _transforms(pair.shape, rng)
            transform = options[int(rng.integers(len(options)))]
            output.append(SlicePair(
                image=np.ascontiguousarray(transform(pair.image)),
                mask=np.ascontiguousarray(transform(pair.mask)),
                subject_id=pair.subject_id,
                slice_index=pair.slice_index,
                provenance=pair.provenance,
            ))
    return output
