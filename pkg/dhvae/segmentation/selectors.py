"""
Slice selector policies.

A selector decides which slices of a volume the segmenter is run on;
slices outside the selection are labelled background. Policies are
registered in :class:`SelectorRegistry` under their ``name``.
"""

from __future__ import annotations

import inspect
from abc import ABC, abstractmethod
from collections.abc import Callable
from typing import Any

import numpy as np

from dhvae.core.errors import ConfigError, RangeError
from dhvae.core.registry import SelectorRegistry
from dhvae.data.volumes import MaskVolume3D, Volume3D


class SliceSelector(ABC):
    """Base class of selector policies."""

    name: str = ''

    @abstractmethod
    def select(
        self,
        volume: Volume3D,
        gt: MaskVolume3D | None = None
    ) -> range:
        """
        Contiguous range of slice indices along the last axis.

        Parameters
        ----------
        volume : Volume3D
            Normalized image volume.
        gt : MaskVolume3D, optional
            Ground truth, used only by the oracle policy.
        """


class SliceRange(SliceSelector):
    """
    A fixed range of slices.

    Raises
    ------
    RangeError
        From :meth:`select`, if the range leaves the volume.
    """

    name = 'range'

    def __init__(self, start: int, stop: int) -> None:
        self.start = int(start)
        self.stop = int(stop)

    def select(
        self,
        volume: Volume3D,
        gt: MaskVolume3D | None = None
    ) -> range:
        depth = volume.shape[-1]
        if not 0 <= self.start <= self.stop <= depth:
            raise RangeError(
                f"Slice range [{self.start}, {self.stop}) outside volume "
                f"depth {depth}"
            )
        return range(self.start, self.stop)


class FullSelector(SliceSelector):
    """Every slice; fully automatic mode."""

    name = 'full'

    def select(
        self,
        volume: Volume3D,
        gt: MaskVolume3D | None = None
    ) -> range:
        return range(volume.shape[-1])


class OracleSelector(SliceSelector):
    """
    First to last tumor-bearing slice of the ground truth, standing in
    for an operator marking the tumor extent.
    """

    name = 'oracle'

    def select(
        self,
        volume: Volume3D,
        gt: MaskVolume3D | None = None
    ) -> range:
        if gt is None:
            raise ConfigError("The oracle selector needs a ground truth mask")
        present = np.flatnonzero(gt.values.reshape(-1, gt.shape[-1]).any(0))
        if present.size == 0:
            return range(0)
        return range(int(present[0]), int(present[-1]) + 1)


class ClassifierSelector(SliceSelector):
    """
    Tumor-presence classifier interface.

    Parameters
    ----------
    predicate : callable
        ``slice (H, W) -> bool``; the selection spans the first to the
        last slice it accepts.
    """

    name = 'classifier'

    def __init__(self, predicate: Callable[[np.ndarray], bool]) -> None:
        self.predicate = predicate

    def select(
        self,
        volume: Volume3D,
        gt: MaskVolume3D | None = None
    ) -> range:
        hits = [
            index for index in range(volume.shape[-1])
            if self.predicate(volume.values[..., index])
        ]
        if not hits:
            return range(0)
        return range(hits[0], hits[-1] + 1)


for _selector in (SliceRange, FullSelector, OracleSelector,
                  ClassifierSelector):
    SelectorRegistry.register(_selector.name, _selector, override=True)


def make_selector(policy: str | SliceSelector, **kwargs: Any) -> SliceSelector:
    """
    Resolve a policy name (or pass a selector through).

    Raises
    ------
    ConfigError
        If the policy name is not registered, or the keyword arguments
        do not fit the selector.
    """
    if isinstance(policy, SliceSelector):
        return policy
    try:
        selector_cls = SelectorRegistry.get(policy)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    params = inspect.signature(selector_cls).parameters
    missing = sorted(
        name for name, param in params.items()
        if param.default is param.empty and name not in kwargs
        and param.kind not in (param.VAR_POSITIONAL, param.VAR_KEYWORD)
    )
    unknown = sorted(set(kwargs) - set(params))
    if missing or unknown:
        raise ConfigError(
            f"Selector '{policy}': missing keys {missing}, "
            f"unknown keys {unknown}"
        )
    return selector_cls(**kwargs)
