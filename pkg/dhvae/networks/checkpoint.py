"""
Checkpoint container for model and training state.

A checkpoint is one ``torch.save`` archive holding a JSON metadata
header (format version, model configuration, seed, iteration) next to
named state dictionaries. It is loaded with ``weights_only=True``, so
only tensors and plain containers are ever unpickled.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import torch

from dhvae.core.errors import FormatError
from dhvae.networks.autoencoder import JointVAE, ModelConfig, init_model

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'dhvae-ckpt-1'


@dataclass
class Checkpoint:
    """
    In-memory form of a checkpoint file.

    Attributes
    ----------
    metadata : dict
        Decoded header; always has ``format``, ``model``, ``seed`` and
        ``iteration``.
    states : dict
        Named state dictionaries; ``'model'`` is always present.
    """

    metadata: dict[str, Any]
    states: dict[str, Any] = field(default_factory=dict)

    @property
    def model_config(self) -> ModelConfig:
        """Configuration of the stored model."""
        return ModelConfig.from_dict(self.metadata['model'])

    @property
    def iteration(self) -> int:
        """Number of completed training iterations."""
        return int(self.metadata['iteration'])

    def restore_model(self, dtype: torch.dtype | None = None) -> JointVAE:
        """
        Rebuild the stored model with its trained parameters, in the
        stored dtype unless ``dtype`` is given.
        """
        state = self.states['model']
        stored = next(iter(state.values())).dtype
        model = init_model(self.model_config, dtype=stored)
        model.load_state_dict(state)
        return model if dtype is None else model.to(dtype)


def save_checkpoint(
    path: str | Path,
    model: JointVAE,
    iteration: int,
    seed: int,
    states: dict[str, Any] | None = None,
    extra_metadata: dict[str, Any] | None = None
) -> Path:
    """
    Write a checkpoint atomically (temporary file, then rename).

    Parameters
    ----------
    path : str or Path
        Target file.
    model : JointVAE
        Model whose parameters and configuration are stored.
    iteration : int
        Completed iteration count.
    seed : int
        Training seed.
    states : dict, optional
        Further state dictionaries (discriminator, optimizers, ...).
    extra_metadata : dict, optional
        JSON-serializable entries merged into the header.

    Returns
    -------
    Path
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {
        'format': CHECKPOINT_FORMAT,
        'model': model.cfg.to_dict(),
        'seed': int(seed),
        'iteration': int(iteration),
        **(extra_metadata or {}),
    }
    payload = {
        'header': json.dumps(metadata, sort_keys=True),
        'model': model.state_dict(),
        **(states or {}),
    }
    partial = path.with_name(path.name + '.partial')
    torch.save(payload, partial)
    partial.replace(path)
    logger.info("Checkpoint at iteration %d written to '%s'", iteration, path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    FormatError
        If the file is not a checkpoint of the supported format.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No checkpoint at '{path}'")
    try:
        payload = torch.load(path, map_location='cpu', weights_only=True)
    except (RuntimeError, EOFError, ValueError) as exc:
        raise FormatError(f"'{path}' is not a checkpoint: {exc}", 0) from exc
    if not isinstance(payload, dict) or 'header' not in payload:
        raise FormatError(f"'{path}' has no metadata header", 0)
    metadata = json.loads(payload.pop('header'))
    if metadata.get('format') != CHECKPOINT_FORMAT:
        raise FormatError(
            f"'{path}' has format {metadata.get('format')!r}, "
            f"expected {CHECKPOINT_FORMAT!r}", 0
        )
    return Checkpoint(metadata, payload)
