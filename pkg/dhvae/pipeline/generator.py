"""
Generator training loop.

One iteration draws a batch, estimates the Hamiltonian ELBO, adds the
feature, L1 and (after the warm-up) adversarial terms, steps the
generator on the global loss and then the discriminator on its own
term. All randomness of iteration ``t`` comes from a generator seeded
by ``(seed, 'iteration', t)``, so a run resumed from a checkpoint
replays the uninterrupted run exactly.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from tqdm.auto import tqdm

from dhvae.core.errors import ConfigError, NumericError
from dhvae.data.slices import SliceDataset
from dhvae.hmc.leapfrog import LeapfrogParams
from dhvae.losses.elbo import hvae_elbo
from dhvae.losses.objective import (
    CSV_FLOAT_FORMAT,
    LossReport,
    append_loss_csv,
    global_loss,
    read_loss_csv,
)
from dhvae.losses.regularizers import adversarial_losses, feature_recon_loss
from dhvae.networks.autoencoder import JointVAE, init_model
from dhvae.networks.checkpoint import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from dhvae.networks.discriminator import PatchDiscriminator, init_discriminator
from dhvae.networks.features import FeatureExtractor, build_extractor
from dhvae.pipeline.config import TrainConfig, build_config, plain_data
from dhvae.utils.seeding import config_hash, derive_seed, torch_generator

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'checkpoint.pt'
LOSSES_NAME = 'losses.csv'
RUN_LENGTH_KEYS = ('iterations', 'checkpoint_every')


def train_config_hash(cfg: TrainConfig) -> str:
    """Hash of the settings that shape the trajectory of a run."""
    data = plain_data(asdict(cfg))
    for key in RUN_LENGTH_KEYS:
        data.pop(key)
    return config_hash(data)


@dataclass
class GeneratorState:
    """Everything that evolves during generator training."""

    model: JointVAE
    lf: LeapfrogParams
    disc: PatchDiscriminator
    gen_optimizer: torch.optim.Optimizer
    disc_optimizer: torch.optim.Optimizer
    iteration: int = 0

    @classmethod
    def fresh(cls, cfg: TrainConfig) -> GeneratorState:
        """Initial networks and optimizers of a run."""
        dtype = cfg.dtype
        model = init_model(cfg.model, dtype=dtype)
        lf = LeapfrogParams.from_config(
            cfg.lf, cfg.model.latent_shape, dtype=dtype
        )
        disc = init_discriminator(cfg.model, depth=cfg.disc_depth,
                                  dtype=dtype)
        generator_params = [*model.parameters()] + [
            p for p in lf.parameters() if p.requires_grad
        ]
        return cls(
            model, lf, disc,
            cfg.optimizer.build(generator_params),
            cfg.optimizer.build(disc.parameters()),
        )

    def load(self, ckpt: Checkpoint) -> None:
        self.model.load_state_dict(ckpt.states['model'])
        self.lf.load_state_dict(ckpt.states['leapfrog'])
        self.disc.load_state_dict(ckpt.states['discriminator'])
        self.gen_optimizer.load_state_dict(ckpt.states['gen_optimizer'])
        self.disc_optimizer.load_state_dict(ckpt.states['disc_optimizer'])
        self.iteration = ckpt.iteration

    def save(self, path: Path, cfg: TrainConfig) -> Path:
        return save_checkpoint(
            path, self.model, self.iteration, cfg.seed,
            states={
                'leapfrog': self.lf.state_dict(),
                'discriminator': self.disc.state_dict(),
                'gen_optimizer': self.gen_optimizer.state_dict(),
                'disc_optimizer': self.disc_optimizer.state_dict(),
            },
            extra_metadata={
                'train': plain_data(asdict(cfg)),
                'config_hash': train_config_hash(cfg),
            },
        )


def _truncate_losses(path: Path, start: int) -> None:
    """Drop logged rows at or after ``start`` so a resume can re-log them."""
    if not path.exists():
        return
    frame = read_loss_csv(path)
    kept = frame[frame['iteration'] < start]
    if len(kept) == len(frame):
        return
    path.unlink()
    if len(kept):
        kept.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)


def _train_step(
    state: GeneratorState,
    fx: FeatureExtractor,
    images: torch.Tensor,
    masks: torch.Tensor,
    cfg: TrainConfig
) -> LossReport:
    iteration = state.iteration
    generator = torch_generator(derive_seed(cfg.seed, 'iteration', iteration))
    index = torch.randperm(len(images), generator=generator)[:cfg.batch_size]
    x, m = images[index], masks[index]

    state.model.train()
    terms = hvae_elbo(
        state.model, state.lf, x, m, generator,
        entropy_mode=cfg.entropy_mode, **cfg.likelihood,
    )
    feature, l1 = feature_recon_loss(terms.image_out, x, fx)
    disc_term, gen_term = adversarial_losses(
        state.disc, (x, m), (terms.image_out, terms.mask_prob)
    )
    components = {
        **terms.components(),
        'feature': feature,
        'l1': l1,
        'disc_gen': gen_term,
        'disc_disc': disc_term,
    }
    report = LossReport.from_components(
        {k: v.detach() for k, v in components.items()},
        cfg.weights, iteration,
    )

    state.gen_optimizer.zero_grad()
    global_loss(components, cfg.weights, iteration).backward()
    state.gen_optimizer.step()
    if cfg.weights.adversarial_active(iteration):
        state.disc_optimizer.zero_grad()
        disc_term.backward()
        state.disc_optimizer.step()
    state.iteration += 1
    return report


def train_generator(
    ds: SliceDataset,
    cfg: TrainConfig,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
    progress: bool = True
) -> Path:
    """
    Train the joint generator on a slice dataset.

    Parameters
    ----------
    ds : SliceDataset
        Non-empty training pairs matching ``cfg.model.slice_shape``.
    cfg : TrainConfig
        Run settings; ``cfg.iterations`` is the total, including
        iterations done before a resume.
    out_dir : str or Path
        Receives ``checkpoint.pt`` and ``losses.csv``.
    resume_from : str or Path, optional
        Checkpoint to continue from. Logged rows from its iteration on
        are dropped from ``losses.csv`` and logged again.
    progress : bool, optional
        Show a progress bar. Default is True.

    Returns
    -------
    Path
        The checkpoint of the final iteration.

    Raises
    ------
    ConfigError
        If the dataset is empty or does not fit the model.
    NumericError
        If a loss component turns non-finite. Nothing is written for
        that iteration, so the last checkpoint on disk stays the last
        good state.
    """
    if len(ds) == 0:
        raise ConfigError("Cannot train a generator on an empty dataset")
    if ds.slice_shape != cfg.model.slice_shape:
        raise ConfigError(
            f"Dataset slices {ds.slice_shape} do not match the model "
            f"slice_shape {cfg.model.slice_shape}"
        )
    if cfg.model.image_channels != 1:
        raise ConfigError("Slice datasets carry one image channel; "
                          "set model.in_channels = 2")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / CHECKPOINT_NAME
    losses_path = out_dir / LOSSES_NAME

    state = GeneratorState.fresh(cfg)
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.metadata.get('config_hash') != train_config_hash(cfg):
            logger.warning(
                "Resuming from '%s' with a different configuration",
                resume_from
            )
        state.load(ckpt)
        _truncate_losses(losses_path, state.iteration)
        logger.info("Resuming generator training at iteration %d",
                    state.iteration)
    elif losses_path.exists():
        losses_path.unlink()

    fx = build_extractor(cfg.extractor, seed=cfg.seed).to(cfg.dtype)
    images = torch.from_numpy(ds.images()).to(cfg.dtype)[:, None]
    masks = torch.from_numpy(ds.masks().astype(np.float32))
    masks = masks.to(cfg.dtype)[:, None]
    logger.info(
        "Training generator on %d slices for %d iterations "
        "(%d parameters)",
        len(ds), cfg.iterations, state.model.parameter_count
    )

    steps = tqdm(
        range(state.iteration, cfg.iterations), desc='generator',
        disable=not progress, leave=False
    )
    saved = False
    for _ in steps:
        try:
            report = _train_step(state, fx, images, masks, cfg)
        except NumericError as exc:
            logger.error(
                "Aborting at iteration %d (%s); last good checkpoint: %s",
                state.iteration, exc.stage,
                checkpoint_path if checkpoint_path.exists() else 'none'
            )
            raise
        append_loss_csv([report], losses_path)
        logger.debug("Iteration %d: %s", report.iteration, report.values)
        steps.set_postfix(loss=f"{report['global']:.4f}")
        done = state.iteration
        saved = done % cfg.checkpoint_every == 0 or done == cfg.iterations
        if saved:
            state.save(checkpoint_path, cfg)
    if not saved:
        state.save(checkpoint_path, cfg)
    logger.info("Generator training finished at iteration %d",
                state.iteration)
    return checkpoint_path


def checkpoint_train_config(ckpt: Checkpoint) -> TrainConfig:
    """Training settings stored in a generator checkpoint."""
    return build_config(TrainConfig, ckpt.metadata['train'], 'train.')


def restore_leapfrog(ckpt: Checkpoint) -> LeapfrogParams:
    """Rebuild the trained integrator of a generator checkpoint."""
    cfg = checkpoint_train_config(ckpt)
    state = ckpt.states['leapfrog']
    lf = LeapfrogParams.from_config(
        cfg.lf, ckpt.model_config.latent_shape,
        dtype=state['log_epsilon'].dtype
    )
    lf.load_state_dict(state)
    return lf
