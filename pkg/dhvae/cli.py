"""
Command-line entry point.

Every subcommand reads the same configuration (``--config`` plus
``--set`` overrides), writes into ``--out`` and saves the resolved
configuration there as ``config.json``.

Examples
--------
    dhvae --out blobs make-blobs
    dhvae --out data prepare blobs
    dhvae --out gen --set train.iterations=50 train-gen data/slices.npz
    dhvae --out synth sample gen/checkpoint.pt -n 500
    dhvae --out exp augment-exp blobs
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from dhvae.core.errors import DHVAEError
from dhvae.data.blobs import make_blob_corpus
from dhvae.data.slices import (
    SliceDataset,
    SplitTag,
    load_dataset,
    save_dataset,
)
from dhvae.data.volumes import load_corpus, mask_path_for, save_volume
from dhvae.networks.checkpoint import load_checkpoint
from dhvae.networks.features import build_extractor
from dhvae.pipeline.config import Config, load_config
from dhvae.pipeline.experiment import (
    run_augmentation_experiment,
    split_corpus,
)
from dhvae.pipeline.generator import restore_leapfrog, train_generator
from dhvae.pipeline.prepare import Subject, prepare_dataset
from dhvae.pipeline.quality import (
    evaluate_image_quality,
    evaluate_mask_quality,
)
from dhvae.pipeline.report import emit_report, load_results
from dhvae.pipeline.sampling import generate_pairs
from dhvae.utils.logging import configure_logging

logger = logging.getLogger(__name__)

SLICES_NAME = 'slices.npz'
SYNTHETIC_NAME = 'synthetic.npz'
CONFIG_NAME = 'config.json'
BLOB_SUFFIX = '.nii.gz'


def _corpus(args: argparse.Namespace, cfg: Config) -> list[Subject]:
    if args.corpus is None:
        logger.info("No corpus directory given; using the blob corpus")
        return make_blob_corpus(
            cfg.data.blob_subjects, cfg.data.blob_shape, cfg.train.seed
        )
    return load_corpus(
        args.corpus, cfg.data.modality or None, cfg.data.workers
    )


def cmd_make_blobs(args: argparse.Namespace, cfg: Config) -> None:
    corpus = make_blob_corpus(
        cfg.data.blob_subjects, cfg.data.blob_shape, cfg.train.seed
    )
    for volume, mask in corpus:
        name = f"{volume.subject_id}{BLOB_SUFFIX}"
        path = save_volume(volume, args.out / name)
        save_volume(mask, mask_path_for(path))
    logger.info("Wrote %d blob subjects to '%s'", len(corpus), args.out)


def cmd_prepare(args: argparse.Namespace, cfg: Config) -> None:
    corpus = load_corpus(
        args.volumes, cfg.data.modality or None, cfg.data.workers
    )
    dataset = prepare_dataset(corpus, cfg.data, args.split)
    save_dataset(dataset, args.out / SLICES_NAME)


def cmd_train_gen(args: argparse.Namespace, cfg: Config) -> None:
    dataset = load_dataset(args.dataset)
    path = train_generator(
        dataset, cfg.train, args.out, resume_from=args.resume,
        progress=not args.quiet
    )
    print(path)


def cmd_sample(args: argparse.Namespace, cfg: Config) -> None:
    pairs = generate_pairs(args.checkpoint, args.n, cfg.train.seed,
                           cfg.sampling)
    dataset = SliceDataset.from_pairs(pairs)
    print(save_dataset(dataset, args.out / SYNTHETIC_NAME))


def cmd_eval_images(args: argparse.Namespace, cfg: Config) -> None:
    real = load_dataset(args.real)
    synth = load_dataset(args.synth)
    model = lf = None
    if args.checkpoint is not None:
        ckpt = load_checkpoint(args.checkpoint)
        model = ckpt.restore_model()
        if cfg.quality.refine_with_hmc:
            lf = restore_leapfrog(ckpt)
    report = evaluate_image_quality(
        real.pairs, synth.pairs, model,
        build_extractor(cfg.quality.extractor), cfg.quality,
        cfg.train.seed, cfg.hash, lf, **cfg.train.likelihood,
    )
    print(report.write(args.out / 'image_quality.csv'))


def cmd_eval_masks(args: argparse.Namespace, cfg: Config) -> None:
    report = evaluate_mask_quality(
        load_dataset(args.real).pairs, load_dataset(args.synth).pairs,
        cfg.train.seed, cfg.hash, cfg.quality.divergence_eps,
    )
    print(report.write(args.out / 'mask_quality.csv'))


def cmd_augment_exp(args: argparse.Namespace, cfg: Config) -> None:
    train, test = split_corpus(
        _corpus(args, cfg), cfg.data.test_subjects, cfg.train.seed
    )
    results = run_augmentation_experiment(
        cfg.experiment, train, test, cfg, work_dir=args.out,
        progress=not args.quiet
    )
    emit_report(results, args.out / 'report')


def cmd_report(args: argparse.Namespace, cfg: Config) -> None:
    emit_report(load_results(args.results), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dhvae',
        description="Joint slice/mask synthesis and generative "
                    "augmentation for tumor segmentation",
    )
    parser.add_argument('--config', type=Path, default=None,
                        help="TOML config file with spec_version = 1")
    parser.add_argument('--seed', type=int, default=None,
                        help="Override train.seed")
    parser.add_argument('--out', type=Path, default=Path('.'),
                        help="Output directory")
    parser.add_argument('--set', dest='overrides', action='append',
                        default=[], metavar='KEY=VALUE',
                        help="Dotted config override, repeatable")
    parser.add_argument('-v', '--verbose', action='store_true',
                        help="Log at DEBUG level")
    parser.add_argument('-q', '--quiet', action='store_true',
                        help="Hide progress bars")
    sub = parser.add_subparsers(dest='command', required=True)

    cmd = sub.add_parser('make-blobs', help="Write the blob test corpus")
    cmd.set_defaults(func=cmd_make_blobs)

    cmd = sub.add_parser('prepare', help="Volumes to a slice dataset")
    cmd.add_argument('volumes', type=Path,
                     help="Directory of image/<stem>_mask volume pairs")
    cmd.add_argument('--split', choices=[t.value for t in SplitTag],
                     default=SplitTag.TRAIN.value)
    cmd.set_defaults(func=cmd_prepare)

    cmd = sub.add_parser('train-gen', help="Train the joint generator")
    cmd.add_argument('dataset', type=Path, help="Slice dataset archive")
    cmd.add_argument('--resume', type=Path, default=None,
                     help="Checkpoint to continue from")
    cmd.set_defaults(func=cmd_train_gen)

    cmd = sub.add_parser('sample', help="Generate synthetic pairs")
    cmd.add_argument('checkpoint', type=Path)
    cmd.add_argument('-n', type=int, required=True,
                     help="Number of pairs")
    cmd.set_defaults(func=cmd_sample)

    cmd = sub.add_parser('eval-images', help="PSNR, FID and LPIPS")
    cmd.add_argument('real', type=Path)
    cmd.add_argument('synth', type=Path)
    cmd.add_argument('--checkpoint', type=Path, default=None,
                     help="Generator for the reconstruction PSNR")
    cmd.set_defaults(func=cmd_eval_images)

    cmd = sub.add_parser('eval-masks', help="JSD and KLD of mask sets")
    cmd.add_argument('real', type=Path)
    cmd.add_argument('synth', type=Path)
    cmd.set_defaults(func=cmd_eval_masks)

    cmd = sub.add_parser('augment-exp',
                         help="Run the augmentation experiment")
    cmd.add_argument('corpus', type=Path, nargs='?', default=None,
                     help="Volume directory; the blob corpus if omitted")
    cmd.set_defaults(func=cmd_augment_exp)

    cmd = sub.add_parser('report', help="Re-emit a report from its tables")
    cmd.add_argument('results', type=Path,
                     help="Directory of an emitted report")
    cmd.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    try:
        cfg = load_config(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / CONFIG_NAME).write_text(
            json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
        )
        args.func(args, cfg)
    except DHVAEError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
