"""
Unit tests for the joint autoencoder, discriminator, feature extractors
and checkpoints.
"""

import numpy as np
import pytest
import torch

from dhvae.core.errors import ConfigError, FormatError, ShapeError
from dhvae.networks.autoencoder import (
    LatentGaussian,
    ModelConfig,
    as_batch,
    init_model,
    reparameterize,
)
from dhvae.networks.checkpoint import load_checkpoint, save_checkpoint
from dhvae.networks.discriminator import discriminate, init_discriminator
from dhvae.networks.features import (
    PRETRAINED_KIND,
    RANDOM_KIND,
    build_extractor,
)
from dhvae.networks.layers import WSConv2d, group_count

MICRO = ModelConfig(
    base_filters=4, depth=2, max_filters=8, latent_channels=1,
    slice_shape=(8, 8), seed=0,
)


def test_model_config_validation():
    """Test architecture invariants are enforced."""
    with pytest.raises(ConfigError, match="divisible"):
        ModelConfig(depth=4, slice_shape=(24, 32))
    with pytest.raises(ConfigError):
        ModelConfig(in_channels=1)
    with pytest.raises(ConfigError):
        ModelConfig(attention_at=(5,))
    assert ModelConfig().attention_blocks == (3,)
    assert ModelConfig(depth=2, slice_shape=(8, 8)).attention_blocks == (1,)
    assert MICRO.latent_shape == (1, 2, 2)


def test_model_config_dict_roundtrip():
    """Test the checkpoint form restores an equal config."""
    assert ModelConfig.from_dict(MICRO.to_dict()) == MICRO


def test_group_count():
    """Test group counts divide the channel count."""
    assert group_count(32) == 8
    assert group_count(6) == 6
    assert group_count(12) == 6
    assert group_count(1) == 1


def test_weight_standardization():
    """Test standardized kernels have zero mean and unit variance."""
    conv = WSConv2d(3, 4, 3)
    weight = conv.standardized_weight().detach()
    flat = weight.reshape(4, -1)
    torch.testing.assert_close(flat.mean(dim=1), torch.zeros(4),
                               atol=1e-6, rtol=0)
    torch.testing.assert_close(flat.var(dim=1, unbiased=False),
                               torch.ones(4), atol=1e-4, rtol=0)


def test_encode_decode_shapes():
    """Test posterior and output shapes and ranges."""
    model = init_model(MICRO)
    image = torch.rand(5, 8, 8)
    mask = (torch.rand(5, 8, 8) > 0.5).float()
    posterior = model.encode(image, mask)
    assert posterior.mean.shape == (5, 1, 2, 2)
    image_out, mask_prob = model.decode(posterior.mean)
    assert image_out.shape == (5, 1, 8, 8)
    assert mask_prob.shape == (5, 1, 8, 8)
    assert 0.0 < image_out.min() and image_out.max() < 1.0


def test_encode_rejects_wrong_shape():
    """Test spatial shape checks."""
    model = init_model(MICRO)
    with pytest.raises(ShapeError):
        model.encode(torch.rand(2, 16, 16), torch.rand(2, 16, 16))
    with pytest.raises(ShapeError):
        model.decode(torch.zeros(1, 2, 2, 2))


def test_as_batch_ranks():
    """Test 2D, 3D and 4D inputs become (N, C, H, W)."""
    reference = torch.zeros(1, dtype=torch.float64)
    assert as_batch(np.zeros((4, 4)), reference).shape == (1, 1, 4, 4)
    assert as_batch(np.zeros((2, 4, 4)), reference).shape == (2, 1, 4, 4)
    assert as_batch(np.zeros((2, 1, 4, 4)), reference).dtype == torch.float64
    with pytest.raises(ShapeError):
        as_batch(np.zeros(4), reference)


def test_init_model_is_deterministic_and_isolated():
    """Test seeded init and untouched global RNG state."""
    torch.manual_seed(123)
    before = torch.get_rng_state()
    a = init_model(MICRO)
    assert torch.equal(torch.get_rng_state(), before)
    b = init_model(MICRO)
    for p, q in zip(a.parameters(), b.parameters()):
        assert torch.equal(p, q)


def test_reparameterize_and_kl():
    """Test the reparameterized draw and the closed-form KL."""
    g = LatentGaussian(torch.ones(1, 1), torch.log(torch.full((1, 1), 4.0)))
    torch.testing.assert_close(
        reparameterize(g, torch.full((1, 1), 0.5)), torch.tensor([[2.0]])
    )
    standard = LatentGaussian(torch.zeros(2, 3), torch.zeros(2, 3))
    torch.testing.assert_close(standard.kl_to_standard_normal(),
                               torch.zeros(2))
    with pytest.raises(ShapeError):
        reparameterize(g, torch.zeros(2, 1))


def test_encode_batch_matches_single_calls():
    """Test a batch encodes like its items one at a time."""
    model = init_model(MICRO, dtype=torch.float64)
    generator = torch.Generator().manual_seed(0)
    image = torch.rand(4, 8, 8, generator=generator, dtype=torch.float64)
    mask = (torch.rand(4, 8, 8, generator=generator) > 0.5).double()
    batch = model.encode(image, mask)
    for i in range(4):
        single = model.encode(image[i], mask[i])
        torch.testing.assert_close(single.mean[0], batch.mean[i],
                                   atol=1e-10, rtol=0)
        torch.testing.assert_close(single.log_variance[0],
                                   batch.log_variance[i],
                                   atol=1e-10, rtol=0)


@pytest.mark.parametrize('channel', ['image', 'mask'])
def test_encode_sees_one_pixel_changes(channel):
    """Test a single changed pixel moves the posterior."""
    model = init_model(MICRO, dtype=torch.float64)
    image = torch.full((8, 8), 0.3, dtype=torch.float64)
    mask = torch.zeros(8, 8, dtype=torch.float64)
    before = model.encode(image, mask)
    if channel == 'image':
        image = image.clone()
        image[3, 5] = 0.9
    else:
        mask = mask.clone()
        mask[3, 5] = 1.0
    after = model.encode(image, mask)
    assert not torch.equal(before.mean, after.mean)


def test_decode_gradient_matches_finite_differences():
    """Test the decoder's latent gradient against central differences."""
    model = init_model(MICRO, dtype=torch.float64)
    generator = torch.Generator().manual_seed(4)
    z = torch.randn(1, *MICRO.latent_shape, generator=generator,
                    dtype=torch.float64)

    def total(latent):
        image_out, mask_prob = model.decode(latent)
        return image_out.sum() + mask_prob.sum()

    z.requires_grad_(True)
    (analytic,) = torch.autograd.grad(total(z), [z])
    z = z.detach()

    h = 1e-5
    numeric = torch.empty_like(z)
    with torch.no_grad():
        for index in np.ndindex(*z.shape):
            offset = torch.zeros_like(z)
            offset[index] = h
            numeric[index] = (total(z + offset) - total(z - offset)) / (2 * h)
    error = (analytic - numeric).norm() / numeric.norm()
    assert error.item() <= 1e-4


def test_discriminator_patch_shape():
    """Test one logit per patch."""
    cfg = ModelConfig(base_filters=4, depth=2, max_filters=8,
                      latent_channels=1, slice_shape=(16, 16))
    disc = init_discriminator(cfg, depth=2)
    logits = discriminate(disc, torch.rand(3, 16, 16), torch.rand(3, 16, 16))
    assert logits.shape == (3, 1, 4, 4)
    with pytest.raises(ShapeError):
        discriminate(disc, torch.rand(1, 8, 8), torch.rand(1, 8, 8))


def test_random_extractor_is_frozen_and_seeded():
    """Test the test-mode extractor is deterministic and frozen."""
    a = build_extractor(RANDOM_KIND, seed=1)
    b = build_extractor(RANDOM_KIND, seed=1)
    assert not any(p.requires_grad for p in a.parameters())
    images = torch.rand(2, 8, 8)
    for fa, fb in zip(a(images), b(images)):
        assert torch.equal(fa, fb)
    assert a.embed(images).shape[0] == 2
    a.train()
    assert not a.training


def test_pretrained_falls_back_without_assets(monkeypatch, caplog):
    """Test a missing asset directory yields the test extractor."""
    monkeypatch.delenv('DHVAE_ASSET_DIR', raising=False)
    fx = build_extractor(PRETRAINED_KIND)
    assert fx.kind == RANDOM_KIND
    assert 'not found' in caplog.text


def test_unknown_extractor_kind():
    """Test unknown kinds raise a config error."""
    with pytest.raises(ConfigError, match="Available"):
        build_extractor('no-such-kind')


def test_checkpoint_roundtrip(tmp_path):
    """Test a saved model restores identical parameters."""
    model = init_model(MICRO, dtype=torch.float64)
    path = save_checkpoint(tmp_path / 'ckpt.pt', model, 7, 3,
                           extra_metadata={'note': 'x'})
    ckpt = load_checkpoint(path)
    assert ckpt.iteration == 7
    assert ckpt.metadata['note'] == 'x'
    assert ckpt.model_config == MICRO
    restored = ckpt.restore_model()
    for p, q in zip(model.parameters(), restored.parameters()):
        assert p.dtype == torch.float64
        assert torch.equal(p, q)


def test_checkpoint_errors(tmp_path):
    """Test missing and foreign files."""
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / 'absent.pt')
    foreign = tmp_path / 'foreign.pt'
    torch.save({'weights': torch.zeros(1)}, foreign)
    with pytest.raises(FormatError):
        load_checkpoint(foreign)
