"""
Unit tests for likelihoods, ELBO estimators, regularizers and the
global objective.
"""

import math

import numpy as np
import pytest
import torch

from dhvae.core.errors import (
    ConfigError,
    DomainError,
    NumericError,
    ShapeError,
)
from dhvae.hmc.leapfrog import LeapfrogParams
from dhvae.losses.elbo import hvae_elbo, vae_elbo
from dhvae.losses.likelihood import (
    bernoulli_log_likelihood,
    gaussian_log_likelihood,
    recon_log_likelihood,
)
from dhvae.losses.objective import (
    CSV_COLUMNS,
    LossReport,
    LossWeights,
    append_loss_csv,
    global_loss,
    read_loss_csv,
)
from dhvae.losses.regularizers import (
    adversarial_losses,
    discriminator_loss,
    feature_recon_loss,
    generator_loss,
)
from dhvae.networks.autoencoder import ModelConfig, init_model
from dhvae.networks.discriminator import init_discriminator
from dhvae.networks.features import RANDOM_KIND, build_extractor

F64 = torch.float64
MICRO = ModelConfig(
    base_filters=4, depth=2, max_filters=8, latent_channels=1,
    slice_shape=(8, 8), seed=0,
)


def _batch(n=3, seed=0):
    generator = torch.Generator().manual_seed(seed)
    image = torch.rand(n, 1, 8, 8, generator=generator, dtype=F64)
    mask = (torch.rand(n, 1, 8, 8, generator=generator) > 0.6).to(F64)
    return image, mask


def _lf(K, epsilon=0.05):
    return LeapfrogParams(MICRO.latent_shape, K=K, epsilon_init=epsilon,
                          dtype=F64)


def test_bernoulli_log_likelihood_value():
    """Test the cross-entropy of a pixel against itself."""
    t = torch.full((1, 1, 1, 1), 0.3, dtype=F64)
    assert -bernoulli_log_likelihood(t, t).item() == pytest.approx(
        0.6108643, abs=1e-6
    )
    # clamping keeps confident mistakes finite
    wrong = bernoulli_log_likelihood(torch.ones(1, 1), torch.zeros(1, 1))
    assert math.isfinite(wrong.item())


def test_gaussian_log_likelihood_at_mean():
    """Test the density at the mean with unit width."""
    x = torch.zeros(2, 1, 2, 2, dtype=F64)
    ll = gaussian_log_likelihood(x, x, 1.0)
    assert ll.shape == (2,)
    torch.testing.assert_close(
        ll, torch.full((2,), -2.0 * math.log(2.0 * math.pi), dtype=F64)
    )


def test_recon_log_likelihood_errors():
    """Test domain and shape checks of the reconstruction term."""
    x, m = _batch(1)
    with pytest.raises(DomainError):
        recon_log_likelihood(x + 2.0, m, x, m)
    with pytest.raises(DomainError):
        recon_log_likelihood(x, m, x, m, image_likelihood='poisson')
    with pytest.raises(ShapeError):
        recon_log_likelihood(x, m, x[..., :4], m)
    image_ll, mask_ll = recon_log_likelihood(x, m, x, m, 'gaussian', 0.5)
    assert image_ll.shape == mask_ll.shape == (1,)


def test_hvae_without_steps_equals_vae():
    """Test K = 0 reduces to the plain estimator, value and gradient."""
    model = init_model(MICRO, dtype=F64)
    x, m = _batch()

    hvae = hvae_elbo(model, _lf(0), x, m, seed=11)
    hvae.elbo_h.backward()
    hvae_grads = [p.grad.clone() for p in model.parameters()]
    model.zero_grad()

    vae = vae_elbo(model, x, m, seed=11)
    vae.elbo_h.backward()
    assert hvae.kinetic.item() == 0.0
    assert hvae.elbo_h.item() == pytest.approx(vae.elbo_h.item(), rel=1e-12)
    for g, p in zip(hvae_grads, model.parameters()):
        scale = max(p.grad.norm().item(), 1e-12)
        assert (g - p.grad).norm().item() / scale < 1e-6


def test_entropy_modes_agree_without_steps():
    """Test both entropy readings coincide when z_K = z_0."""
    model = init_model(MICRO, dtype=F64)
    x, m = _batch()
    flow = hvae_elbo(model, _lf(0), x, m, seed=1, entropy_mode='flow')
    literal = hvae_elbo(model, _lf(0), x, m, seed=1, entropy_mode='literal')
    assert flow.elbo_h.item() == literal.elbo_h.item()
    with pytest.raises(ConfigError):
        hvae_elbo(model, _lf(0), x, m, seed=1, entropy_mode='exact')


def test_hvae_elbo_is_seeded():
    """Test one seed gives one estimate and the flow moves the sample."""
    model = init_model(MICRO, dtype=F64)
    x, m = _batch()
    a = hvae_elbo(model, _lf(3), x, m, seed=4)
    b = hvae_elbo(model, _lf(3), x, m, seed=4)
    assert a.elbo_h.item() == b.elbo_h.item()
    assert not torch.equal(a.z0, a.zK)
    assert set(a.components()) == {
        'elbo_h', 'recon_image', 'recon_mask', 'kl_or_entropy', 'kinetic'
    }


def test_analytic_kl_is_non_negative():
    """Test the closed-form KL option of the plain estimator."""
    model = init_model(MICRO, dtype=F64)
    x, m = _batch()
    terms = vae_elbo(model, x, m, seed=0, analytic_kl=True)
    assert terms.kl_or_entropy.item() >= 0.0


def test_feature_recon_loss():
    """Test both terms vanish for identical images."""
    fx = build_extractor(RANDOM_KIND, seed=0).to(F64)
    x, _ = _batch()
    feature, l1 = feature_recon_loss(x, x, fx)
    assert feature.item() == 0.0 and l1.item() == 0.0
    feature, l1 = feature_recon_loss(x.flip(-1), x, fx)
    assert feature.item() > 0.0 and l1.item() > 0.0
    with pytest.raises(ShapeError):
        feature_recon_loss(x[:1], x, fx)


def test_adversarial_losses():
    """Test the logistic losses at zero logits and the detached fake."""
    zero = torch.zeros(2, 1, 2, 2, dtype=F64)
    assert discriminator_loss(zero, zero).item() == pytest.approx(
        2.0 * math.log(2.0)
    )
    assert generator_loss(zero).item() == pytest.approx(math.log(2.0))
    with pytest.raises(NumericError):
        generator_loss(torch.full((1, 1), float('nan')))

    disc = init_discriminator(MICRO, depth=2, dtype=F64)
    x, m = _batch()
    fake = x.clone().requires_grad_(True)
    disc_term, gen_term = adversarial_losses(disc, (x, m), (fake, m))
    disc_term.backward()
    assert fake.grad is None
    gen_term.backward()
    assert fake.grad is not None


def test_loss_weights():
    """Test the derived regularizer weight and the warm-up switch."""
    w = LossWeights.from_beta(0.25, warmup_iters=3)
    assert w.alpha == 0.75 and w.beta == 0.25
    assert not w.adversarial_active(2)
    assert w.adversarial_active(3)
    with pytest.raises(ConfigError):
        LossWeights(alpha=1.5)
    with pytest.raises(ConfigError):
        LossWeights(warmup_iters=-1)


def test_warmup_gates_adversarial_term():
    """Test the generator term joins the objective at the warm-up end."""
    parts = {'elbo_h': 10.0, 'feature': 1.0, 'l1': 0.5, 'disc_gen': 100.0}
    w = LossWeights(alpha=0.9, warmup_iters=5)
    assert global_loss(parts, w, 4) == pytest.approx(0.9 * 10 + 0.1 * 1.5)
    assert global_loss(parts, w, 5) == pytest.approx(
        0.9 * 10 + 0.1 * 101.5
    )


def test_loss_report_recomputes_global():
    """Test reports carry a global value consistent with their parts."""
    w = LossWeights(alpha=0.99, warmup_iters=2)
    parts = {'elbo_h': 3.0, 'feature': 0.2, 'l1': 0.1, 'disc_gen': 0.7,
             'disc_disc': 1.3, 'global': -1.0}
    for iteration in (0, 1, 2, 3):
        report = LossReport.from_components(parts, w, iteration)
        gate = 1.0 if iteration >= 2 else 0.0
        expected = 0.99 * 3.0 + 0.01 * (0.3 + gate * 0.7)
        assert abs(report['global'] - expected) <= 1e-9
    with pytest.raises(NumericError) as info:
        LossReport.from_components({'elbo_h': float('inf')}, w, 0)
    assert info.value.stage == 'elbo_h'


def test_loss_csv_append_and_read(tmp_path):
    """Test appended reports reload exactly, with one header."""
    w = LossWeights(warmup_iters=0)
    rng = np.random.default_rng(0)
    reports = [
        LossReport.from_components(
            {'elbo_h': rng.random(), 'feature': rng.random(),
             'l1': rng.random(), 'disc_gen': rng.random()},
            w, i,
        )
        for i in range(3)
    ]
    path = tmp_path / 'losses.csv'
    append_loss_csv(reports[:2], path)
    append_loss_csv(reports[2:], path)
    assert path.read_text().count('iteration') == 1

    frame = read_loss_csv(path)
    assert list(frame.columns) == CSV_COLUMNS
    assert frame['iteration'].tolist() == [0, 1, 2]
    for report, (_, row) in zip(reports, frame.iterrows()):
        for name, value in report.values.items():
            assert row[name] == value


def _global_objective(model, lf, disc, fx, x, m, weights):
    terms = hvae_elbo(model, lf, x, m, seed=5)
    feature, l1 = feature_recon_loss(terms.image_out, x, fx)
    _, gen_term = adversarial_losses(
        disc, (x, m), (terms.image_out, terms.mask_prob)
    )
    components = {**terms.components(), 'feature': feature, 'l1': l1,
                  'disc_gen': gen_term}
    return global_loss(components, weights, iteration=1)


def test_global_loss_gradient_matches_finite_differences():
    """Test the directional derivative of the full objective."""
    model = init_model(MICRO, dtype=F64)
    lf = _lf(2)
    disc = init_discriminator(MICRO, depth=2, dtype=F64)
    fx = build_extractor(RANDOM_KIND, seed=0).to(F64)
    weights = LossWeights(alpha=0.9, warmup_iters=0)
    x, m = _batch()
    params = [*model.parameters(), lf.log_epsilon]

    loss = _global_objective(model, lf, disc, fx, x, m, weights)
    grads = [
        torch.zeros_like(p) if g is None else g
        for p, g in zip(params, torch.autograd.grad(loss, params,
                                                    allow_unused=True))
    ]

    generator = torch.Generator().manual_seed(1)
    direction = [torch.randn(p.shape, generator=generator, dtype=F64)
                 for p in params]
    norm = math.sqrt(sum(d.pow(2).sum().item() for d in direction))
    direction = [d / norm for d in direction]
    analytic = sum((g * d).sum().item() for g, d in zip(grads, direction))

    h = 1e-6
    values = []
    for sign in (1.0, -1.0):
        with torch.no_grad():
            for p, d in zip(params, direction):
                p.add_(sign * h * d)
        values.append(
            _global_objective(model, lf, disc, fx, x, m, weights).item()
        )
        with torch.no_grad():
            for p, d in zip(params, direction):
                p.sub_(sign * h * d)
    numeric = (values[0] - values[1]) / (2 * h)
    assert abs(analytic - numeric) <= 1e-3 * max(abs(numeric), 1e-8)


def test_log_epsilon_gradient_matches_finite_differences():
    """Test the objective's gradient with respect to the step sizes."""
    model = init_model(MICRO, dtype=F64)
    lf = _lf(2)
    disc = init_discriminator(MICRO, depth=2, dtype=F64)
    fx = build_extractor(RANDOM_KIND, seed=0).to(F64)
    weights = LossWeights(alpha=0.9, warmup_iters=0)
    x, m = _batch()

    loss = _global_objective(model, lf, disc, fx, x, m, weights)
    (grad,) = torch.autograd.grad(loss, [lf.log_epsilon])
    assert grad.abs().sum().item() > 0

    generator = torch.Generator().manual_seed(2)
    direction = torch.randn(lf.log_epsilon.shape, generator=generator,
                            dtype=F64)
    direction /= direction.norm()
    analytic = (grad * direction).sum().item()

    h = 1e-6
    values = []
    for sign in (1.0, -1.0):
        with torch.no_grad():
            lf.log_epsilon.add_(sign * h * direction)
        values.append(
            _global_objective(model, lf, disc, fx, x, m, weights).item()
        )
        with torch.no_grad():
            lf.log_epsilon.sub_(sign * h * direction)
    numeric = (values[0] - values[1]) / (2 * h)
    assert abs(analytic - numeric) <= 1e-3 * max(abs(numeric), 1e-8)
