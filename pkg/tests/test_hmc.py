"""
Unit tests for the leapfrog integrator, the latent potential and the
posterior sampler.
"""

import numpy as np
import pytest
import torch

from dhvae.core.errors import ConfigError, NumericError, ShapeError
from dhvae.hmc.leapfrog import (
    LeapfrogConfig,
    LeapfrogParams,
    PhaseState,
    dump_trajectory,
    evolve,
    hamiltonian,
    kinetic_energy,
    leapfrog_step,
    max_energy_drift,
    mh_accept,
    sample_momentum,
    trajectory_frame,
)
from dhvae.hmc.potential import (
    PotentialFn,
    grad_potential,
    potential_energy,
)
from dhvae.hmc.sampler import sample_posterior
from dhvae.networks.autoencoder import ModelConfig, init_model

F64 = torch.float64
MICRO = ModelConfig(
    base_filters=4, depth=2, max_filters=8, latent_channels=1,
    slice_shape=(8, 8), seed=0,
)


def _gaussian_potential(z):
    return 0.5 * (z ** 2).sum(dim=-1)


def _gaussian_grad(z):
    return z


def _lf(dim, epsilon, K=1):
    return LeapfrogParams((dim,), K=K, epsilon_init=epsilon, dtype=F64)


def test_leapfrog_hand_example():
    """Test one step on U = z^2 / 2 from (1, 0) with step 0.1."""
    state = PhaseState(torch.tensor([1.0], dtype=F64),
                       torch.tensor([0.0], dtype=F64))
    new = leapfrog_step(state, _lf(1, 0.1), _gaussian_grad)
    assert abs(new.z.item() - 0.995) < 1e-12
    assert abs(new.rho.item() + 0.09975) < 1e-12


def test_evolve_matches_repeated_steps():
    """Test gradient reuse gives the same result as single steps."""
    lf = _lf(3, 0.2, K=5)
    state = PhaseState(torch.tensor([0.3, -1.0, 2.0], dtype=F64),
                       torch.tensor([1.0, 0.5, -0.2], dtype=F64))
    final, trajectory = evolve(state, lf, _gaussian_grad,
                               keep_trajectory=True)
    stepped = state
    for _ in range(5):
        stepped = leapfrog_step(stepped, lf, _gaussian_grad)
    torch.testing.assert_close(final.z, stepped.z, atol=1e-14, rtol=0)
    assert len(trajectory) == 6
    assert trajectory[0] is state


def test_evolve_with_no_steps_is_identity():
    """Test K = 0 returns the start state."""
    state = PhaseState(torch.zeros(2, dtype=F64), torch.ones(2, dtype=F64))
    final, _ = evolve(state, _lf(2, 0.1, K=0), _gaussian_grad)
    assert final is state


def test_time_reversibility():
    """Test flipping momentum retraces the trajectory."""
    for seed in range(100):
        rng = np.random.default_rng(seed)
        K = int(rng.integers(1, 11))
        epsilon = torch.as_tensor(rng.uniform(0.05, 0.3, size=4))
        lf = LeapfrogParams((4,), K=K, epsilon_init=epsilon, dtype=F64)
        state = PhaseState(torch.as_tensor(rng.standard_normal(4)),
                           torch.as_tensor(rng.standard_normal(4)))
        forward, _ = evolve(state, lf, _gaussian_grad)
        back, _ = evolve(forward.flipped(), lf, _gaussian_grad)
        torch.testing.assert_close(back.z, state.z, atol=1e-8, rtol=0)
        torch.testing.assert_close(-back.rho, state.rho, atol=1e-8, rtol=0)


def test_symplectic_volume():
    """Test the one-step Jacobian determinant is 1."""
    lf = LeapfrogParams((3,), K=1, epsilon_init=0.3, mass=2.0, dtype=F64)
    rng = np.random.default_rng(0)
    point = rng.standard_normal(6)

    def step(vector):
        v = torch.as_tensor(vector)
        new = leapfrog_step(PhaseState(v[:3], v[3:]), lf, _gaussian_grad)
        return torch.cat([new.z, new.rho]).numpy()

    h = 1e-6
    jacobian = np.empty((6, 6))
    for j in range(6):
        offset = np.zeros(6)
        offset[j] = h
        jacobian[:, j] = (
            step(point + offset) - step(point - offset)
        ) / (2 * h)
    assert abs(np.linalg.det(jacobian) - 1.0) <= 1e-4


def test_energy_drift_is_second_order():
    """Test halving the step size cuts the energy drift about fourfold.

    The drift is measured over a fixed time horizon, so the halved step
    takes twice as many steps.
    """
    for seed in range(20):
        generator = torch.Generator().manual_seed(seed)
        state = PhaseState(torch.randn(3, generator=generator, dtype=F64),
                           torch.randn(3, generator=generator, dtype=F64))
        drifts = []
        for epsilon, steps in ((0.1, 20), (0.05, 40)):
            lf = _lf(3, epsilon, K=steps)
            _, trajectory = evolve(state, lf, _gaussian_grad,
                                   keep_trajectory=True)
            drifts.append(max_energy_drift(
                trajectory, _gaussian_potential, lf.mass
            ))
        assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_non_finite_gradient_names_stage():
    """Test non-finite intermediates raise with the failing sub-step."""
    state = PhaseState(torch.ones(2, dtype=F64), torch.zeros(2, dtype=F64))
    with pytest.raises(NumericError) as info:
        leapfrog_step(state, _lf(2, 0.1),
                      lambda z: torch.full_like(z, float('nan')))
    assert info.value.stage == 'momentum half-step (start)'


def test_leapfrog_params_validation():
    """Test positive step sizes and masses."""
    with pytest.raises(ConfigError):
        LeapfrogParams((2,), K=-1)
    with pytest.raises(ConfigError):
        LeapfrogParams((2,), mass=0.0)
    with pytest.raises(ConfigError):
        LeapfrogConfig(epsilon_init=0.0)
    lf = LeapfrogParams.from_config(LeapfrogConfig(epsilon_learnable=False),
                                    (1, 2, 2))
    assert not lf.epsilon_learnable
    assert lf.epsilon.shape == (1, 2, 2)


def test_phase_state_shapes():
    """Test position and momentum must agree in shape."""
    with pytest.raises(ShapeError):
        PhaseState(torch.zeros(2), torch.zeros(3))


def test_momentum_and_energies():
    """Test momentum scaling by the mass and the kinetic energy."""
    mass = torch.full((2,), 4.0, dtype=F64)
    rho = sample_momentum(mass, (20000, 2), seed=0)
    assert abs(rho.std().item() - 2.0) < 0.05
    with pytest.raises(ConfigError):
        sample_momentum(torch.zeros(2), (1, 2), seed=0)

    state = PhaseState(torch.zeros(1), torch.tensor([2.0]))
    assert hamiltonian(state, torch.tensor([4.0]), 0.0).item() == 0.5
    assert kinetic_energy(torch.ones(3, 2), torch.ones(2)).shape == (3,)


def test_mh_accept():
    """Test the acceptance rule on scalars and tensors."""
    assert mh_accept(1.0, 1.0, 0.999) is True
    assert mh_accept(1.0, 0.5, 0.999) is True
    assert mh_accept(1.0, 2.0, 0.5) is False  # exp(-1) < 0.5
    assert mh_accept(1.0, float('inf'), 0.0) is False
    decided = mh_accept(torch.zeros(2), torch.tensor([0.0, 5.0]),
                        torch.tensor([0.5, 0.5]))
    assert decided.tolist() == [True, False]


def test_momentum_moments_with_identity_mass():
    """Test per-dimension mean and variance of unit-mass momenta."""
    rho = sample_momentum(torch.ones(4, dtype=F64), (100_000, 4), seed=3)
    assert rho.mean(dim=0).abs().max().item() <= 0.02
    assert (rho.var(dim=0) - 1.0).abs().max().item() <= 0.05
    again = sample_momentum(torch.ones(4, dtype=F64), (100_000, 4), seed=3)
    assert torch.equal(rho, again)


def test_mh_accept_rate_at_half_ratio():
    """Test an acceptance ratio of one half accepts half the draws."""
    u = torch.rand(100_000, generator=torch.Generator().manual_seed(0),
                   dtype=F64)
    H0 = torch.zeros_like(u)
    HK = torch.full_like(u, -np.log(0.5))
    rate = mh_accept(H0, HK, u).double().mean().item()
    assert abs(rate - 0.5) <= 0.01


def test_mh_accept_non_finite_proposals():
    """Test +inf and NaN are rejected while -inf is accepted."""
    assert mh_accept(1.0, float('-inf'), 1.0) is True
    assert mh_accept(1.0, float('nan'), 0.0) is False
    decided = mh_accept(torch.zeros(3),
                        torch.tensor([float('inf'), float('-inf'), 0.0]),
                        torch.zeros(3))
    assert decided.tolist() == [False, True, True]


def test_trajectory_frame(tmp_path):
    """Test the diagnostics frame and its CSV dump."""
    lf = _lf(2, 0.1, K=4)
    state = PhaseState(torch.ones(3, 2, dtype=F64),
                       torch.zeros(3, 2, dtype=F64))
    _, trajectory = evolve(state, lf, _gaussian_grad, keep_trajectory=True)
    frame = trajectory_frame(trajectory, _gaussian_potential, lf.mass)
    assert list(frame.columns) == ['step', 'H', 'kinetic', 'potential',
                                   'accept']
    assert len(frame) == 5
    assert frame['H'].iloc[0] == pytest.approx(1.0)
    path = dump_trajectory(frame, tmp_path / 'traj.csv')
    assert path.read_text().startswith('step,H,kinetic,potential,accept')


def test_potential_of_zero_likelihood():
    """Test U reduces to the negative standard normal log density."""
    u = PotentialFn(lambda z: z.new_zeros(z.shape[:-1]), event_dims=1)
    value = u(torch.zeros(2, dtype=F64)).item()
    assert value == pytest.approx(np.log(2 * np.pi), abs=1e-12)


def test_grad_potential_matches_finite_differences():
    """Test the decoder potential gradient against central differences."""
    model = init_model(MICRO, dtype=F64)
    generator = torch.Generator().manual_seed(0)
    x = torch.rand(2, 1, 8, 8, generator=generator, dtype=F64)
    m = (torch.rand(2, 1, 8, 8, generator=generator, dtype=F64) > 0.5)
    m = m.to(F64)
    z = torch.randn(2, 1, 2, 2, generator=generator, dtype=F64)

    analytic = grad_potential(z, x, m, model)
    numeric = torch.zeros_like(z)
    h = 1e-6
    for index in np.ndindex(*z.shape):
        offset = torch.zeros_like(z)
        offset[index] = h
        plus = potential_energy(z + offset, x, m, model).sum()
        minus = potential_energy(z - offset, x, m, model).sum()
        numeric[index] = (plus - minus) / (2 * h)
    error = (analytic - numeric).norm() / numeric.norm()
    assert error.item() < 1e-4


def test_sample_posterior_is_reproducible():
    """Test the posterior chain per seed and its diagnostics."""
    model = init_model(MICRO, dtype=F64)
    lf = LeapfrogParams((1, 2, 2), K=3, epsilon_init=0.05, dtype=F64)
    image = torch.rand(3, 8, 8, dtype=F64)
    mask = (image > 0.5).to(F64)
    a = sample_posterior(model, lf, image, mask, n_iterations=4, seed=2,
                         keep_trajectory=True)
    b = sample_posterior(model, lf, image, mask, n_iterations=4, seed=2)
    assert torch.equal(a.z, b.z)
    assert a.acceptance_rate == b.acceptance_rate
    assert 0.0 <= a.acceptance_rate <= 1.0
    assert len(a.frame) == 4
    assert b.frame is None
