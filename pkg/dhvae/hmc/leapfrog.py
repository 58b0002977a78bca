"""
Leapfrog integration of Hamiltonian dynamics in latent space.

Positions ``z`` and momenta ``rho`` are tensors of any shape; the mass
vector and the step sizes broadcast against them. The energies are
summed over the trailing ``mass.ndim`` dimensions, so one sample per
leading index.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import pandas as pd
import torch
from torch import nn

from dhvae.core.errors import ConfigError, NumericError, ShapeError
from dhvae.utils.seeding import torch_generator

logger = logging.getLogger(__name__)

GradFn = Callable[[torch.Tensor], torch.Tensor]
TRAJECTORY_COLUMNS = ['step', 'H', 'kinetic', 'potential', 'accept']


@dataclass(frozen=True)
class PhaseState:
    """Latent position and momentum of equal shape."""

    z: torch.Tensor
    rho: torch.Tensor

    def __post_init__(self) -> None:
        if self.z.shape != self.rho.shape:
            raise ShapeError(
                f"z {tuple(self.z.shape)} and rho {tuple(self.rho.shape)} "
                f"differ"
            )

    def flipped(self) -> PhaseState:
        """The same position with negated momentum."""
        return PhaseState(self.z, -self.rho)


@dataclass(frozen=True)
class LeapfrogConfig:
    """
    Settings of the latent integrator.

    Parameters
    ----------
    K : int, optional
        Leapfrog steps per trajectory. Default is 3.
    epsilon_init : float, optional
        Initial step size of every latent dimension. Default is 0.05.
    mass : float, optional
        Diagonal entry of the (isotropic) mass matrix. Default is 1.
    epsilon_learnable : bool, optional
        Whether the step sizes are trained. Default is True.
    """

    K: int = 3
    epsilon_init: float = 0.05
    mass: float = 1.0
    epsilon_learnable: bool = True

    def __post_init__(self) -> None:
        if self.K < 0:
            raise ConfigError(f"K must be >= 0, got {self.K}")
        if not self.epsilon_init > 0:
            raise ConfigError(
                f"epsilon_init must be > 0, got {self.epsilon_init}"
            )
        if not self.mass > 0:
            raise ConfigError(f"mass must be > 0, got {self.mass}")


class LeapfrogParams(nn.Module):
    """
    Step sizes, mass and step count of the integrator.

    Step sizes are stored as ``log_epsilon`` so they are positive for
    any parameter value.

    Parameters
    ----------
    latent_shape : sequence of int
        Shape of one latent sample, e.g. (C, h, w).
    K : int, optional
        Number of leapfrog steps. Default is 3.
    epsilon_init : float or torch.Tensor, optional
        Initial step sizes. Default is 0.05 everywhere.
    mass : float or torch.Tensor, optional
        Diagonal of the mass matrix. Default is 1 everywhere.
    epsilon_learnable : bool, optional
        Whether ``log_epsilon`` receives gradients. Default is True.
    dtype : torch.dtype, optional
        Dtype of the stored tensors. Default is float32.

    Raises
    ------
    ConfigError
        If K < 0 or any step size or mass entry is not positive.
    """

    log_epsilon: nn.Parameter
    mass: torch.Tensor

    def __init__(
        self,
        latent_shape: Sequence[int],
        K: int = 3,
        epsilon_init: float | torch.Tensor = 0.05,
        mass: float | torch.Tensor = 1.0,
        epsilon_learnable: bool = True,
        dtype: torch.dtype = torch.float32
    ) -> None:
        super().__init__()
        if K < 0:
            raise ConfigError(f"K must be >= 0, got {K}")
        shape = tuple(int(s) for s in latent_shape)
        epsilon = torch.as_tensor(epsilon_init, dtype=dtype).expand(shape)
        mass_vector = torch.as_tensor(mass, dtype=dtype).expand(shape)
        if not bool((epsilon > 0).all()):
            raise ConfigError("Leapfrog step sizes must be positive")
        if not bool((mass_vector > 0).all()):
            raise ConfigError("Mass entries must be positive")
        self.K = int(K)
        self.latent_shape = shape
        self.log_epsilon = nn.Parameter(
            torch.log(epsilon).clone(), requires_grad=epsilon_learnable
        )
        self.register_buffer('mass', mass_vector.clone())

    @classmethod
    def from_config(
        cls,
        cfg: LeapfrogConfig,
        latent_shape: Sequence[int],
        dtype: torch.dtype = torch.float32
    ) -> LeapfrogParams:
        """Build the integrator described by ``cfg``."""
        return cls(
            latent_shape, cfg.K, cfg.epsilon_init, cfg.mass,
            cfg.epsilon_learnable, dtype
        )

    @property
    def epsilon(self) -> torch.Tensor:
        """Per-dimension step sizes."""
        return torch.exp(self.log_epsilon)

    @property
    def epsilon_learnable(self) -> bool:
        return self.log_epsilon.requires_grad


def sample_momentum(
    mass: torch.Tensor | float,
    shape: Sequence[int],
    seed: int | torch.Generator
) -> torch.Tensor:
    """
    Draw ``rho ~ N(0, diag(mass))``.

    Parameters
    ----------
    mass : torch.Tensor or float
        Diagonal of the mass matrix, broadcastable to ``shape``.
    shape : sequence of int
        Shape of the draw.
    seed : int or torch.Generator
        Seed, or a generator to draw from (and advance).

    Raises
    ------
    ConfigError
        If any mass entry is not positive.
    """
    mass = torch.as_tensor(mass)
    if not mass.is_floating_point():
        mass = mass.to(torch.get_default_dtype())
    if not bool((mass > 0).all()):
        raise ConfigError("Mass entries must be positive")
    generator = torch_generator(seed)
    noise = torch.randn(
        tuple(shape), generator=generator, dtype=mass.dtype
    ).to(mass.device)
    return torch.sqrt(mass) * noise


def _event_dims(mass: torch.Tensor) -> tuple[int, ...]:
    return tuple(range(-mass.ndim, 0)) if mass.ndim else ()


def kinetic_energy(rho: torch.Tensor, mass: torch.Tensor) -> torch.Tensor:
    """``0.5 * rho^T M^-1 rho`` per sample."""
    mass = torch.as_tensor(mass, dtype=rho.dtype, device=rho.device)
    terms = 0.5 * rho ** 2 / mass
    dims = _event_dims(mass)
    return terms.sum(dim=dims) if dims else terms


def hamiltonian(
    state: PhaseState,
    mass: torch.Tensor,
    potential: torch.Tensor | float
) -> torch.Tensor:
    """
    Total energy ``H = U + 0.5 * rho^T M^-1 rho``.

    Examples
    --------
    >>> s = PhaseState(torch.zeros(1), torch.tensor([2.0]))
    >>> hamiltonian(s, torch.tensor([4.0]), 0.0)
    tensor(0.5000)
    """
    return potential + kinetic_energy(state.rho, mass)


def _check_finite(tensor: torch.Tensor, stage: str) -> None:
    if not bool(torch.isfinite(tensor).all()):
        bad = int((~torch.isfinite(tensor)).sum())
        raise NumericError(
            "Leapfrog produced non-finite values",
            stage=stage,
            diagnostics={'non_finite': bad},
        )


def _step(
    state: PhaseState,
    epsilon: torch.Tensor,
    mass: torch.Tensor,
    gradfn: GradFn,
    grad_z: torch.Tensor
) -> tuple[PhaseState, torch.Tensor]:
    rho = state.rho - 0.5 * epsilon * grad_z
    _check_finite(rho, 'momentum half-step (start)')
    z = state.z + epsilon * rho / mass
    _check_finite(z, 'position full step')
    grad_next = gradfn(z)
    rho = rho - 0.5 * epsilon * grad_next
    _check_finite(rho, 'momentum half-step (end)')
    return PhaseState(z, rho), grad_next


def leapfrog_step(
    state: PhaseState,
    lf: LeapfrogParams,
    gradfn: GradFn
) -> PhaseState:
    """
    One leapfrog step with elementwise step sizes.

    Momentum half step, position full step scaled by the inverse mass,
    momentum half step.

    Parameters
    ----------
    state : PhaseState
        Current position and momentum.
    lf : LeapfrogParams
        Step sizes and mass.
    gradfn : callable
        ``z -> grad U(z)``.

    Raises
    ------
    NumericError
        If an intermediate is non-finite; ``stage`` names the sub-step.
    """
    _check_finite(state.z, 'input position')
    _check_finite(state.rho, 'input momentum')
    new_state, _ = _step(
        state, lf.epsilon, lf.mass, gradfn, gradfn(state.z)
    )
    return new_state


def evolve(
    state0: PhaseState,
    lf: LeapfrogParams,
    gradfn: GradFn,
    keep_trajectory: bool = False,
    steps: int | None = None
) -> tuple[PhaseState, list[PhaseState] | None]:
    """
    Compose ``lf.K`` leapfrog steps.

    The gradient at the end of a step is reused at the start of the
    next, so K steps cost K + 1 gradient evaluations.

    Parameters
    ----------
    state0 : PhaseState
        Start of the trajectory.
    lf : LeapfrogParams
        Integrator settings.
    gradfn : callable
        ``z -> grad U(z)``.
    keep_trajectory : bool, optional
        Return every intermediate state, ``state0`` first.
        Default is False.
    steps : int, optional
        Overrides ``lf.K``.

    Returns
    -------
    stateK : PhaseState
        Final state; ``state0`` itself when there are no steps.
    trajectory : list of PhaseState or None
        ``K + 1`` states when requested.
    """
    steps = lf.K if steps is None else int(steps)
    if steps < 0:
        raise ConfigError(f"Step count must be >= 0, got {steps}")
    trajectory = [state0] if keep_trajectory else None
    if steps == 0:
        return state0, trajectory

    _check_finite(state0.z, 'input position')
    _check_finite(state0.rho, 'input momentum')
    epsilon, mass = lf.epsilon, lf.mass
    state, grad_z = state0, gradfn(state0.z)
    for _ in range(steps):
        state, grad_z = _step(state, epsilon, mass, gradfn, grad_z)
        if trajectory is not None:
            trajectory.append(state)
    return state, trajectory


def mh_accept(
    H0: torch.Tensor | float,
    HK: torch.Tensor | float,
    u: torch.Tensor | float
) -> bool | torch.Tensor:
    """
    Metropolis-Hastings decision ``u <= min(1, exp(H0 - HK))``.

    ``HK = +inf`` and NaN are always rejected. Tensor inputs are decided
    elementwise and return a boolean tensor.

    Examples
    --------
    >>> mh_accept(1.0, 1.0, 0.999)
    True
    >>> mh_accept(1.0, float('inf'), 0.0)
    False
    """
    H0, HK, u = (torch.as_tensor(v, dtype=torch.float64) for v in (H0, HK, u))
    log_ratio = torch.clamp(H0 - HK, max=0.0)
    valid = ~torch.isnan(HK) & (HK != float('inf'))
    accept = valid & (u <= torch.exp(log_ratio))
    return bool(accept) if accept.ndim == 0 else accept


def trajectory_frame(
    trajectory: Sequence[PhaseState],
    potential: Callable[[torch.Tensor], torch.Tensor],
    mass: torch.Tensor,
    accepted: bool = True
) -> pd.DataFrame:
    """
    Energy diagnostics of a retained trajectory.

    Parameters
    ----------
    trajectory : sequence of PhaseState
        States as returned by :func:`evolve`.
    potential : callable
        ``z -> U(z)`` per sample.
    mass : torch.Tensor
        Mass diagonal.
    accepted : bool, optional
        Outcome of the acceptance test for the trajectory, written on
        every row. Default is True.

    Returns
    -------
    pd.DataFrame
        Columns step, H, kinetic, potential, accept; energies averaged
        over the batch.
    """
    rows = []
    with torch.no_grad():
        for step, state in enumerate(trajectory):
            u = torch.as_tensor(potential(state.z)).double().mean().item()
            k = kinetic_energy(state.rho, mass).double().mean().item()
            rows.append((step, u + k, k, u, int(accepted)))
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def dump_trajectory(frame: pd.DataFrame, path: str | Path) -> Path:
    """Write a trajectory frame as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.12g')
    logger.debug("Wrote %d trajectory rows to '%s'", len(frame), path)
    return path


def max_energy_drift(
    trajectory: Sequence[PhaseState],
    potential: Callable[[torch.Tensor], torch.Tensor],
    mass: torch.Tensor
) -> float:
    """Largest ``|H(state_t) - H(state_0)|`` over a trajectory and batch."""
    with torch.no_grad():
        energies = [
            hamiltonian(s, mass, potential(s.z)).double()
            for s in trajectory
        ]
    return max(
        float(torch.max(torch.abs(h - energies[0]))) for h in energies
    )

