"""
Potential energy of the latent posterior.

``U(z) = -[log p(x, m | z) + log N(z; 0, I)]`` for fixed conditioning
``(x, m)``, evaluated per sample.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from typing import Any

import torch

from dhvae.core.errors import NumericError

LogLikelihood = Callable[[torch.Tensor], torch.Tensor]


def standard_normal_log_density(
    z: torch.Tensor,
    event_dims: int
) -> torch.Tensor:
    """``log N(z; 0, I)`` summed over the trailing ``event_dims`` dims."""
    dims = tuple(range(-event_dims, 0))
    size = math.prod(z.shape[-event_dims:]) if event_dims else 1
    quadratic = (z ** 2).sum(dim=dims) if dims else z ** 2
    return -0.5 * quadratic - 0.5 * size * math.log(2.0 * math.pi)


class PotentialFn:
    """
    Potential energy ``U`` and its gradient for one conditioning pair.

    Parameters
    ----------
    log_likelihood : callable
        ``z -> log p(x, m | z)`` per sample.
    event_dims : int
        Number of trailing dimensions of ``z`` forming one sample.

    Examples
    --------
    >>> u = PotentialFn(lambda z: z.new_zeros(()), event_dims=1)
    >>> round(u(torch.zeros(2, dtype=torch.float64)).item(), 6)
    1.837877
    """

    def __init__(self, log_likelihood: LogLikelihood, event_dims: int) -> None:
        self.log_likelihood = log_likelihood
        self.event_dims = event_dims

    @classmethod
    def from_decoder(
        cls,
        model: Any,
        x: torch.Tensor,
        m: torch.Tensor,
        image_likelihood: str = 'bernoulli',
        gaussian_sigma: float = 0.1
    ) -> PotentialFn:
        """
        Potential whose likelihood decodes ``z`` with ``model``.

        Evaluating it raises :class:`NumericError` with diagnostics when
        the decoder output is non-finite.
        """
        from dhvae.losses.likelihood import recon_log_likelihood

        def log_likelihood(z: torch.Tensor) -> torch.Tensor:
            image_out, mask_prob = model.decode(z)
            for name, out in (('image', image_out), ('mask', mask_prob)):
                if not bool(torch.isfinite(out).all()):
                    raise NumericError(
                        "Decoder produced non-finite output",
                        stage='potential',
                        diagnostics={
                            'output': name,
                            'non_finite': int((~torch.isfinite(out)).sum()),
                            'z_abs_max': float(z.detach().abs().max()),
                        },
                    )
            image_ll, mask_ll = recon_log_likelihood(
                x, m, image_out, mask_prob, image_likelihood, gaussian_sigma
            )
            return image_ll + mask_ll

        return cls(log_likelihood, event_dims=len(model.cfg.latent_shape))

    def __call__(self, z: torch.Tensor) -> torch.Tensor:
        return -(
            self.log_likelihood(z)
            + standard_normal_log_density(z, self.event_dims)
        )

    def grad(
        self, z: torch.Tensor, create_graph: bool = False
    ) -> torch.Tensor:
        """
        ``dU/dz``, one gradient per sample.

        Parameters
        ----------
        z : torch.Tensor
            Positions.
        create_graph : bool, optional
            Keep the gradient differentiable (training through the
            integrator). Default is False.
        """
        with torch.enable_grad():
            if create_graph and z.requires_grad:
                point = z
            else:
                point = z.detach().requires_grad_(True)
            (gradient,) = torch.autograd.grad(
                self(point).sum(), point, create_graph=create_graph
            )
        return gradient


def potential_energy(
    z: torch.Tensor,
    x: torch.Tensor,
    m: torch.Tensor,
    model: Any,
    **likelihood: Any
) -> torch.Tensor:
    """Per-sample ``U(z | x, m)`` under ``model``'s decoder."""
    return PotentialFn.from_decoder(model, x, m, **likelihood)(z)


def grad_potential(
    z: torch.Tensor,
    x: torch.Tensor,
    m: torch.Tensor,
    model: Any,
    **likelihood: Any
) -> torch.Tensor:
    """Gradient of :func:`potential_energy` with respect to ``z``."""
    return PotentialFn.from_decoder(model, x, m, **likelihood).grad(z)
