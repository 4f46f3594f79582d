"""Stochastic-gradient HMC: minibatch gradients, friction, injected noise.

Momentum persists across steps and is damped by a friction term that
balances the energy pumped in by gradient noise, giving second-order
Langevin dynamics whose stationary distribution approximates the target.
There is no Metropolis correction; every step is taken.  Each step is a
symmetric kick-drift-kick splitting followed by the friction/noise update,
so with full-batch gradients, zero friction, and zero noise it reproduces
leapfrog drift exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .hmc import PhaseState, StepInfo


def _friction_matrix(config, dim):
    q = np.asarray(config.friction, dtype=float)
    return q * np.eye(dim) if q.ndim == 0 else q


def _noise_chol(config, dim):
    q = _friction_matrix(config, dim)
    noise = np.asarray(config.gradient_noise_estimate, dtype=float)
    noise = noise * np.eye(dim) if noise.ndim == 0 else noise
    spread = config.step_size * (2.0 * q - noise)
    eigvals, eigvecs = np.linalg.eigh(spread)
    if np.min(eigvals) < -1e-12:
        raise ConfigurationError("2 Q - noise estimate must be PSD")
    return eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None)))


def sghmc_step(state, minibatch, config, mass, target, rng):
    """One discretised Langevin step on a minibatch gradient estimate."""
    eps = config.step_size
    dim = len(state.position)
    q = _friction_matrix(config, dim)
    noise_chol = _noise_chol(config, dim)

    _, grad0 = target.log_density_and_grad(state.position, minibatch=minibatch)
    momentum = state.momentum + 0.5 * eps * grad0
    position = state.position + eps * mass.inv_mul(momentum)
    log_density, grad1 = target.log_density_and_grad(position, minibatch=minibatch)
    momentum = momentum + 0.5 * eps * grad1
    # friction drains the energy injected by gradient noise
    momentum = momentum - eps * (q @ mass.inv_mul(momentum))
    if np.any(noise_chol):
        momentum = momentum + noise_chol @ rng.standard_normal(dim)
    # caches hold the current minibatch estimate; chains only read positions
    new_state = PhaseState(position, momentum, log_density, grad1)
    return new_state, StepInfo(accepted=True, accept_prob=1.0)
