"""Hamiltonian Monte Carlo: phase-space state, the leapfrog integrator, and
the momentum-refresh transition kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigurationError, DivergenceError, EvaluationError


@dataclass(frozen=True)
class PhaseState:
    """Position/momentum pair with cached target value and gradient.

    The caches always correspond to ``position``; any position change goes
    through :meth:`at` which refreshes them.
    """

    position: np.ndarray
    momentum: np.ndarray
    log_density: float
    grad_log_density: np.ndarray

    @classmethod
    def at(cls, target, position, momentum=None):
        position = np.asarray(position, dtype=float)
        if momentum is None:
            momentum = np.zeros_like(position)
        value, grad = target.log_density_and_grad(position)
        return cls(position, np.asarray(momentum, dtype=float), value, grad)

    def with_momentum(self, momentum):
        return replace(self, momentum=momentum)

    @property
    def potential(self):
        return -self.log_density

    @property
    def grad_potential(self):
        return -self.grad_log_density


@dataclass(frozen=True)
class StepInfo:
    """Per-transition bookkeeping collected by chain runners."""

    accepted: bool
    accept_prob: float
    energy_error: float = math.nan
    divergent: bool = False
    tree_depth: int = 0


def hamiltonian(state, mass):
    """Total energy: kinetic plus negative log density."""
    return mass.kinetic(state.momentum) + state.potential


def leapfrog(state, n_steps, step_size, mass, target):
    """Symplectic integration of Hamilton's equations.

    Half momentum kick, ``n_steps`` alternating position drifts and full
    kicks, half momentum kick.  Negative step sizes integrate backward in
    time.  Raises :class:`DivergenceError` with the step index if the
    trajectory leaves the finite domain.
    """
    if n_steps < 1:
        raise ConfigurationError("leapfrog needs at least one step")
    position = state.position.copy()
    momentum = state.momentum + 0.5 * step_size * state.grad_log_density
    log_density, grad = state.log_density, state.grad_log_density
    for i in range(n_steps):
        position = position + step_size * mass.inv_mul(momentum)
        try:
            log_density, grad = target.log_density_and_grad(position)
        except EvaluationError as exc:
            raise DivergenceError(i) from exc
        if not (math.isfinite(log_density) and np.all(np.isfinite(grad))):
            raise DivergenceError(i)
        if i != n_steps - 1:
            momentum = momentum + step_size * grad
    momentum = momentum + 0.5 * step_size * grad
    return PhaseState(position, momentum, log_density, grad)


def accept_log_prob(energy_error):
    """log of min(1, exp(-dH)) guarded against overflow."""
    return min(0.0, -energy_error)


def hmc_step(state, config, mass, target, rng):
    """One HMC transition: Gibbs momentum draw, leapfrog, Metropolis test.

    Exact integration conserves the Hamiltonian, so the acceptance
    probability min(1, exp(-(H_new - H_old))) tends to one as the step size
    shrinks.  Divergent trajectories are rejected and flagged.
    """
    momentum = mass.sample(rng, len(state.position))
    state = state.with_momentum(momentum)
    energy = hamiltonian(state, mass)
    try:
        proposal = leapfrog(state, config.n_leapfrog, config.step_size, mass, target)
    except DivergenceError:
        rng.uniform()  # keep the stream aligned with accepted paths
        return state, StepInfo(False, 0.0, math.inf, divergent=True)
    energy_error = hamiltonian(proposal, mass) - energy
    if abs(energy_error) > config.divergence_threshold:
        rng.uniform()
        return state, StepInfo(False, 0.0, energy_error, divergent=True)
    accepted = math.log(rng.uniform()) < accept_log_prob(energy_error)
    accept_prob = math.exp(accept_log_prob(energy_error))
    if accepted:
        return proposal, StepInfo(True, accept_prob, energy_error)
    return state, StepInfo(False, accept_prob, energy_error)
