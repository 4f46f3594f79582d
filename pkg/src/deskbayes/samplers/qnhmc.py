"""HMC preconditioned by a quasi-Newton inverse-Hessian approximation.

The equations of motion pick up a curvature matrix B on both updates
(position drift B M^-1 v, momentum kick -B grad V), which rescales every
direction to comparable widths while conserving the ordinary Hamiltonian.
B stays frozen along one trajectory, so the integrator remains reversible
and volume preserving and the usual Metropolis correction applies; between
proposals B is refreshed from secant pairs gathered along the trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, EvaluationError
from .hmc import PhaseState, StepInfo, hamiltonian


def bfgs_inverse_update(matrix, s, y, damping):
    """Damped rank-two secant update of an inverse-Hessian estimate.

    Returns (matrix', applied).  The pair is skipped when its curvature
    s.y is below ``damping`` * |s||y| or the update would lose positive
    definiteness, so the estimate stays SPD.
    """
    sy = float(s @ y)
    norm = float(np.linalg.norm(s) * np.linalg.norm(y))
    if norm == 0.0 or sy <= damping * norm:
        return matrix, False
    rho = 1.0 / sy
    eye = np.eye(len(s))
    left = eye - rho * np.outer(s, y)
    candidate = left @ matrix @ left.T + rho * np.outer(s, s)
    candidate = 0.5 * (candidate + candidate.T)
    try:
        np.linalg.cholesky(candidate)
    except np.linalg.LinAlgError:
        return matrix, False
    return candidate, True


@dataclass
class InverseHessianState:
    """Limited-memory secant pairs and the SPD matrix rebuilt from them."""

    dim: int
    memory: int
    damping: float
    pairs: tuple = ()
    matrix: np.ndarray = None
    skip_count: int = 0

    def __post_init__(self):
        if self.matrix is None:
            self.matrix = np.eye(self.dim)

    @classmethod
    def identity(cls, dim, memory=10, damping=1e-3):
        return cls(dim=dim, memory=memory, damping=damping)

    def updated(self, new_pairs):
        """Fold in new (position delta, gradient delta) pairs and rebuild."""
        if self.memory == 0 or not new_pairs:
            return self
        pairs = (tuple(self.pairs) + tuple(new_pairs))[-self.memory:]
        matrix = np.eye(self.dim)
        skipped = self.skip_count
        for s, y in pairs:
            matrix, applied = bfgs_inverse_update(matrix, s, y, self.damping)
            if not applied:
                skipped += 1
        return InverseHessianState(self.dim, self.memory, self.damping,
                                   pairs, matrix, skipped)


def _preconditioned_leapfrog(state, n_steps, step_size, mass, curvature, target):
    """Leapfrog with both updates premultiplied by the frozen matrix B.

    Also returns the trajectory's secant pairs (delta position, delta of
    grad V) for the post-proposal curvature refresh.
    """
    position = state.position.copy()
    grad_v = state.grad_potential
    momentum = state.momentum - 0.5 * step_size * (curvature @ grad_v)
    pairs = []
    for i in range(n_steps):
        prev_position, prev_grad_v = position, grad_v
        position = position + step_size * (curvature @ mass.inv_mul(momentum))
        try:
            log_density, grad = target.log_density_and_grad(position)
        except EvaluationError as exc:
            raise DivergenceError(i) from exc
        if not (math.isfinite(log_density) and np.all(np.isfinite(grad))):
            raise DivergenceError(i)
        grad_v = -grad
        pairs.append((position - prev_position, grad_v - prev_grad_v))
        if i != n_steps - 1:
            momentum = momentum - step_size * (curvature @ grad_v)
    momentum = momentum - 0.5 * step_size * (curvature @ grad_v)
    return PhaseState(position, momentum, log_density, -grad_v), pairs


def qnhmc_step(state, config, mass, curvature_state, target, rng,
               update_curvature=True):
    """One quasi-Newton HMC transition.

    Returns (state', curvature_state', StepInfo).  With B = identity the
    trajectory and random stream match :func:`deskbayes.samplers.hmc.hmc_step`
    exactly.
    """
    momentum = mass.sample(rng, len(state.position))
    state = state.with_momentum(momentum)
    energy = hamiltonian(state, mass)
    try:
        proposal, pairs = _preconditioned_leapfrog(
            state, config.n_leapfrog, config.step_size, mass,
            curvature_state.matrix, target)
    except DivergenceError:
        rng.uniform()
        return state, curvature_state, StepInfo(False, 0.0, math.inf, divergent=True)
    energy_error = hamiltonian(proposal, mass) - energy
    if abs(energy_error) > config.divergence_threshold:
        rng.uniform()
        return state, curvature_state, StepInfo(False, 0.0, energy_error,
                                                divergent=True)
    accepted = math.log(rng.uniform()) < min(0.0, -energy_error)
    accept_prob = math.exp(min(0.0, -energy_error))
    if update_curvature:
        curvature_state = curvature_state.updated(pairs)
    new_state = proposal if accepted else state
    return new_state, curvature_state, StepInfo(accepted, accept_prob, energy_error)
