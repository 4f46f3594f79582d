"""Position-dependent-metric HMC with a generalized leapfrog integrator.

The kinetic energy uses a metric G(x) built from the gradient outer
product plus a jitter floor (an observed-information stand-in that needs
nothing beyond the gradients the integrator computes anyway), or any
user-supplied constant SPD matrix.  Because G depends on position the
Hamiltonian is non-separable:

    H = v^T G(x)^-1 v / 2 + log det(2 pi G(x)) / 2 + V(x)

and momenta are drawn from N(0, G(x)).  The implicit half-steps are solved
by fixed-point iteration; non-convergence rejects the proposal.  Metric
derivatives come from central finite differences of G.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import EvaluationError, FixedPointError
from .hmc import PhaseState, StepInfo

_LOG_2PI = math.log(2.0 * math.pi)


class GradientOuterProductMetric:
    """G(x) = grad V(x) grad V(x)^T + jitter * I, differentiated numerically."""

    def __init__(self, jitter=1.0, fd_step=1e-4):
        self.jitter = float(jitter)
        self.fd_step = float(fd_step)

    def value(self, target, position):
        _, grad = target.log_density_and_grad(position)
        g = -grad
        return np.outer(g, g) + self.jitter * np.eye(len(position))

    def derivatives(self, target, position):
        """List of dG/dx_j matrices by central differences."""
        dim = len(position)
        out = []
        h = self.fd_step
        for j in range(dim):
            shift = np.zeros(dim)
            shift[j] = h
            hi = self.value(target, position + shift)
            lo = self.value(target, position - shift)
            out.append((hi - lo) / (2.0 * h))
        return out


class ConstantMetric:
    """Fixed SPD metric; all derivative terms vanish."""

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        np.linalg.cholesky(self.matrix)  # SPD check

    def value(self, target, position):
        return self.matrix

    def derivatives(self, target, position):
        dim = self.matrix.shape[0]
        return [np.zeros((dim, dim))] * dim


def _energy(target, position, momentum, metric):
    value, grad = target.log_density_and_grad(position)
    matrix = metric.value(target, position)
    chol = np.linalg.cholesky(matrix)
    half = np.linalg.solve(chol, momentum)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    kinetic = 0.5 * float(half @ half)
    return kinetic + 0.5 * (len(position) * _LOG_2PI + log_det) - value


def _position_force(target, position, metric):
    """dH/dx at fixed momentum, split into a momentum-free part and the
    quadratic coefficient matrices."""
    _, grad = target.log_density_and_grad(position)
    grad_v = -grad
    matrix = metric.value(target, position)
    inv = np.linalg.inv(matrix)
    derivs = metric.derivatives(target, position)
    with np.errstate(over="raise", invalid="raise"):
        try:
            base = np.array([grad_v[j] + 0.5 * float(np.trace(inv @ derivs[j]))
                             for j in range(len(position))])
            quad = [inv @ derivs[j] @ inv for j in range(len(position))]
        except FloatingPointError as exc:
            raise FixedPointError("metric force overflowed") from exc
    return base, quad, inv


def _force(base, quad, momentum):
    with np.errstate(over="raise", invalid="raise"):
        try:
            return base - 0.5 * np.array(
                [float(momentum @ q @ momentum) for q in quad])
        except FloatingPointError as exc:
            raise FixedPointError("metric force overflowed") from exc


def _generalized_leapfrog(target, metric, position, momentum, step_size,
                          n_steps, max_iters, tol):
    for _ in range(n_steps):
        base, quad, inv_a = _position_force(target, position, metric)
        # implicit momentum half-step at fixed position
        half = momentum.copy()
        for _ in range(max_iters):
            new_half = momentum - 0.5 * step_size * _force(base, quad, half)
            if np.max(np.abs(new_half - half)) < tol:
                half = new_half
                break
            half = new_half
        else:
            raise FixedPointError("implicit momentum step did not converge")
        # implicit position full step using the metric at both ends
        velocity_a = inv_a @ half
        new_position = position + step_size * velocity_a
        for _ in range(max_iters):
            inv_b = np.linalg.inv(metric.value(target, new_position))
            candidate = position + 0.5 * step_size * (velocity_a + inv_b @ half)
            if np.max(np.abs(candidate - new_position)) < tol:
                new_position = candidate
                break
            new_position = candidate
        else:
            raise FixedPointError("implicit position step did not converge")
        # explicit momentum half-step at the new position
        base_b, quad_b, _ = _position_force(target, new_position, metric)
        momentum = half - 0.5 * step_size * _force(base_b, quad_b, half)
        position = new_position
        if not (np.all(np.isfinite(position)) and np.all(np.isfinite(momentum))):
            raise FixedPointError("trajectory left the finite domain")
    return position, momentum


def rmhmc_step(state, config, target, rng, metric=None):
    """One transition with the position-dependent metric.

    With a constant metric the integrator reduces exactly to plain leapfrog
    under mass matrix G, sharing the random stream layout of ``hmc_step``.
    """
    if metric is None:
        metric = GradientOuterProductMetric(config.fisher_jitter,
                                            config.metric_fd_step)
    position = state.position
    matrix = metric.value(target, position)
    chol = np.linalg.cholesky(matrix)
    momentum = chol @ rng.standard_normal(len(position))
    energy = _energy(target, position, momentum, metric)
    try:
        new_position, new_momentum = _generalized_leapfrog(
            target, metric, position.copy(), momentum, config.step_size,
            config.n_leapfrog, config.fixed_point_iters, config.fixed_point_tol)
        new_energy = _energy(target, new_position, new_momentum, metric)
    except (FixedPointError, EvaluationError, np.linalg.LinAlgError):
        rng.uniform()
        return state, StepInfo(False, 0.0, math.inf, divergent=True)
    energy_error = new_energy - energy
    if not math.isfinite(energy_error) or abs(energy_error) > config.divergence_threshold:
        rng.uniform()
        return state, StepInfo(False, 0.0, energy_error, divergent=True)
    accepted = math.log(rng.uniform()) < min(0.0, -energy_error)
    accept_prob = math.exp(min(0.0, -energy_error))
    if accepted:
        return PhaseState.at(target, new_position, new_momentum), \
            StepInfo(True, accept_prob, energy_error)
    return state, StepInfo(False, accept_prob, energy_error)
