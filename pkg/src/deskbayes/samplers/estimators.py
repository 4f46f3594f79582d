"""Scikit-learn style front ends for the transition kernels.

Each sampler is an estimator whose constructor carries the tuning
parameters (so ``get_params`` / ``set_params`` / ``clone`` compose with the
wider ecosystem) and whose ``fit(target)`` runs the configured number of
chains, populating ``chains_``, ``samples_``, and ``stats_``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ..diagnostics import summarize_chains
from ..errors import ConfigurationError
from .chain import KernelConfig, run_chain
from .kernels import (
    HMCKernel,
    NUTSKernel,
    QNHMCKernel,
    RandomWalkKernel,
    RMHMCKernel,
    SGHMCKernel,
)
from .mass import MassMatrix


def chain_seeds(seed, n_chains):
    """Independent child seeds derived from (master seed, chain index)."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_chains)]


class BaseSampler(BaseEstimator):
    """Common fit loop: spawn per-chain seeds, run, stack, summarise."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0):
        self.n_samples = n_samples
        self.burn_in = burn_in
        self.n_chains = n_chains
        self.seed = seed
        self.init_scale = init_scale

    def _kernel(self, target):
        raise NotImplementedError

    def _config_kwargs(self):
        return {}

    def _make_config(self, **overrides):
        kwargs = self._config_kwargs()
        kwargs.update(overrides)
        return KernelConfig(**kwargs)

    def fit(self, target, init=None):
        """Draw posterior samples from ``target``; returns self."""
        if self.n_samples < 1 or self.burn_in < 0 or self.n_chains < 1:
            raise ConfigurationError("need n_samples >= 1, burn_in >= 0, chains >= 1")
        if target.dim is None:
            raise ConfigurationError("target does not declare its dimension")
        states = np.random.SeedSequence(self.seed).generate_state(2 * self.n_chains)
        seeds = [int(s) for s in states[:self.n_chains]]
        init_seeds = [int(s) for s in states[self.n_chains:]]
        chains = []
        for index, chain_seed in enumerate(seeds):
            if init is None:
                start_rng = np.random.default_rng(init_seeds[index])
                start = self.init_scale * start_rng.standard_normal(target.dim)
            else:
                start = np.asarray(init, dtype=float)
            kernel = self._kernel(target)
            chains.append(run_chain(kernel, target, start,
                                    n_total=self.burn_in + self.n_samples,
                                    burn_in=self.burn_in, seed=chain_seed))
        self.chains_ = chains
        self.samples_ = np.concatenate([c.samples for c in chains], axis=0)
        self.stats_ = summarize_chains(chains)
        return self

    def sample(self, target, init=None):
        """Fit and return the stacked post-burn-in samples."""
        return self.fit(target, init=init).samples_


class MetropolisHastings(BaseSampler):
    """Gaussian random-walk sampler with acceptance-rate tuned scale."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, proposal_scale=0.5, proposal_sigma=None,
                 target_accept=0.3, adapt=True):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale)
        self.proposal_scale = proposal_scale
        self.proposal_sigma = proposal_sigma
        self.target_accept = target_accept
        self.adapt = adapt

    def _kernel(self, target):
        config = self._make_config(step_size=self.proposal_scale,
                                   target_accept=self.target_accept,
                                   adapt_step_size=self.adapt)
        return RandomWalkKernel(config, proposal_sigma=self.proposal_sigma)


class _GradientSampler(BaseSampler):
    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, step_size=0.1, n_leapfrog=10,
                 target_accept=0.65, adapt=True, mass=None,
                 estimate_mass=False, divergence_threshold=1000.0):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale)
        self.step_size = step_size
        self.n_leapfrog = n_leapfrog
        self.target_accept = target_accept
        self.adapt = adapt
        self.mass = mass
        self.estimate_mass = estimate_mass
        self.divergence_threshold = divergence_threshold

    def _config_kwargs(self):
        return dict(step_size=self.step_size, n_leapfrog=self.n_leapfrog,
                    target_accept=self.target_accept, adapt_step_size=self.adapt,
                    estimate_mass=self.estimate_mass,
                    divergence_threshold=self.divergence_threshold)

    def _mass_matrix(self):
        if self.mass is None:
            return MassMatrix.identity()
        if isinstance(self.mass, MassMatrix):
            return self.mass
        mass = np.asarray(self.mass, dtype=float)
        return MassMatrix.diagonal(mass) if mass.ndim == 1 else MassMatrix.dense(mass)


class HamiltonianMC(_GradientSampler):
    """Fixed-length leapfrog trajectories with Metropolis correction."""

    def _kernel(self, target):
        return HMCKernel(self._make_config(), mass=self._mass_matrix())


class NoUTurnSampler(_GradientSampler):
    """Dynamic trajectory lengths with U-turn termination."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, step_size=0.1, target_accept=0.65, adapt=True,
                 mass=None, estimate_mass=False, max_tree_depth=10,
                 divergence_threshold=1000.0):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale,
                         step_size, 1, target_accept, adapt, mass,
                         estimate_mass, divergence_threshold)
        self.max_tree_depth = max_tree_depth

    def _config_kwargs(self):
        kwargs = super()._config_kwargs()
        kwargs["max_tree_depth"] = self.max_tree_depth
        return kwargs

    def _kernel(self, target):
        return NUTSKernel(self._make_config(), mass=self._mass_matrix())


class QuasiNewtonHMC(_GradientSampler):
    """HMC with a secant-pair inverse-Hessian preconditioner."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, step_size=0.1, n_leapfrog=10,
                 target_accept=0.65, adapt=True, mass=None,
                 estimate_mass=False, hessian_memory=10, hessian_damping=1e-3,
                 divergence_threshold=1000.0):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale,
                         step_size, n_leapfrog, target_accept, adapt, mass,
                         estimate_mass, divergence_threshold)
        self.hessian_memory = hessian_memory
        self.hessian_damping = hessian_damping

    def _config_kwargs(self):
        kwargs = super()._config_kwargs()
        kwargs.update(hessian_memory=self.hessian_memory,
                      hessian_damping=self.hessian_damping)
        return kwargs

    def _kernel(self, target):
        return QNHMCKernel(self._make_config(), mass=self._mass_matrix())


class RiemannianHMC(BaseSampler):
    """Generalized-leapfrog HMC on a position-dependent metric."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, step_size=0.1, n_leapfrog=5,
                 target_accept=0.65, adapt=True, fisher_jitter=1.0,
                 metric=None, fixed_point_iters=10, fixed_point_tol=1e-10,
                 divergence_threshold=1000.0):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale)
        self.step_size = step_size
        self.n_leapfrog = n_leapfrog
        self.target_accept = target_accept
        self.adapt = adapt
        self.fisher_jitter = fisher_jitter
        self.metric = metric
        self.fixed_point_iters = fixed_point_iters
        self.fixed_point_tol = fixed_point_tol
        self.divergence_threshold = divergence_threshold

    def _config_kwargs(self):
        return dict(step_size=self.step_size, n_leapfrog=self.n_leapfrog,
                    target_accept=self.target_accept, adapt_step_size=self.adapt,
                    fisher_jitter=self.fisher_jitter,
                    fixed_point_iters=self.fixed_point_iters,
                    fixed_point_tol=self.fixed_point_tol,
                    divergence_threshold=self.divergence_threshold)

    def _kernel(self, target):
        return RMHMCKernel(self._make_config(), metric=self.metric)


class StochasticGradientHMC(BaseSampler):
    """Minibatch Langevin sampler; every step is accepted."""

    def __init__(self, n_samples=2000, burn_in=1000, n_chains=2, seed=0,
                 init_scale=1.0, step_size=0.01, friction=1.0,
                 gradient_noise_estimate=0.0, minibatch_size=None):
        super().__init__(n_samples, burn_in, n_chains, seed, init_scale)
        self.step_size = step_size
        self.friction = friction
        self.gradient_noise_estimate = gradient_noise_estimate
        self.minibatch_size = minibatch_size

    def _config_kwargs(self):
        return dict(step_size=self.step_size, friction=self.friction,
                    gradient_noise_estimate=self.gradient_noise_estimate,
                    minibatch_size=self.minibatch_size, adapt_step_size=False)

    def fit(self, target, init=None):
        if self.minibatch_size is None:
            raise ConfigurationError("sghmc needs a minibatch size")
        if not target.supports_minibatch():
            raise ConfigurationError("sghmc needs a minibatch-capable target")
        return super().fit(target, init=init)

    def _kernel(self, target):
        return SGHMCKernel(self._make_config())
