"""Transition-kernel objects binding step functions to chain state.

One kernel instance drives one chain: it owns the step-size adapter, any
curvature/mass adaptation state, and freezes everything when burn-in ends.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from .chain import Kernel
from .hmc import PhaseState, hmc_step
from .mass import MassMatrix
from .metropolis import mh_step, MHResult
from .nuts import nuts_step
from .qnhmc import InverseHessianState, qnhmc_step
from .rmhmc import ConstantMetric, GradientOuterProductMetric, rmhmc_step
from .sghmc import sghmc_step
from .hmc import StepInfo


class RandomWalkKernel(Kernel):
    """Gaussian random walk; ``proposal_sigma`` fixes per-dimension scales,
    otherwise the scalar scale adapts like a step size."""

    name = "mh"

    def __init__(self, config=None, proposal_sigma=None):
        super().__init__(config)
        self.proposal_sigma = (None if proposal_sigma is None
                               else np.asarray(proposal_sigma, dtype=float))

    def init_state(self, target, init, rng):
        return MHResult(init, False, target.log_density(init))

    def step(self, state, target, rng):
        scale = self.proposal_sigma if self.proposal_sigma is not None \
            else self._adapter.step_size
        result = mh_step(state.position, scale, target, rng,
                         current_log_density=state.log_density)
        prob = 1.0 if result.accepted else 0.0
        return result, StepInfo(result.accepted, prob)

    def adapt(self, info, state):
        if self.config.adapt_step_size and self.proposal_sigma is None:
            self._adapter.update(info.accept_prob)


class _HamiltonianKernel(Kernel):
    """Shared machinery: mass matrix handling and optional burn-in mass
    estimation from accumulated position variances."""

    def __init__(self, config=None, mass=None):
        super().__init__(config)
        self.mass = mass or MassMatrix.identity()
        self._burnin_positions = []

    def init_state(self, target, init, rng):
        self.mass.check_dim(len(init))
        return PhaseState.at(target, init)

    def adapt(self, info, state):
        super().adapt(info, state)
        if self.config.estimate_mass:
            self._burnin_positions.append(self.position(state).copy())
            n = len(self._burnin_positions)
            # one variance re-estimate once enough burn-in has accumulated
            if n == max(100, self.config.adapt_window):
                var = np.var(np.stack(self._burnin_positions), axis=0)
                if np.all(var > 0):
                    self.mass = MassMatrix.diagonal(1.0 / var)

    def snapshot(self):
        out = super().snapshot()
        out.update(self.mass.snapshot())
        return out


class HMCKernel(_HamiltonianKernel):
    name = "hmc"

    def step(self, state, target, rng):
        config = self.config
        config.step_size = self._adapter.step_size
        return hmc_step(state, config, self.mass, target, rng)


class NUTSKernel(_HamiltonianKernel):
    name = "nuts"

    def step(self, state, target, rng):
        config = self.config
        config.step_size = self._adapter.step_size
        return nuts_step(state, config, self.mass, target, rng)


class QNHMCKernel(_HamiltonianKernel):
    """Quasi-Newton HMC; curvature refreshes during burn-in, then freezes so
    the post-burn-in transition kernel is fixed."""

    name = "qnhmc"

    def init_state(self, target, init, rng):
        self.curvature = InverseHessianState.identity(
            len(init), self.config.hessian_memory, self.config.hessian_damping)
        self._curvature_frozen = False
        return super().init_state(target, init, rng)

    def step(self, state, target, rng):
        config = self.config
        config.step_size = self._adapter.step_size
        new_state, self.curvature, info = qnhmc_step(
            state, config, self.mass, self.curvature, target, rng,
            update_curvature=not self._curvature_frozen)
        return new_state, info

    def freeze(self):
        super().freeze()
        self._curvature_frozen = True


class RMHMCKernel(Kernel):
    name = "rmhmc"

    def __init__(self, config=None, metric=None):
        super().__init__(config)
        if metric is not None and not isinstance(
                metric, (ConstantMetric, GradientOuterProductMetric)):
            metric = ConstantMetric(metric)
        self.metric = metric

    def init_state(self, target, init, rng):
        if self.metric is None:
            self.metric = GradientOuterProductMetric(
                self.config.fisher_jitter, self.config.metric_fd_step)
        return PhaseState.at(target, init)

    def step(self, state, target, rng):
        config = self.config
        config.step_size = self._adapter.step_size
        return rmhmc_step(state, config, target, rng, metric=self.metric)


class SGHMCKernel(Kernel):
    """Minibatch Langevin kernel; requires a target with minibatch support."""

    name = "sghmc"

    def init_state(self, target, init, rng):
        if not target.supports_minibatch():
            raise ConfigurationError("sghmc needs a minibatch-capable target")
        if self.config.minibatch_size is None:
            raise ConfigurationError("sghmc needs a minibatch size")
        self._n_elems = target.dataset.n_elems
        if self.config.minibatch_size > self._n_elems:
            raise ConfigurationError("minibatch size exceeds the dataset")
        self.mass = MassMatrix.identity()
        state = PhaseState.at(target, init)
        return state.with_momentum(self.mass.sample(rng, len(init)))

    def step(self, state, target, rng):
        batch = rng.choice(self._n_elems, size=self.config.minibatch_size,
                           replace=False)
        return sghmc_step(state, batch, self.config, self.mass, target, rng)

    def adapt(self, info, state):
        pass  # no Metropolis statistics to steer by


KERNELS = {
    "mh": RandomWalkKernel,
    "hmc": HMCKernel,
    "nuts": NUTSKernel,
    "qnhmc": QNHMCKernel,
    "rmhmc": RMHMCKernel,
    "sghmc": SGHMCKernel,
}
