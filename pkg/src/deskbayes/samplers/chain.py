"""Chain containers, kernel configuration, step-size adaptation, and the
single-chain driver shared by every transition kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from ..errors import ConfigurationError, UnstableChainError


@dataclass
class KernelConfig:
    """Tuning knobs for all kernels; each kernel reads the fields it needs.

    ``target_accept`` defaults to the 0.65 rate step-size adaptation steers
    toward.  Adaptation runs during burn-in only and freezes afterwards so
    the post-burn-in kernel is a fixed Markov transition.
    """

    step_size: float = 0.1
    n_leapfrog: int = 10
    target_accept: float = 0.65
    adapt_step_size: bool = True
    adapt_window: int = 50
    estimate_mass: bool = False
    max_tree_depth: int = 10
    hessian_memory: int = 10
    hessian_damping: float = 1e-3
    fixed_point_iters: int = 10
    fixed_point_tol: float = 1e-10
    fisher_jitter: float = 1.0
    metric_fd_step: float = 1e-4
    friction: float = 1.0
    gradient_noise_estimate: float = 0.0
    minibatch_size: int | None = None
    divergence_threshold: float = 1000.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.step_size <= 0:
            raise ConfigurationError("step size must be positive")
        if self.n_leapfrog < 1:
            raise ConfigurationError("need at least one leapfrog step")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError("target acceptance must lie in (0, 1)")
        if not 1 <= self.max_tree_depth <= 12:
            raise ConfigurationError("max tree depth must lie in [1, 12]")
        if self.adapt_window < 1:
            raise ConfigurationError("adaptation window must be >= 1")
        if self.hessian_memory < 0:
            raise ConfigurationError("inverse-Hessian memory must be >= 0")
        if self.hessian_damping <= 0:
            raise ConfigurationError("inverse-Hessian damping must be positive")
        if self.fixed_point_iters < 1:
            raise ConfigurationError("need at least one fixed-point iteration")
        if self.fisher_jitter <= 0:
            raise ConfigurationError("metric jitter must be positive")
        if self.divergence_threshold <= 0:
            raise ConfigurationError("divergence threshold must be positive")
        friction = np.asarray(self.friction, dtype=float)
        noise = np.asarray(self.gradient_noise_estimate, dtype=float)
        spread = 2.0 * friction - noise
        if friction.ndim == 0 and noise.ndim == 0:
            if friction < 0 or spread < 0:
                raise ConfigurationError(
                    "friction must be PSD with 2 Q - noise estimate PSD")
        else:
            eigs = np.linalg.eigvalsh(np.atleast_2d(spread))
            if np.min(eigs) < -1e-12:
                raise ConfigurationError("2 Q - noise estimate must be PSD")

    def snapshot(self):
        out = {}
        for key, value in asdict(self).items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


@dataclass
class Chain:
    """Post-burn-in samples with the statistics needed for diagnostics."""

    samples: np.ndarray
    accept_count: int
    n_total: int
    burn_in: int
    seed: int
    kernel: str
    config: dict = field(default_factory=dict)
    energy_errors: np.ndarray = field(default_factory=lambda: np.empty(0))
    divergence_count: int = 0
    mean_accept_prob: float = math.nan

    @property
    def n_kept(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]

    @property
    def acceptance_rate(self):
        kept_steps = self.n_total - self.burn_in
        return self.accept_count / kept_steps if kept_steps else 0.0


def adapt_step_size(acceptance_history, target_accept, step_size, window=50):
    """Robbins-Monro step-size update toward a target acceptance rate.

    The correction is kappa_t (abar - target) on log step size, with
    kappa_t = t^-0.6 for t observations so far and abar the mean acceptance
    probability over the trailing window.
    """
    history = list(acceptance_history)
    if not history:
        raise ConfigurationError("acceptance history is empty")
    t = len(history)
    mean_accept = float(np.mean(history[-window:]))
    return float(step_size * math.exp(t ** -0.6 * (mean_accept - target_accept)))


class StepSizeAdapter:
    """Stateful wrapper around :func:`adapt_step_size` used during burn-in."""

    def __init__(self, step_size, target_accept, window):
        self.step_size = float(step_size)
        self.target_accept = float(target_accept)
        self.window = int(window)
        self.history = []
        self.frozen = False

    def update(self, accept_prob):
        if self.frozen:
            return self.step_size
        self.history.append(float(accept_prob))
        self.step_size = adapt_step_size(self.history, self.target_accept,
                                         self.step_size, self.window)
        return self.step_size

    def freeze(self):
        self.frozen = True


def run_chain(kernel, target, init, n_total, burn_in, seed):
    """Run one chain; deterministic in ``seed``; adaptation confined to burn-in.

    Raises :class:`UnstableChainError` if more than half of the burn-in
    transitions diverge.
    """
    if burn_in < 0 or n_total <= burn_in:
        raise ConfigurationError("need n_total > burn_in >= 0")
    rng = np.random.default_rng(seed)
    state = kernel.init_state(target, np.asarray(init, dtype=float), rng)
    n_keep = n_total - burn_in
    samples = np.empty((n_keep, len(np.asarray(init))))
    energy_errors = np.empty(n_keep)
    accept_count = 0
    divergences = 0
    burn_divergences = 0
    accept_probs = []
    for i in range(n_total):
        adapting = i < burn_in
        state, info = kernel.step(state, target, rng)
        if adapting:
            kernel.adapt(info, state)
            if info.divergent:
                burn_divergences += 1
            if i == burn_in - 1:
                if burn_divergences > 0.5 * burn_in:
                    raise UnstableChainError(
                        f"{burn_divergences}/{burn_in} divergent transitions "
                        "during burn-in; unstable configuration")
                kernel.freeze()
        else:
            k = i - burn_in
            samples[k] = kernel.position(state)
            energy_errors[k] = info.energy_error
            accept_count += info.accepted
            divergences += info.divergent
            accept_probs.append(info.accept_prob)
    return Chain(
        samples=samples,
        accept_count=accept_count,
        n_total=n_total,
        burn_in=burn_in,
        seed=seed,
        kernel=kernel.name,
        config=kernel.snapshot(),
        energy_errors=energy_errors,
        divergence_count=divergences,
        mean_accept_prob=float(np.mean(accept_probs)) if accept_probs else math.nan,
    )


class Kernel:
    """Base for transition kernels driven by :func:`run_chain`.

    Subclasses hold their own adaptation state, so one instance drives one
    chain.
    """

    name = "abstract"

    def __init__(self, config=None):
        # private copy: kernels mutate step_size while adapting
        self.config = replace(config) if config is not None else KernelConfig()
        self._adapter = StepSizeAdapter(self.config.step_size,
                                        self.config.target_accept,
                                        self.config.adapt_window)

    @property
    def step_size(self):
        return self._adapter.step_size

    def init_state(self, target, init, rng):
        raise NotImplementedError

    def step(self, state, target, rng):
        raise NotImplementedError

    def position(self, state):
        return state.position

    def adapt(self, info, state):
        # divergent transitions enter as zero acceptance and push the step down
        if self.config.adapt_step_size:
            self._adapter.update(info.accept_prob)

    def freeze(self):
        self._adapter.freeze()

    def snapshot(self):
        out = self.config.snapshot()
        out["kernel"] = self.name
        out["final_step_size"] = self.step_size
        return out
