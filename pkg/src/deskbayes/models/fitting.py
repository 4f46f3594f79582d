"""Point estimation and posterior predictive summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, EvaluationError, OptimizerDivergence


@dataclass
class PointEstimate:
    params: np.ndarray
    objective: float
    mode: str
    n_iterations: int


@dataclass
class PredictiveSamples:
    """Predictive draws per input: (n_inputs, n_draws, d) plus summaries.

    ``mean`` mixes the analytic per-draw expectations (rates or class
    probabilities for count heads), so symmetric mixtures average exactly.
    """

    draws: np.ndarray
    mean: np.ndarray
    spread: np.ndarray


def train_point_estimate(target, mode="map", step_size=0.01, n_iterations=100,
                         init=None, seed=0):
    """Plain fixed-step gradient ascent on the target's objective.

    Mode ``mle`` drops the prior term and therefore needs a target that
    separates it (a :class:`ModelTarget`); ``map`` ascends the full
    unnormalised log posterior.  A non-finite objective raises
    :class:`OptimizerDivergence` carrying the last finite iterate.
    """
    if mode not in ("mle", "map"):
        raise ConfigurationError(f"unknown estimation mode {mode!r}")
    if step_size <= 0:
        raise ConfigurationError("step size must be positive")
    if n_iterations < 0:
        raise ConfigurationError("iteration budget must be >= 0")
    include_prior = mode == "map"
    if not include_prior and not target.supports_minibatch():
        raise ConfigurationError("mle mode needs a model target with a likelihood term")

    if init is None:
        params = 0.1 * np.random.default_rng(seed).standard_normal(target.dim)
    else:
        params = np.array(init, dtype=float)

    def objective_and_grad(w):
        if target.supports_minibatch():
            return target.log_density_and_grad(w, include_prior=include_prior)
        return target.log_density_and_grad(w)

    value, grad = objective_and_grad(params)
    for it in range(n_iterations):
        proposal = params + step_size * grad
        try:
            new_value, new_grad = objective_and_grad(proposal)
        except EvaluationError:
            raise OptimizerDivergence(params) from None
        if not (math.isfinite(new_value) and np.all(np.isfinite(proposal))):
            raise OptimizerDivergence(params)
        params, value, grad = proposal, new_value, new_grad
    return PointEstimate(params=params, objective=float(value), mode=mode,
                         n_iterations=n_iterations)


def posterior_predictive(param_draws, head, network, inputs, n_y_draws=1, rng=None):
    """Monte Carlo mixture of the likelihood over posterior parameter draws.

    For each parameter draw the head is sampled ``n_y_draws`` times per
    input; the summary mean averages the heads' analytic expectations.
    """
    param_draws = [np.asarray(w, dtype=float) for w in param_draws]
    if not param_draws:
        raise ConfigurationError("need at least one parameter draw")
    if n_y_draws < 1:
        raise ConfigurationError("need at least one target draw per parameter draw")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    from .networks import mlp_forward

    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    n_inputs = inputs.shape[0]
    all_draws = []
    mean_acc = None
    for w in param_draws:
        r = mlp_forward(network, w, inputs)
        means = np.stack([np.atleast_1d(head.mean(row)) for row in r])
        mean_acc = means if mean_acc is None else mean_acc + means
        draws = np.stack([
            np.stack([np.atleast_1d(head.sample(rng, row)) for _ in range(n_y_draws)])
            for row in r])
        all_draws.append(draws)
    draws = np.concatenate(all_draws, axis=1)  # (n_inputs, n_param*n_y, d)
    mean = mean_acc / len(param_draws)
    spread = draws.std(axis=1)
    assert draws.shape[0] == n_inputs
    return PredictiveSamples(draws=draws, mean=mean, spread=spread)
