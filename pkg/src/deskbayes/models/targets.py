"""Unnormalised log-posterior targets shared by every sampler and VI method."""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError
from .networks import mlp_forward_exprs

_LOG_2PI = math.log(2.0 * math.pi)


class TargetDensity:
    """A distribution known up to its normalising constant.

    Samplers only ever call :meth:`log_density` and
    :meth:`log_density_and_grad`; variational methods additionally compose
    through :meth:`log_density_exprs` to differentiate through their own
    reparameterisations.
    """

    dim = None

    def log_density(self, params):
        raise NotImplementedError

    def log_density_and_grad(self, params):
        raise NotImplementedError

    def log_density_exprs(self, param_exprs):
        raise NotImplementedError

    def supports_minibatch(self):
        return False


class GaussianTarget(TargetDensity):
    """Multivariate normal with full normalisation."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            cov = np.diag(cov)
        self.cov = cov
        self.dim = len(self.mean)
        if cov.shape != (self.dim, self.dim):
            raise ConfigurationError("covariance shape does not match mean")
        self._chol = np.linalg.cholesky(cov)
        self._prec = np.linalg.inv(cov)
        self._log_norm = 0.5 * self.dim * _LOG_2PI + np.sum(np.log(np.diag(self._chol)))

    def log_density(self, params):
        d = np.asarray(params, dtype=float) - self.mean
        return float(-0.5 * d @ self._prec @ d - self._log_norm)

    def log_density_and_grad(self, params):
        d = np.asarray(params, dtype=float) - self.mean
        g = -self._prec @ d
        return float(-0.5 * d @ self._prec @ d - self._log_norm), g

    def log_density_exprs(self, param_exprs):
        d = [p - float(m) for p, m in zip(param_exprs, self.mean)]
        rows = [ad.dot(d, [float(v) for v in self._prec[i]]) for i in range(self.dim)]
        return -0.5 * ad.dot(d, rows) - self._log_norm

    def sample(self, rng, n):
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T


class BananaTarget(TargetDensity):
    """2-D curved-ridge density; b = 0 collapses it to a product Gaussian."""

    dim = 2

    def __init__(self, a=1.0, b=1.0):
        if a <= 0:
            raise ConfigurationError("banana scale a must be positive")
        self.a = float(a)
        self.b = float(b)

    def _parts(self, x, y):
        ridge = y - self.b * (ad.square(x) - self.a ** 2)
        return -0.5 * ad.square(x) / self.a ** 2 - 0.5 * ad.square(ridge)

    def log_density(self, params):
        x, y = np.asarray(params, dtype=float)
        return float(self._parts(x, y))

    def log_density_and_grad(self, params):
        x, y = np.asarray(params, dtype=float)
        ridge = y - self.b * (x * x - self.a ** 2)
        gx = -x / self.a ** 2 + ridge * 2.0 * self.b * x
        gy = -ridge
        return float(self._parts(x, y)), np.array([gx, gy])

    def log_density_exprs(self, param_exprs):
        return self._parts(param_exprs[0], param_exprs[1])


class FunnelTarget(TargetDensity):
    """A scale parameter controlling the width of the remaining coordinates.

    First coordinate v ~ N(0, scale_sigma^2); the others are N(0, exp(v)).
    """

    def __init__(self, dim=2, scale_sigma=3.0):
        if dim < 2:
            raise ConfigurationError("funnel needs the scale plus one coordinate")
        self.dim = int(dim)
        self.scale_sigma = float(scale_sigma)

    def _terms(self, v, rest):
        k = len(rest)
        quad = ad.add_n([ad.square(x) for x in rest]) if k else 0.0
        return (-0.5 * ad.square(v) / self.scale_sigma ** 2
                - 0.5 * quad * ad.exp(-v) - 0.5 * k * v)

    def log_density(self, params):
        params = np.asarray(params, dtype=float)
        return float(self._terms(params[0], list(params[1:])))

    def log_density_and_grad(self, params):
        params = np.asarray(params, dtype=float)
        v, rest = params[0], params[1:]
        k = len(rest)
        inv_width = math.exp(-v)
        gv = (-v / self.scale_sigma ** 2
              + 0.5 * float(np.sum(rest ** 2)) * inv_width - 0.5 * k)
        grest = -rest * inv_width
        return self.log_density(params), np.concatenate([[gv], grest])

    def log_density_exprs(self, param_exprs):
        return self._terms(param_exprs[0], list(param_exprs[1:]))


class ModelTarget(TargetDensity):
    """log likelihood + log prior for a network, head, prior, and dataset.

    The full-data computation graph is built once and re-evaluated with
    fresh parameter bindings.  Minibatch graphs are cached per batch size
    with data-slot bindings where the head structure allows, so stochastic
    methods do not pay graph construction per step.
    """

    def __init__(self, network, prior, dataset):
        if network.head is None:
            raise ConfigurationError("network spec carries no likelihood head")
        self.network = network
        self.head = network.head
        self.prior = prior
        self.dataset = dataset
        self.dim = network.n_params
        if dataset.inputs.shape[1] != network.layer_widths[0]:
            raise ConfigurationError(
                f"dataset has {dataset.inputs.shape[1]} input columns, network "
                f"expects {network.layer_widths[0]}")
        self.head.validate_targets(dataset.targets)
        self._full_tapes = {}
        self._batch_tapes = {}

    def supports_minibatch(self):
        return True

    # -- graph construction ------------------------------------------------

    def _likelihood_exprs(self, w_exprs, x_rows, y_rows, scale=1.0,
                          dropout_masks=None):
        outputs = mlp_forward_exprs(self.network, w_exprs, x_rows, dropout_masks)
        terms = [self.head.row_log_likelihood(r_row, y_row)
                 for r_row, y_row in zip(outputs, y_rows)]
        total = ad.add_n(terms)
        return total if scale == 1.0 else total * float(scale)

    def log_density_exprs(self, w_exprs, minibatch=None, include_prior=True,
                          dropout_masks=None):
        """Unnormalised log posterior over given parameter nodes, data baked in."""
        if minibatch is None:
            x = self.dataset.inputs
            y = self.dataset.targets
            scale = 1.0
        else:
            x = self.dataset.inputs[minibatch]
            y = self.dataset.targets[minibatch]
            scale = self.dataset.n_elems / len(minibatch)
        value = self._likelihood_exprs(w_exprs, [list(r) for r in x],
                                       [list(r) for r in y], scale, dropout_masks)
        if include_prior:
            value = value + self.prior.log_density_exprs(w_exprs)
        return value

    def _tape(self, batch_size, include_prior):
        """Cached tape keyed by batch size (None = full data)."""
        key = (batch_size, include_prior)
        cache = self._full_tapes if batch_size is None else self._batch_tapes
        if key in cache:
            return cache[key]
        d_in, d_out = self.dataset.d_in, self.dataset.d_out
        if batch_size is None:
            tape = ad.Tape(self.dim)
            w = tape.params()
            out = self.log_density_exprs(w, include_prior=include_prior)
        else:
            n = batch_size
            tape = ad.Tape(self.dim, n_data=n * (d_in + d_out))
            w = tape.params()
            x_rows = [[tape.data(e * d_in + j) for j in range(d_in)] for e in range(n)]
            y_rows = [[tape.data(n * d_in + e * d_out + j) for j in range(d_out)]
                      for e in range(n)]
            scale = self.dataset.n_elems / n
            out = self._likelihood_exprs(w, x_rows, y_rows, scale)
            if include_prior:
                out = out + self.prior.log_density_exprs(w)
        tape.mark_output(out)
        cache[key] = tape
        return tape

    def _batch_data(self, minibatch):
        x = self.dataset.inputs[minibatch].ravel()
        y = self.dataset.targets[minibatch].ravel()
        return np.concatenate([x, y])

    def _fresh_batch_tape(self, minibatch, include_prior):
        # heads whose graph structure depends on target values (padded
        # catalogues) rebuild per batch instead of rebinding data slots
        tape = ad.Tape(self.dim)
        w = tape.params()
        tape.mark_output(self.log_density_exprs(w, minibatch=minibatch,
                                                include_prior=include_prior))
        return tape

    # -- evaluation ----------------------------------------------------------

    def _prior_veto(self, params):
        check = getattr(self.prior, "in_support", None)
        return check is not None and not check(params)

    def log_density(self, params, minibatch=None, include_prior=True):
        if include_prior and self._prior_veto(params):
            return -math.inf
        if minibatch is not None and not self.head.fixed_structure:
            tape = self._fresh_batch_tape(minibatch, include_prior)
            return tape.forward(np.asarray(params, dtype=float))
        if minibatch is None:
            tape = self._tape(None, include_prior)
            return tape.forward(np.asarray(params, dtype=float))
        tape = self._tape(len(minibatch), include_prior)
        return tape.forward(np.asarray(params, dtype=float),
                            data=self._batch_data(minibatch))

    def log_density_and_grad(self, params, minibatch=None, include_prior=True):
        if include_prior and self._prior_veto(params):
            return -math.inf, np.zeros(self.dim)
        params = np.asarray(params, dtype=float)
        if minibatch is not None and not self.head.fixed_structure:
            tape = self._fresh_batch_tape(minibatch, include_prior)
            return tape.forward_backward(params)
        if minibatch is None:
            return self._tape(None, include_prior).forward_backward(params)
        tape = self._tape(len(minibatch), include_prior)
        return tape.forward_backward(params, data=self._batch_data(minibatch))


def unnorm_log_posterior(target, params):
    """Value and gradient of the unnormalised log posterior (spec entry point)."""
    return target.log_density_and_grad(params)
