"""Likelihood heads mapping network outputs to target log densities.

Each head interprets the final-layer columns of a network as the parameters
of a distribution over one target row.  ``row_log_likelihood`` is written
against the generic autodiff math functions, so the same code evaluates on
plain floats and builds differentiable graphs when handed Expr nodes.
"""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


class LikelihoodHead:
    """Interface shared by all heads."""

    kind = "abstract"
    #: whether the graph structure is independent of target values, allowing
    #: data-slot rebinding of cached minibatch graphs
    fixed_structure = True

    @property
    def n_columns(self):
        raise NotImplementedError

    def row_log_likelihood(self, r_row, y_row):
        raise NotImplementedError

    def mean(self, r_row):
        """Expected target (or rate / class probabilities) at these outputs."""
        raise NotImplementedError

    def sample(self, rng, r_row):
        raise NotImplementedError

    def validate_targets(self, targets):
        pass


class UnitGaussianHead(LikelihoodHead):
    """Targets are Gaussian about the network output with unit covariance."""

    kind = "unit-gaussian"

    def __init__(self, dim=1):
        if dim < 1:
            raise ConfigurationError("output dimension must be >= 1")
        self.dim = int(dim)

    @property
    def n_columns(self):
        return self.dim

    def row_log_likelihood(self, r_row, y_row):
        quad = ad.add_n([ad.square(y - r) for r, y in zip(r_row, y_row)])
        return -0.5 * quad - 0.5 * self.dim * _LOG_2PI

    def mean(self, r_row):
        return np.asarray(r_row, dtype=float)

    def sample(self, rng, r_row):
        return np.asarray(r_row, dtype=float) + rng.standard_normal(self.dim)


class HeteroscedasticGaussianHead(LikelihoodHead):
    """Gaussian with a predicted mean and predicted Cholesky factor.

    The first ``dim`` columns are the mean; the remaining dim(dim+1)/2 pack
    the lower triangle of L row by row.  Diagonal entries pass through
    softplus so the covariance L L^T is positive definite by construction.
    """

    kind = "heteroscedastic-gaussian"

    def __init__(self, dim):
        if dim < 1:
            raise ConfigurationError("output dimension must be >= 1")
        self.dim = int(dim)

    @property
    def n_columns(self):
        return self.dim + self.dim * (self.dim + 1) // 2

    def _chol_rows(self, r_row):
        d = self.dim
        rows = []
        k = d
        for i in range(d):
            row = list(r_row[k:k + i + 1])
            row[-1] = ad.softplus(row[-1])
            rows.append(row)
            k += i + 1
        return rows

    def row_log_likelihood(self, r_row, y_row):
        d = self.dim
        chol = self._chol_rows(r_row)
        # forward substitution for z = L^-1 (y - mu)
        z = []
        log_det_half = 0.0
        for i in range(d):
            resid = y_row[i] - r_row[i]
            for j in range(i):
                resid = resid - chol[i][j] * z[j]
            z.append(resid / chol[i][i])
            log_det_half = log_det_half + ad.log(chol[i][i])
        quad = ad.add_n([ad.square(zi) for zi in z])
        return -0.5 * quad - log_det_half - 0.5 * d * _LOG_2PI

    def cholesky(self, r_row):
        mat = np.zeros((self.dim, self.dim))
        for i, row in enumerate(self._chol_rows(np.asarray(r_row, dtype=float))):
            mat[i, :i + 1] = row
        return mat

    def covariance(self, r_row):
        chol = self.cholesky(r_row)
        return chol @ chol.T

    def mean(self, r_row):
        return np.asarray(r_row[:self.dim], dtype=float)

    def sample(self, rng, r_row):
        chol = self.cholesky(r_row)
        return self.mean(r_row) + chol @ rng.standard_normal(self.dim)


class CategoricalHead(LikelihoodHead):
    """Targets are class indices; columns are unnormalised logits."""

    kind = "categorical"

    def __init__(self, n_classes):
        if n_classes < 2:
            raise ConfigurationError("need at least two classes")
        self.n_classes = int(n_classes)

    @property
    def n_columns(self):
        return self.n_classes

    def validate_targets(self, targets):
        labels = np.asarray(targets)[:, 0]
        if np.any(labels != np.round(labels)) or labels.min() < 0 \
                or labels.max() >= self.n_classes:
            raise ConfigurationError("categorical targets must be class indices")

    def row_log_likelihood(self, r_row, y_row):
        label = int(y_row[0])
        return r_row[label] - ad.logsumexp(list(r_row))

    def mean(self, r_row):
        logits = np.asarray(r_row, dtype=float)
        shifted = np.exp(logits - logits.max())
        return shifted / shifted.sum()

    def sample(self, rng, r_row):
        return np.array([rng.choice(self.n_classes, p=self.mean(r_row))], dtype=float)


class BinomialHead(LikelihoodHead):
    """Counts of positive responses out of ``n_trials``; one logit column.

    The logit maps through the logistic function to the positive-response
    rate.  The log likelihood is computed from softplus terms, which stays
    finite for any finite logit.
    """

    kind = "binomial"

    def __init__(self, n_trials):
        if n_trials < 1:
            raise ConfigurationError("binomial n_trials must be >= 1")
        self.n_trials = int(n_trials)

    @property
    def n_columns(self):
        return 1

    def validate_targets(self, targets):
        counts = np.asarray(targets)[:, 0]
        if np.any(counts != np.round(counts)) or counts.min() < 0 \
                or counts.max() > self.n_trials:
            raise ConfigurationError("binomial targets must be counts in [0, n_trials]")

    def row_log_likelihood(self, r_row, y_row):
        t = r_row[0]
        k = float(y_row[0])
        n = self.n_trials
        log_comb = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        # log p = -softplus(-t), log(1 - p) = -softplus(t)
        return log_comb - k * ad.softplus(-t) - (n - k) * ad.softplus(t)

    def rate(self, r_row):
        return ad.sigmoid(float(r_row[0]))

    def mean(self, r_row):
        return np.array([self.rate(r_row)])

    def class_probs(self, r_row):
        p = self.rate(r_row)
        return np.array([1.0 - p, p])

    def sample(self, rng, r_row):
        return np.array([rng.binomial(self.n_trials, self.rate(r_row))], dtype=float)


class MdnPoissonHead(LikelihoodHead):
    """Poisson point process over log masses, one mixture per voxel.

    Columns per voxel are raw mixture weights, component means, and raw
    widths (3 * n_components); weights go through softmax and widths through
    softplus.  A target row holds the catalogued masses falling in that
    voxel, zero-padded on the right (masses are strictly above the threshold,
    so zero is never a real entry).

    The row term is the catalogue sum of mixture log intensities at each
    halo's log mass, minus the voxel volume times the mass-weighted mixture
    integral above threshold (an erfc completion).  ``flip_sign`` negates the
    whole expression for callers that want the opposite convention.
    """

    kind = "mdn-poisson"
    fixed_structure = False

    def __init__(self, n_components, mass_threshold, voxel_volume, flip_sign=False):
        if n_components < 1:
            raise ConfigurationError("need at least one mixture component")
        if mass_threshold <= 0 or voxel_volume <= 0:
            raise ConfigurationError("mass threshold and voxel volume must be positive")
        self.n_components = int(n_components)
        self.mass_threshold = float(mass_threshold)
        self.voxel_volume = float(voxel_volume)
        self.flip_sign = bool(flip_sign)

    @property
    def n_columns(self):
        return 3 * self.n_components

    def _split(self, r_row):
        k = self.n_components
        raw_w = list(r_row[:k])
        mus = list(r_row[k:2 * k])
        sigmas = [ad.softplus(s) for s in r_row[2 * k:3 * k]]
        lse = ad.logsumexp(raw_w)
        log_weights = [w - lse for w in raw_w]
        return log_weights, mus, sigmas

    def _completion(self, log_weights, mus, sigmas):
        """Mass-weighted mixture integral over log m above the threshold."""
        log_tau = math.log(self.mass_threshold)
        terms = []
        for lw, mu, sigma in zip(log_weights, mus, sigmas):
            var = ad.square(sigma)
            u = (log_tau - mu - var) / (_SQRT2 * sigma)
            terms.append(ad.exp(lw + 0.5 * var) * 0.5 * ad.erfc(u))
        return ad.add_n(terms)

    def row_log_likelihood(self, r_row, y_row):
        log_weights, mus, sigmas = self._split(r_row)
        halo_terms = []
        for mass in y_row:
            m = float(mass)
            if m <= 0.0:
                continue  # padding
            x = math.log(m)
            comps = []
            for lw, mu, sigma in zip(log_weights, mus, sigmas):
                z = (x - mu) / sigma
                comps.append(lw - ad.log(sigma) - 0.5 * _LOG_2PI - 0.5 * ad.square(z))
            halo_terms.append(ad.logsumexp(comps))
        total = ad.add_n(halo_terms) if halo_terms else 0.0
        value = total - self.voxel_volume * self._completion(log_weights, mus, sigmas)
        return -value if self.flip_sign else value

    # -- numpy-side summaries -------------------------------------------------

    def component_params(self, r_row):
        r_row = np.asarray(r_row, dtype=float)
        k = self.n_components
        raw_w = r_row[:k]
        log_weights = raw_w - ad.logsumexp(list(raw_w))
        return log_weights, r_row[k:2 * k], ad.softplus(r_row[2 * k:3 * k])

    def expected_count(self, r_row):
        """Expected number of catalogued halos in one voxel."""
        log_w, mus, sigmas = self.component_params(r_row)
        var = sigmas ** 2
        u = (math.log(self.mass_threshold) - mus - var) / (_SQRT2 * sigmas)
        from scipy.special import erfc
        return self.voxel_volume * float(np.sum(np.exp(log_w + 0.5 * var) * 0.5 * erfc(u)))

    def expected_bin_counts(self, r, log_mass_edges):
        """Expected halo counts per log-mass bin, summed over voxel rows."""
        from scipy.special import erfc
        edges = np.asarray(log_mass_edges, dtype=float)
        counts = np.zeros(len(edges) - 1)
        for r_row in np.atleast_2d(r):
            log_w, mus, sigmas = self.component_params(r_row)
            var = sigmas ** 2
            upper = (edges[None, 1:] - mus[:, None] - var[:, None]) / (_SQRT2 * sigmas[:, None])
            lower = (edges[None, :-1] - mus[:, None] - var[:, None]) / (_SQRT2 * sigmas[:, None])
            mass = 0.5 * (erfc(lower) - erfc(upper))
            counts += self.voxel_volume * np.sum(
                np.exp(log_w + 0.5 * var)[:, None] * mass, axis=0)
        return counts

    def sample_catalog(self, rng, r):
        """Draw one synthetic catalogue: list of mass arrays, one per voxel."""
        log_tau = math.log(self.mass_threshold)
        catalog = []
        for r_row in np.atleast_2d(r):
            log_w, mus, sigmas = self.component_params(r_row)
            var = sigmas ** 2
            from scipy.special import erfc
            u = (log_tau - mus - var) / (_SQRT2 * sigmas)
            rates = self.voxel_volume * np.exp(log_w + 0.5 * var) * 0.5 * erfc(u)
            masses = []
            for rate, mu, sigma in zip(rates, mus + var, sigmas):
                n = rng.poisson(rate)
                got = 0
                while got < n:
                    x = mu + sigma * rng.standard_normal()
                    if x >= log_tau:
                        masses.append(math.exp(x))
                        got += 1
            catalog.append(np.array(sorted(masses)))
        return catalog

    def mean(self, r_row):
        return np.array([self.expected_count(r_row)])

    def sample(self, rng, r_row):
        raise ConfigurationError(
            "the mdn-poisson head samples whole catalogues; use sample_catalog")


def pad_catalog(catalog, width=None):
    """Stack per-voxel mass arrays into a rectangular zero-padded matrix."""
    width = width or max((len(m) for m in catalog), default=0)
    width = max(width, 1)
    out = np.zeros((len(catalog), width))
    for i, masses in enumerate(catalog):
        if len(masses) > width:
            raise ConfigurationError("catalogue row exceeds padded width")
        out[i, :len(masses)] = masses
    return out


def log_likelihood(head, r, targets):
    """Sum of per-row log likelihoods over a whole output/target matrix."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if r.shape[0] != targets.shape[0]:
        raise ConfigurationError("output and target row counts differ")
    if r.shape[1] != head.n_columns:
        raise ConfigurationError(
            f"{head.kind} head expects {head.n_columns} columns, got {r.shape[1]}")
    head.validate_targets(targets)
    return float(sum(head.row_log_likelihood(r_row, y_row)
                     for r_row, y_row in zip(r, targets)))
