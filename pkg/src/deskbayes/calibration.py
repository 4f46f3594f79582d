"""Predictive-probability calibration and information-based ranking.

Reliability diagrams bin predicted probabilities and compare each bin's
mean prediction against the empirical positive fraction; a calibrated
predictor puts the two on the diagonal.  Platt scaling recalibrates by
fitting an affine map in logit space.  The mutual-information score ranks
inputs by how much the predictive draws disagree, which is where a label
would teach the model the most.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError

_PROB_CLIP = 1e-6


@dataclass
class ReliabilityBins:
    """Equal-width probability bins with per-bin calibration summaries.

    Empty bins keep a zero count and NaN fractions.
    """

    edges: np.ndarray
    mean_probability: np.ndarray
    positive_fraction: np.ndarray
    counts: np.ndarray

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class PlattModel:
    """Affine recalibration in logit space; (1, 0) is the identity."""

    slope: float = 1.0
    intercept: float = 0.0


def _check_probs_labels(probs, labels):
    probs = np.asarray(probs, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if probs.size == 0:
        raise ConfigurationError("no probabilities supplied")
    if probs.shape != labels.shape:
        raise ConfigurationError("probabilities and labels differ in length")
    if np.any((probs < 0) | (probs > 1)):
        raise ConfigurationError("probabilities must lie in [0, 1]")
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise ConfigurationError("labels must be binary")
    return probs, labels


def reliability_diagram(probs, labels, n_bins=10):
    """Bin predictions on [0, 1] and tally empirical positive fractions."""
    probs, labels = _check_probs_labels(probs, labels)
    if n_bins < 1:
        raise ConfigurationError("need at least one bin")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(probs, edges[1:-1]), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(int)
    mean_prob = np.full(n_bins, math.nan)
    frac_pos = np.full(n_bins, math.nan)
    for b in range(n_bins):
        mask = idx == b
        if counts[b]:
            mean_prob[b] = probs[mask].mean()
            frac_pos[b] = labels[mask].mean()
    return ReliabilityBins(edges, mean_prob, frac_pos, counts)


def expected_calibration_error(bins):
    """Count-weighted mean absolute gap between prediction and frequency."""
    total = bins.total
    if total == 0:
        raise ConfigurationError("reliability bins are empty")
    gaps = np.abs(bins.positive_fraction - bins.mean_probability)
    occupied = bins.counts > 0
    return float(np.sum(bins.counts[occupied] * gaps[occupied]) / total)


def _logit(probs):
    clipped = np.clip(probs, _PROB_CLIP, 1.0 - _PROB_CLIP)
    return np.log(clipped / (1.0 - clipped))


def platt_fit(probs, labels, max_iterations=100, tol=1e-10):
    """Fit the logit-space affine recalibration by Newton iterations.

    Maximises the Bernoulli log likelihood of sigmoid(a logit(p) + b).
    Raises :class:`NumericError` with the iteration trace on
    non-convergence.
    """
    probs, labels = _check_probs_labels(probs, labels)
    if labels.min() == labels.max():
        raise ConfigurationError("both classes must be present to fit")
    z = _logit(probs)
    design = np.column_stack([z, np.ones_like(z)])
    theta = np.array([1.0, 0.0])
    trace = []
    for _ in range(max_iterations):
        logits = design @ theta
        pred = 1.0 / (1.0 + np.exp(-logits))
        gradient = design.T @ (labels - pred)
        weights = pred * (1.0 - pred)
        hessian = design.T @ (design * weights[:, None])
        try:
            delta = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular Newton system; trace={trace}") from exc
        theta = theta + delta
        trace.append(float(np.max(np.abs(delta))))
        if trace[-1] < tol:
            return PlattModel(slope=float(theta[0]), intercept=float(theta[1]))
    raise NumericError(
        f"Platt fit did not converge in {max_iterations} iterations; "
        f"step trace={trace[-5:]}")


def platt_apply(model, probs):
    """Apply the affine logit map, returning recalibrated probabilities."""
    probs = np.asarray(probs, dtype=float)
    logits = model.slope * _logit(probs) + model.intercept
    return 1.0 / (1.0 + np.exp(-logits))


def bald_mutual_information(class_prob_samples):
    """Disagreement score: entropy of the mean minus mean of entropies (nats).

    ``class_prob_samples`` holds one simplex row per predictive draw.
    """
    samples = np.asarray(class_prob_samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ConfigurationError("need a (draws >= 2, classes) probability matrix")
    sums = samples.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6) or np.any(samples < -1e-12):
        raise ConfigurationError("rows must be points on the probability simplex")

    def entropy(p):
        p = np.clip(p, 0.0, 1.0)
        mask = p > 0.0
        return -float(np.sum(p[mask] * np.log(p[mask])))

    marginal = entropy(samples.mean(axis=0))
    conditional = float(np.mean([entropy(row) for row in samples]))
    mi = marginal - conditional
    if mi < -1e-12:
        raise NumericError(f"mutual information fell below zero: {mi}")
    return mi


def rank_for_labelling(inputs, predict_probs, n_passes, top_k, rng=None):
    """Indices of the inputs whose stochastic predictions disagree most.

    ``predict_probs(inputs, n_passes, rng)`` must return per-pass class
    probabilities shaped (n_inputs, n_passes, n_classes).  Ties break by
    input order, so a deterministic predictor yields the identity ranking.
    """
    if top_k < 0:
        raise ConfigurationError("top_k must be >= 0")
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if top_k > inputs.shape[0]:
        raise ConfigurationError("top_k exceeds the number of inputs")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    prob_draws = np.asarray(predict_probs(inputs, n_passes, rng), dtype=float)
    scores = np.array([bald_mutual_information(prob_draws[i])
                       for i in range(inputs.shape[0])])
    order = np.argsort(-scores, kind="stable")
    return order[:top_k]
