"""Chain quality diagnostics: effective sample size and split R-hat."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class ChainStats:
    """Per-dimension summaries for a set of chains over the same target."""

    ess: np.ndarray
    r_hat: np.ndarray
    acceptance_rate: float
    divergence_count: int
    degenerate_dims: list = field(default_factory=list)

    def as_dict(self):
        return {
            "ess": self.ess.tolist(),
            "r_hat": self.r_hat.tolist(),
            "acceptance_rate": self.acceptance_rate,
            "divergence_count": self.divergence_count,
            "degenerate_dims": list(self.degenerate_dims),
        }


def effective_sample_size(samples, dimension=0):
    """ESS via the autocorrelation time, n / (1 + 2 sum rho_t).

    The sum over autocorrelations stops before the first negative paired
    sum rho_2k + rho_2k+1 (initial-positive truncation).  A constant chain
    returns the 0.0 degenerate sentinel.
    """
    samples = np.asarray(samples, dtype=float)
    series = samples if samples.ndim == 1 else samples[:, dimension]
    n = len(series)
    if n < 100:
        raise ConfigurationError("effective sample size needs >= 100 samples")
    centred = series - series.mean()
    variance = float(centred @ centred) / n
    if variance == 0.0:
        return 0.0  # degenerate chain
    # FFT autocovariance, biased normalisation
    size = 1 << (2 * n - 1).bit_length()
    fft = np.fft.rfft(centred, size)
    acov = np.fft.irfft(fft * np.conjugate(fft), size)[:n].real / n
    rho = acov / variance
    tau = 1.0
    k = 0
    while 2 * k + 2 < n:
        pair = rho[2 * k + 1] + rho[2 * k + 2]
        if pair < 0.0:
            break
        tau += 2.0 * pair
        k += 1
    return float(n / tau)


def r_hat(chains, dimension=0):
    """Split-chain potential scale reduction factor.

    Each chain is halved; the statistic compares between-half and
    within-half variances.  Values near one indicate the chains agree.
    """
    arrays = [np.asarray(c, dtype=float) for c in chains]
    arrays = [a if a.ndim == 1 else a[:, dimension] for a in arrays]
    if len(arrays) < 1:
        raise ConfigurationError("need at least one chain")
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise ConfigurationError("chains must share a common length")
    if n < 100:
        raise ConfigurationError("split R-hat needs chains of length >= 100")
    half = n // 2
    splits = []
    for a in arrays:
        splits.append(a[:half])
        splits.append(a[n - half:])
    if len(splits) < 2:
        raise ConfigurationError("need at least two split halves")
    split_matrix = np.stack(splits)
    m, length = split_matrix.shape
    means = split_matrix.mean(axis=1)
    variances = split_matrix.var(axis=1, ddof=1)
    within = variances.mean()
    between = length * means.var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    pooled = (length - 1) / length * within + between / length
    return float(math.sqrt(pooled / within))


def summarize_chains(chains):
    """ChainStats across a list of :class:`deskbayes.samplers.Chain`."""
    if not chains:
        raise ConfigurationError("no chains to summarise")
    dim = chains[0].dim
    ess = np.empty(dim)
    rhats = np.empty(dim)
    degenerate = []
    stacked = [c.samples for c in chains]
    for d in range(dim):
        ess[d] = sum(effective_sample_size(s, d) for s in stacked)
        if ess[d] == 0.0:
            degenerate.append(d)
        rhats[d] = r_hat(stacked, d)
    total_steps = sum(c.n_total - c.burn_in for c in chains)
    accepted = sum(c.accept_count for c in chains)
    return ChainStats(
        ess=ess,
        r_hat=rhats,
        acceptance_rate=accepted / total_steps if total_steps else 0.0,
        divergence_count=sum(c.divergence_count for c in chains),
        degenerate_dims=degenerate,
    )
