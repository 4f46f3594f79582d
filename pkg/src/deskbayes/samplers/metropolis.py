"""Random-walk Metropolis-Hastings."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class MHResult:
    position: np.ndarray
    accepted: bool
    log_density: float


def mh_step(position, proposal_sigma, target, rng, current_log_density=None):
    """One Gaussian random-walk transition.

    The proposal is symmetric so the acceptance ratio reduces to the ratio
    of unnormalised densities.  Zero-density proposals are rejected; a
    zero-density current point is a precondition violation since the ratio
    is then undefined.
    """
    position = np.asarray(position, dtype=float)
    sigma = np.broadcast_to(np.asarray(proposal_sigma, dtype=float), position.shape)
    if np.any(sigma <= 0):
        raise ConfigurationError("proposal scales must be positive")
    if current_log_density is None:
        current_log_density = target.log_density(position)
    if current_log_density == -math.inf:
        raise ConfigurationError("started at zero-density point")
    proposal = position + sigma * rng.standard_normal(position.shape)
    proposal_log_density = target.log_density(proposal)
    log_ratio = proposal_log_density - current_log_density
    if math.log(rng.uniform()) < min(0.0, log_ratio):
        return MHResult(proposal, True, proposal_log_density)
    return MHResult(position, False, current_log_density)
