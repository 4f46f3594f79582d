"""Training data container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass
class Dataset:
    """Paired input/target matrices with an optional minibatch schedule.

    ``inputs`` is (n_elems, d_in) and ``targets`` is (n_elems, d_out); rows
    correspond.  ``minibatch_size`` caps subsample draws used by stochastic
    methods; ``shuffle_seed`` makes the schedule reproducible.
    """

    inputs: np.ndarray
    targets: np.ndarray
    minibatch_size: int | None = None
    shuffle_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ConfigurationError(
                f"inputs have {self.inputs.shape[0]} rows but targets have "
                f"{self.targets.shape[0]}")
        if self.minibatch_size is not None:
            if not 1 <= self.minibatch_size <= self.n_elems:
                raise ConfigurationError(
                    "minibatch size must lie in [1, n_elems]")
        self._rng = np.random.default_rng(self.shuffle_seed)

    @property
    def n_elems(self):
        return self.inputs.shape[0]

    @property
    def d_in(self):
        return self.inputs.shape[1]

    @property
    def d_out(self):
        return self.targets.shape[1]

    def draw_minibatch(self, rng=None):
        """Row indices for one minibatch; the full index range if unscheduled."""
        if self.minibatch_size is None or self.minibatch_size == self.n_elems:
            return np.arange(self.n_elems)
        gen = self._rng if rng is None else rng
        return gen.choice(self.n_elems, size=self.minibatch_size, replace=False)
