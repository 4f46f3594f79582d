"""Momentum mass matrices for Hamiltonian kernels."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError


class MassMatrix:
    """Identity, diagonal, or dense SPD momentum covariance.

    Supplies the three operations kernels need: momentum draws from
    N(0, M), the inverse product M^-1 v, and the kinetic energy
    v^T M^-1 v / 2.
    """

    def __init__(self, kind="identity", values=None):
        if kind not in ("identity", "diagonal", "dense"):
            raise ConfigurationError(f"unknown mass matrix kind {kind!r}")
        self.kind = kind
        if kind == "identity":
            self.values = None
        elif kind == "diagonal":
            values = np.asarray(values, dtype=float)
            if values.ndim != 1 or np.any(values <= 0):
                raise ConfigurationError("diagonal mass entries must be positive")
            self.values = values
            self._sqrt = np.sqrt(values)
        else:
            values = np.asarray(values, dtype=float)
            if values.ndim != 2 or values.shape[0] != values.shape[1] \
                    or not np.allclose(values, values.T):
                raise ConfigurationError("dense mass matrix must be square symmetric")
            try:
                self._chol = np.linalg.cholesky(values)
            except np.linalg.LinAlgError:
                raise ConfigurationError("dense mass matrix is not positive definite")
            self.values = values
            self._inv = np.linalg.inv(values)

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def diagonal(cls, entries):
        return cls("diagonal", entries)

    @classmethod
    def dense(cls, matrix):
        return cls("dense", matrix)

    def check_dim(self, dim):
        if self.kind == "diagonal" and len(self.values) != dim:
            raise ConfigurationError("diagonal mass length does not match target")
        if self.kind == "dense" and self.values.shape[0] != dim:
            raise ConfigurationError("dense mass shape does not match target")

    def sample(self, rng, dim):
        z = rng.standard_normal(dim)
        if self.kind == "identity":
            return z
        if self.kind == "diagonal":
            return self._sqrt * z
        return self._chol @ z

    def inv_mul(self, v):
        if self.kind == "identity":
            return v
        if self.kind == "diagonal":
            return v / self.values
        return self._inv @ v

    def kinetic(self, v):
        return 0.5 * float(v @ self.inv_mul(v))

    def snapshot(self):
        if self.kind == "identity":
            return {"mass": "identity"}
        return {"mass": self.kind,
                "mass_values": np.array2string(self.values, separator=",")}
