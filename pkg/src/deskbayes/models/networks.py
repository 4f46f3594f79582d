"""Dense multilayer perceptrons over flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError

_ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of a dense network plus the likelihood head it feeds.

    ``layer_widths`` runs from the input width to the final (head) width, so
    a 1-8-1 net is ``(1, 8, 1)``.  ``activation`` applies to hidden layers
    only and may be a single name or one name per hidden layer.  The head
    fixes how the final-layer outputs parameterise the target likelihood.
    """

    layer_widths: tuple
    activation: object = "tanh"
    head: object = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ConfigurationError("layer widths must be >= 1 with at least one layer")
        acts = self.activation
        if isinstance(acts, str):
            acts = (acts,) * self.n_hidden
        acts = tuple(acts)
        if len(acts) != self.n_hidden:
            raise ConfigurationError(
                f"need {self.n_hidden} hidden activations, got {len(acts)}")
        for a in acts:
            if a not in _ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {a!r}")
        object.__setattr__(self, "activation", acts)
        if self.head is not None and widths[-1] != self.head.n_columns:
            raise ConfigurationError(
                f"final layer width {widths[-1]} does not match the "
                f"{self.head.kind} head's {self.head.n_columns} columns")

    @property
    def n_hidden(self):
        return len(self.layer_widths) - 2

    @property
    def n_params(self):
        return sum((a + 1) * b for a, b in zip(self.layer_widths, self.layer_widths[1:]))

    def layer_slices(self):
        """(weight_slice, bias_slice, n_in, n_out) per layer, row-major weights."""
        out = []
        k = 0
        for n_in, n_out in zip(self.layer_widths, self.layer_widths[1:]):
            w = slice(k, k + n_in * n_out)
            k += n_in * n_out
            b = slice(k, k + n_out)
            k += n_out
            out.append((w, b, n_in, n_out))
        return out


def _apply_activation(name, x):
    if name == "tanh":
        return ad.tanh(x)
    if name == "relu":
        return ad.relu(x)
    return x


def mlp_forward(spec, params, inputs, dropout_masks=None):
    """Vectorised forward pass: (n, d_in) inputs to (n, head columns) outputs.

    ``dropout_masks`` optionally multiplies each hidden activation matrix by
    a same-shaped factor (already scaled; see the dropout module).
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (spec.n_params,):
        raise ConfigurationError(
            f"parameter vector has shape {params.shape}, expected ({spec.n_params},)")
    a = np.atleast_2d(np.asarray(inputs, dtype=float))
    if a.shape[1] != spec.layer_widths[0]:
        raise ConfigurationError(
            f"inputs have {a.shape[1]} columns, network expects {spec.layer_widths[0]}")
    layers = spec.layer_slices()
    for l, (wsl, bsl, n_in, n_out) in enumerate(layers):
        weights = params[wsl].reshape(n_out, n_in)
        a = a @ weights.T + params[bsl]
        if l < len(layers) - 1:
            a = _apply_activation(spec.activation[l], a)
            if dropout_masks is not None and dropout_masks[l] is not None:
                a = a * dropout_masks[l]
    return a


def mlp_forward_exprs(spec, param_exprs, input_rows, dropout_masks=None):
    """Graph-building forward pass; rows of Expr (or float) outputs.

    ``param_exprs`` is a flat sequence in the same packing order as the
    numpy path, so both evaluate the same function.
    """
    if len(param_exprs) != spec.n_params:
        raise ConfigurationError(
            f"got {len(param_exprs)} parameter nodes, expected {spec.n_params}")
    layers = spec.layer_slices()
    outputs = []
    for n, row in enumerate(input_rows):
        a = list(row)
        for l, (wsl, bsl, n_in, n_out) in enumerate(layers):
            weights = param_exprs[wsl.start:wsl.stop]
            biases = param_exprs[bsl.start:bsl.stop]
            if len(a) != n_in:
                raise ConfigurationError("input row width does not match network")
            nxt = []
            for j in range(n_out):
                pre = ad.dot(weights[j * n_in:(j + 1) * n_in], a) + biases[j]
                if l < len(layers) - 1:
                    pre = _apply_activation(spec.activation[l], pre)
                    if dropout_masks is not None and dropout_masks[l] is not None:
                        pre = pre * float(dropout_masks[l][n, j])
                nxt.append(pre)
            a = nxt
        outputs.append(a)
    return outputs
