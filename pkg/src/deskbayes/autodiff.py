"""Scalar reverse-mode automatic differentiation on a flat tape.

A :class:`Tape` holds a topologically ordered list of scalar nodes.  Leaf
nodes read from a bound parameter vector (and optionally a bound data
vector, so one graph can be re-evaluated against fresh minibatches without
rebuilding).  Interior nodes apply primitive operations.  One forward pass
computes the scalar output; one reverse pass accumulates exact derivatives
with respect to every parameter slot.

Graphs are built through :class:`Expr` handles, which support arithmetic
operators and the primitive functions in this module.  Those functions also
accept plain floats and numpy values, so model code written against them
runs both as ordinary numerics and as graph construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EvaluationError

# Op codes, kept as small ints for dispatch speed in the interpreter loops.
CONST = 0
PARAM = 1
DATA = 2
ADD = 3
SUB = 4
MUL = 5
NEG = 6
EXP = 7
LOG = 8
TANH = 9
ERFC = 10
RECIP = 11
SQRT = 12
SUM = 13
DOT = 14
MAX = 15
SOFTPLUS = 16

OP_NAMES = {
    CONST: "constant",
    PARAM: "parameter-ref",
    DATA: "data-ref",
    ADD: "add",
    SUB: "sub",
    MUL: "mul",
    NEG: "neg",
    EXP: "exp",
    LOG: "log",
    TANH: "tanh",
    ERFC: "erfc",
    RECIP: "reciprocal",
    SQRT: "square-root",
    SUM: "sum",
    DOT: "matmul-element",
    MAX: "max",
    SOFTPLUS: "softplus",
}

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


@dataclass(frozen=True)
class CompNode:
    """Introspection view of one tape node."""

    op_kind: str
    operands: tuple
    aux: object
    value: float | None


class Expr:
    """Handle to one node of a tape; supports arithmetic operators."""

    __slots__ = ("tape", "i")

    def __init__(self, tape, i):
        self.tape = tape
        self.i = i

    def _lift(self, other):
        if isinstance(other, Expr):
            if other.tape is not self.tape:
                raise ConfigurationError("cannot mix nodes from different tapes")
            return other
        return self.tape.const(float(other))

    def __add__(self, other):
        return self.tape._push(ADD, (self.i, self._lift(other).i))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape._push(SUB, (self.i, self._lift(other).i))

    def __rsub__(self, other):
        return self.tape._push(SUB, (self._lift(other).i, self.i))

    def __mul__(self, other):
        return self.tape._push(MUL, (self.i, self._lift(other).i))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        return self.tape._push(MUL, (self.i, self.tape._push(RECIP, (other.i,)).i))

    def __rtruediv__(self, other):
        inv = self.tape._push(RECIP, (self.i,))
        return self._lift(other).__mul__(inv)

    def __neg__(self):
        return self.tape._push(NEG, (self.i,))


class Tape:
    """Topologically ordered computation graph over a flat parameter vector."""

    __slots__ = ("n_params", "n_data", "ops", "args", "aux", "output_index",
                 "_param_nodes", "_values")

    def __init__(self, n_params, n_data=0):
        if n_params < 0 or n_data < 0:
            raise ConfigurationError("tape slot counts must be non-negative")
        self.n_params = n_params
        self.n_data = n_data
        self.ops = []
        self.args = []
        self.aux = []
        self.output_index = None
        self._param_nodes = []
        self._values = None

    # -- construction ------------------------------------------------------

    def _push(self, op, operands, aux=None):
        self.ops.append(op)
        self.args.append(operands)
        self.aux.append(aux)
        return Expr(self, len(self.ops) - 1)

    def const(self, value):
        return self._push(CONST, (), float(value))

    def param(self, index):
        index = int(index)
        if not 0 <= index < self.n_params:
            raise ConfigurationError(
                f"parameter-ref {index} outside bound vector of length {self.n_params}")
        expr = self._push(PARAM, (), index)
        self._param_nodes.append(expr.i)
        return expr

    def params(self):
        return [self.param(i) for i in range(self.n_params)]

    def data(self, index):
        index = int(index)
        if not 0 <= index < self.n_data:
            raise ConfigurationError(
                f"data-ref {index} outside bound vector of length {self.n_data}")
        return self._push(DATA, (), index)

    def mark_output(self, expr):
        if expr.tape is not self:
            raise ConfigurationError("output node belongs to a different tape")
        self.output_index = expr.i
        self.validate()

    # -- inspection --------------------------------------------------------

    def __len__(self):
        return len(self.ops)

    def node(self, i):
        value = None if self._values is None else self._values[i]
        return CompNode(OP_NAMES[self.ops[i]], tuple(self.args[i]), self.aux[i], value)

    def validate(self):
        """Check topological ordering and leaf bounds."""
        for i, operands in enumerate(self.args):
            for j in operands:
                if j >= i:
                    raise ConfigurationError(
                        f"node {i} references node {j}; operands must precede")
            op = self.ops[i]
            if op == PARAM and not 0 <= self.aux[i] < self.n_params:
                raise ConfigurationError(f"node {i}: parameter-ref out of bounds")
            if op == DATA and not 0 <= self.aux[i] < self.n_data:
                raise ConfigurationError(f"node {i}: data-ref out of bounds")

    # -- evaluation --------------------------------------------------------

    def _run_forward(self, params, data):
        ops, args, aux = self.ops, self.args, self.aux
        values = [0.0] * len(ops)
        i = -1
        try:
            for i in range(len(ops)):
                op = ops[i]
                if op == DOT:
                    a = args[i]
                    h = len(a) // 2
                    acc = 0.0
                    for k in range(h):
                        acc += values[a[k]] * values[a[k + h]]
                    v = acc
                elif op == ADD:
                    a, b = args[i]
                    v = values[a] + values[b]
                elif op == MUL:
                    a, b = args[i]
                    v = values[a] * values[b]
                elif op == SUB:
                    a, b = args[i]
                    v = values[a] - values[b]
                elif op == SUM:
                    acc = 0.0
                    for j in args[i]:
                        acc += values[j]
                    v = acc
                elif op == PARAM:
                    v = params[aux[i]]
                elif op == CONST:
                    v = aux[i]
                elif op == DATA:
                    v = data[aux[i]]
                elif op == NEG:
                    v = -values[args[i][0]]
                elif op == EXP:
                    v = math.exp(values[args[i][0]])
                elif op == LOG:
                    v = math.log(values[args[i][0]])
                elif op == TANH:
                    v = math.tanh(values[args[i][0]])
                elif op == ERFC:
                    v = math.erfc(values[args[i][0]])
                elif op == RECIP:
                    v = 1.0 / values[args[i][0]]
                elif op == SQRT:
                    v = math.sqrt(values[args[i][0]])
                elif op == SOFTPLUS:
                    x = values[args[i][0]]
                    v = math.log1p(math.exp(-abs(x))) + (x if x > 0.0 else 0.0)
                elif op == MAX:
                    v = max(values[j] for j in args[i])
                else:  # pragma: no cover
                    raise AssertionError(f"unknown op {op}")
                values[i] = v
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise EvaluationError(i) from exc
        out = values[self.output_index]
        if not math.isfinite(out):
            for j, v in enumerate(values):
                if not math.isfinite(v):
                    raise EvaluationError(j)
        return values

    def forward(self, params, data=None):
        """Evaluate the output node; caches per-node forward values."""
        if self.output_index is None:
            raise ConfigurationError("tape has no output node")
        values = self._run_forward(params, data)
        self._values = values
        return values[self.output_index]

    def _run_backward(self, values):
        ops, args = self.ops, self.args
        n = len(ops)
        adjoint = [0.0] * n
        adjoint[self.output_index] = 1.0
        for i in range(n - 1, -1, -1):
            a_i = adjoint[i]
            if a_i == 0.0:
                continue
            op = ops[i]
            if op == DOT:
                a = args[i]
                h = len(a) // 2
                for k in range(h):
                    adjoint[a[k]] += a_i * values[a[k + h]]
                    adjoint[a[k + h]] += a_i * values[a[k]]
            elif op == ADD:
                a, b = args[i]
                adjoint[a] += a_i
                adjoint[b] += a_i
            elif op == MUL:
                a, b = args[i]
                adjoint[a] += a_i * values[b]
                adjoint[b] += a_i * values[a]
            elif op == SUB:
                a, b = args[i]
                adjoint[a] += a_i
                adjoint[b] -= a_i
            elif op == SUM:
                for j in args[i]:
                    adjoint[j] += a_i
            elif op in (PARAM, CONST, DATA):
                continue
            elif op == NEG:
                adjoint[args[i][0]] -= a_i
            elif op == EXP:
                adjoint[args[i][0]] += a_i * values[i]
            elif op == LOG:
                adjoint[args[i][0]] += a_i / values[args[i][0]]
            elif op == TANH:
                adjoint[args[i][0]] += a_i * (1.0 - values[i] * values[i])
            elif op == ERFC:
                x = values[args[i][0]]
                adjoint[args[i][0]] -= a_i * _TWO_OVER_SQRT_PI * math.exp(-x * x)
            elif op == RECIP:
                adjoint[args[i][0]] -= a_i * values[i] * values[i]
            elif op == SQRT:
                adjoint[args[i][0]] += a_i * 0.5 / values[i]
            elif op == SOFTPLUS:
                x = values[args[i][0]]
                if x >= 0.0:
                    s = 1.0 / (1.0 + math.exp(-x))
                else:
                    e = math.exp(x)
                    s = e / (1.0 + e)
                adjoint[args[i][0]] += a_i * s
            elif op == MAX:
                best = args[i][0]
                for j in args[i][1:]:
                    if values[j] > values[best]:
                        best = j
                adjoint[best] += a_i
        return adjoint

    def forward_backward(self, params, data=None):
        """Return (output value, gradient of output w.r.t. the parameter vector)."""
        value = self.forward(params, data)
        adjoint = self._run_backward(self._values)
        grad = np.zeros(self.n_params)
        aux = self.aux
        for i in self._param_nodes:
            grad[aux[i]] += adjoint[i]
        return value, grad

    def gradient(self, params, data=None):
        return self.forward_backward(params, data)[1]


# -- spec-level entry points -----------------------------------------------

def tape_forward(tape, params, data=None):
    """Evaluate a graph at a bound parameter vector.

    Raises :class:`EvaluationError` carrying the offending node index if any
    intermediate value is non-finite.
    """
    params = _check_param_vector(params, tape.n_params)
    return tape.forward(params, data)


def tape_gradient(tape, params, data=None):
    """Exact reverse-mode gradient of the output w.r.t. every parameter slot."""
    params = _check_param_vector(params, tape.n_params)
    return tape.forward_backward(params, data)[1]


def finite_difference_check(tape, params, step=1e-5):
    """Max relative disagreement between reverse mode and central differences.

    Returns max over coordinates of |central - reverse| / (|reverse| + 1e-12).
    """
    if step <= 0:
        raise ConfigurationError("finite-difference step must be positive")
    params = _check_param_vector(params, tape.n_params)
    grad = tape.forward_backward(params)[1]
    worst = 0.0
    work = params.copy()
    for i in range(len(params)):
        work[i] = params[i] + step
        hi = tape.forward(work)
        work[i] = params[i] - step
        lo = tape.forward(work)
        work[i] = params[i]
        central = (hi - lo) / (2.0 * step)
        err = abs(central - grad[i]) / (abs(grad[i]) + 1e-12)
        worst = max(worst, err)
    return worst


def _check_param_vector(params, expected):
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.shape[0] != expected:
        raise ConfigurationError(
            f"parameter vector has shape {params.shape}, expected ({expected},)")
    if not np.all(np.isfinite(params)):
        raise ConfigurationError("parameter vector contains non-finite entries")
    return params


# -- generic math usable on Expr handles and on plain numerics ---------------

def _unary(x, op, np_fn):
    if isinstance(x, Expr):
        return x.tape._push(op, (x.i,))
    return np_fn(x)


def exp(x):
    return _unary(x, EXP, np.exp)


def log(x):
    return _unary(x, LOG, np.log)


def tanh(x):
    return _unary(x, TANH, np.tanh)


def erfc(x):
    if isinstance(x, Expr):
        return x.tape._push(ERFC, (x.i,))
    from scipy.special import erfc as _erfc
    return _erfc(x)


def sqrt(x):
    return _unary(x, SQRT, np.sqrt)


def reciprocal(x):
    if isinstance(x, Expr):
        return x.tape._push(RECIP, (x.i,))
    return 1.0 / x


def softplus(x):
    if isinstance(x, Expr):
        return x.tape._push(SOFTPLUS, (x.i,))
    return np.logaddexp(0.0, x)


def square(x):
    return x * x


def relu(x):
    if isinstance(x, Expr):
        return maximum(x, x.tape.const(0.0))
    return np.maximum(x, 0.0)


def sigmoid(x):
    # 0.5 * (1 + tanh(x / 2)) is the logistic function and never overflows.
    return 0.5 * (1.0 + tanh(0.5 * x))


def maximum(*xs):
    exprs = [x for x in xs if isinstance(x, Expr)]
    if not exprs:
        return max(xs)
    tape = exprs[0].tape
    return tape._push(MAX, tuple(exprs[0]._lift(x).i for x in xs))


def add_n(xs):
    """Sum of a sequence, as a single n-ary node when any term is an Expr."""
    xs = list(xs)
    if not xs:
        return 0.0
    exprs = [x for x in xs if isinstance(x, Expr)]
    if not exprs:
        return math.fsum(xs)
    tape = exprs[0].tape
    return tape._push(SUM, tuple(exprs[0]._lift(x).i for x in xs))


def dot(xs, ys):
    """Inner product of two equal-length sequences as one fused node."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise ConfigurationError("dot operands must have equal length")
    exprs = [x for x in xs + ys if isinstance(x, Expr)]
    if not exprs:
        return float(np.dot(xs, ys))
    tape = exprs[0].tape
    lift = exprs[0]._lift
    idx = tuple(lift(x).i for x in xs) + tuple(lift(y).i for y in ys)
    return tape._push(DOT, idx)


def logsumexp(xs):
    """Shift-stabilised log-sum-exp of a sequence."""
    xs = list(xs)
    if not any(isinstance(x, Expr) for x in xs):
        from scipy.special import logsumexp as _lse
        return float(_lse(xs))
    m = maximum(*xs)
    return m + log(add_n([exp(x - m) for x in xs]))
