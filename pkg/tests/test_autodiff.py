import math

import numpy as np
import pytest

from deskbayes import autodiff as ad
from deskbayes.errors import ConfigurationError, EvaluationError


def quadratic_tape():
    t = ad.Tape(1)
    x = t.param(0)
    t.mark_output(x * x)
    return t


def two_layer_tanh_loss(n_in=3, n_hidden=4):
    """Small tanh MLP squared-error loss built directly on a tape."""
    n_params = (n_in + 1) * n_hidden + (n_hidden + 1)
    t = ad.Tape(n_params)
    p = t.params()
    x = [0.3, -1.2, 0.7]
    k = 0
    hidden = []
    for j in range(n_hidden):
        w = p[k:k + n_in]
        k += n_in
        hidden.append(ad.tanh(ad.dot(w, x) + p[k]))
        k += 1
    out = ad.dot(p[k:k + n_hidden], hidden) + p[k + n_hidden]
    t.mark_output(ad.square(out - 0.5))
    return t


def test_forward_square():
    assert ad.tape_forward(quadratic_tape(), [3.0]) == 9.0


def test_forward_log_exp_identity():
    t = ad.Tape(1)
    x = t.param(0)
    t.mark_output(ad.log(ad.exp(x)))
    assert ad.tape_forward(t, [1.7]) == pytest.approx(1.7, abs=1e-15)


def test_forward_product_plus():
    t = ad.Tape(2)
    x, y = t.params()
    t.mark_output(x * y + y)
    assert ad.tape_forward(t, [2.0, 5.0]) == 15.0


def test_gradient_square():
    assert ad.tape_gradient(quadratic_tape(), [3.0])[0] == pytest.approx(6.0)


def test_gradient_product():
    t = ad.Tape(2)
    x, y = t.params()
    t.mark_output(x * y)
    assert ad.tape_gradient(t, [2.0, 5.0]) == pytest.approx([5.0, 2.0])


def test_gradient_standard_normal_logpdf():
    t = ad.Tape(1)
    x = t.param(0)
    t.mark_output(-0.5 * ad.square(x) - 0.5 * math.log(2 * math.pi))
    assert ad.tape_gradient(t, [1.3])[0] == pytest.approx(-1.3)


def test_fd_check_quadratic():
    assert ad.finite_difference_check(quadratic_tape(), np.array([1.7]), 1e-5) < 1e-8


def test_fd_check_mlp_loss():
    rng = np.random.default_rng(42)
    t = two_layer_tanh_loss()
    for _ in range(5):
        assert ad.finite_difference_check(t, rng.standard_normal(t.n_params), 1e-5) < 1e-5


def test_fd_check_constant_graph():
    t = ad.Tape(2)
    t.params()
    t.mark_output(t.const(4.2))
    assert ad.finite_difference_check(t, np.zeros(2), 1e-5) == 0.0


def test_primitive_derivatives_against_fd():
    builders = {
        "exp": ad.exp,
        "log": lambda x: ad.log(x * x + 1.5),
        "tanh": ad.tanh,
        "erfc": ad.erfc,
        "recip": lambda x: ad.reciprocal(x * x + 0.7),
        "sqrt": lambda x: ad.sqrt(x * x + 0.3),
        "softplus": ad.softplus,
        "neg": lambda x: -x,
        "div": lambda x: (x + 3.0) / (x * x + 1.0),
        "sigmoid": ad.sigmoid,
        "relu": lambda x: ad.relu(x) + ad.relu(-x + 0.2),
    }
    rng = np.random.default_rng(7)
    for name, fn in builders.items():
        t = ad.Tape(1)
        t.mark_output(fn(t.param(0)))
        for _ in range(4):
            x = rng.standard_normal(1) * 1.5
            assert ad.finite_difference_check(t, x, 1e-6) < 1e-7, name


def test_gradient_linearity_on_random_graph_pairs():
    rng = np.random.default_rng(3)

    def random_graph(seed):
        r = np.random.default_rng(seed)
        t = ad.Tape(4)
        p = t.params()
        e = ad.tanh(p[0] * r.normal() + p[1]) * p[2] + ad.softplus(p[3] * r.normal())
        return t, e

    for seed in range(6):
        ta, ea = random_graph(seed)
        tb, eb = random_graph(seed + 100)
        ta.mark_output(ea)
        tb.mark_output(eb)
        # the sum graph, rebuilt on one tape
        ts = ad.Tape(4)
        ps = ts.params()
        ra, rb = np.random.default_rng(seed), np.random.default_rng(seed + 100)
        sa = ad.tanh(ps[0] * ra.normal() + ps[1]) * ps[2] + ad.softplus(ps[3] * ra.normal())
        sb = ad.tanh(ps[0] * rb.normal() + ps[1]) * ps[2] + ad.softplus(ps[3] * rb.normal())
        ts.mark_output(sa + sb)
        x = rng.standard_normal(4)
        ga = ad.tape_gradient(ta, x)
        gb = ad.tape_gradient(tb, x)
        gs = ad.tape_gradient(ts, x)
        np.testing.assert_allclose(gs, ga + gb, rtol=1e-12, atol=1e-14)


def test_reverse_pass_does_not_mutate_forward_cache():
    t = two_layer_tanh_loss()
    x = np.random.default_rng(5).standard_normal(t.n_params)
    t.forward(x)
    cached = list(t._values)
    t.forward_backward(x)
    assert t._values == cached


def test_graph_reuse_with_fresh_bindings():
    t = quadratic_tape()
    assert ad.tape_forward(t, [2.0]) == 4.0
    assert ad.tape_forward(t, [5.0]) == 25.0


def test_data_slots_rebind():
    t = ad.Tape(1, n_data=2)
    x = t.param(0)
    t.mark_output(x * t.data(0) + t.data(1))
    assert t.forward(np.array([2.0]), data=[3.0, 1.0]) == 7.0
    assert t.forward(np.array([2.0]), data=[1.0, -1.0]) == 1.0


def test_overflow_reports_node_index():
    t = ad.Tape(1)
    x = t.param(0)
    e = ad.exp(x)
    t.mark_output(e * 2.0)
    with pytest.raises(EvaluationError) as err:
        ad.tape_forward(t, [1000.0])
    assert err.value.node_index == e.i


def test_nonfinite_params_rejected():
    with pytest.raises(ConfigurationError):
        ad.tape_forward(quadratic_tape(), [float("nan")])


def test_topological_validation():
    t = ad.Tape(1)
    x = t.param(0)
    t.ops.append(ad.ADD)
    t.args.append((x.i, 5))  # forward reference
    t.aux.append(None)
    with pytest.raises(ConfigurationError):
        t.validate()


def test_node_introspection():
    t = quadratic_tape()
    ad.tape_forward(t, [3.0])
    node = t.node(t.output_index)
    assert node.op_kind == "mul"
    assert node.value == 9.0


def test_dot_matches_sum_of_products():
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal(6), rng.standard_normal(6)
    t = ad.Tape(6)
    p = t.params()
    t.mark_output(ad.dot(p, b))
    v, g = t.forward_backward(a)
    assert v == pytest.approx(float(a @ b))
    np.testing.assert_allclose(g, b)


def test_logsumexp_stable_and_exact():
    t = ad.Tape(3)
    p = t.params()
    t.mark_output(ad.logsumexp(p))
    x = np.array([800.0, 799.0, -500.0])
    from scipy.special import logsumexp, softmax
    assert ad.tape_forward(t, x) == pytest.approx(logsumexp(x))
    np.testing.assert_allclose(ad.tape_gradient(t, x), softmax(x), atol=1e-12)
