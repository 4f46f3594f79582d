import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import logsumexp

from deskbayes import autodiff as ad
from deskbayes.errors import ConfigurationError
from deskbayes.models import (
    BananaTarget,
    BinomialHead,
    CategoricalHead,
    Dataset,
    FunnelTarget,
    GaussianTarget,
    HeteroscedasticGaussianHead,
    IsotropicGaussianPrior,
    MdnPoissonHead,
    ModelTarget,
    NetworkSpec,
    UniformPrior,
    UnitGaussianHead,
    log_likelihood,
    log_prior,
    mlp_forward,
    unnorm_log_posterior,
)
from deskbayes.models.heads import pad_catalog
from deskbayes.models.networks import mlp_forward_exprs


# ---------------------------------------------------------------- networks

def test_identity_network_passes_input_through():
    spec = NetworkSpec((2, 2), activation="identity")
    # weights = identity, biases = 0
    params = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
    out = mlp_forward(spec, params, np.array([[1.0, 2.0]]))
    np.testing.assert_allclose(out, [[1.0, 2.0]])


def test_zero_network_outputs_zero():
    spec = NetworkSpec((3, 4, 2), activation="tanh")
    out = mlp_forward(spec, np.zeros(spec.n_params), np.array([[0.3, -2.0, 1.0]]))
    np.testing.assert_allclose(out, 0.0)


def test_small_tanh_net_matches_hand_rolled_oracle():
    spec = NetworkSpec((1, 2, 1), activation="tanh")
    rng = np.random.default_rng(8)
    params = rng.standard_normal(spec.n_params)
    x = 0.5
    # oracle: unpack by the documented packing order and do the arithmetic
    w1 = params[0:2]
    b1 = params[2:4]
    w2 = params[4:6]
    b2 = params[6]
    hidden = np.tanh(w1 * x + b1)
    expected = float(w2 @ hidden + b2)
    got = mlp_forward(spec, params, np.array([[x]]))[0, 0]
    assert got == pytest.approx(expected, rel=1e-12)


def test_numpy_and_graph_forwards_agree():
    spec = NetworkSpec((2, 3, 2), activation="tanh")
    rng = np.random.default_rng(3)
    params = rng.standard_normal(spec.n_params)
    x = rng.standard_normal((4, 2))
    dense = mlp_forward(spec, params, x)
    tape = ad.Tape(spec.n_params)
    rows = mlp_forward_exprs(spec, tape.params(), [list(r) for r in x])
    tape.mark_output(ad.add_n([e for row in rows for e in row]))
    total = ad.tape_forward(tape, params)
    assert total == pytest.approx(dense.sum(), rel=1e-12)


def test_network_validation():
    with pytest.raises(ConfigurationError):
        NetworkSpec((1, 0, 1))
    with pytest.raises(ConfigurationError):
        NetworkSpec((2,))
    with pytest.raises(ConfigurationError):
        NetworkSpec((1, 2, 1), activation="sin")
    with pytest.raises(ConfigurationError):
        NetworkSpec((1, 3), head=BinomialHead(5))
    spec = NetworkSpec((2, 2), activation="identity")
    with pytest.raises(ConfigurationError):
        mlp_forward(spec, np.zeros(3), np.zeros((1, 2)))
    with pytest.raises(ConfigurationError):
        mlp_forward(spec, np.zeros(spec.n_params), np.zeros((1, 3)))


# ------------------------------------------------------------------- heads

def test_binomial_head_single_success():
    head = BinomialHead(2)
    # logit 0 -> rate 0.5; Bin(1; 2, 0.5) = 0.5
    assert log_likelihood(head, [[0.0]], [[1.0]]) == pytest.approx(math.log(0.5))


def test_unit_gaussian_zero_residual():
    head = UnitGaussianHead(3)
    y = np.array([[0.1, -0.2, 0.5], [1.0, 2.0, 3.0]])
    got = log_likelihood(head, y, y)
    assert got == pytest.approx(-2 * 1.5 * math.log(2 * math.pi))


def test_categorical_uniform_logits():
    head = CategoricalHead(3)
    assert log_likelihood(head, [[0.0, 0.0, 0.0]], [[2.0]]) == pytest.approx(math.log(1 / 3))


def test_mdn_poisson_empty_catalogue_closed_form():
    head = MdnPoissonHead(n_components=1, mass_threshold=2.0, voxel_volume=3.0)
    raw = np.array([[0.4, 1.3, 0.2]])  # weight is softmaxed to 1 for K=1
    sigma = float(np.logaddexp(0.0, 0.2))
    mu = 1.3
    u = (math.log(2.0) - mu - sigma ** 2) / math.sqrt(2 * sigma ** 2)
    expected = -3.0 * 0.5 * math.exp(sigma ** 2 / 2) * math.erfc(u)
    got = log_likelihood(head, raw, [[0.0]])
    assert got == pytest.approx(expected, rel=1e-12)


def test_mdn_completion_term_matches_quadrature():
    # mass-weighted mixture intensity integrated above threshold
    head = MdnPoissonHead(n_components=2, mass_threshold=1.5, voxel_volume=2.0)
    raw = np.array([0.3, -0.7, 0.8, 1.9, 0.5, -0.1])
    log_w, mus, sigmas = head.component_params(raw)

    def intensity(x):
        dens = 0.0
        for lw, mu, s in zip(log_w, mus, sigmas):
            dens += math.exp(lw) / math.sqrt(2 * math.pi * s * s) * \
                math.exp(-(x - mu) ** 2 / (2 * s * s)) * math.exp(x - mu)
        return dens

    quad, _ = integrate.quad(intensity, math.log(1.5), 40.0, limit=200)
    closed = head.expected_count(raw) / head.voxel_volume
    assert abs(closed - quad) / quad < 1e-6


def test_mdn_halo_term_plus_completion():
    head = MdnPoissonHead(n_components=1, mass_threshold=1.0, voxel_volume=1.0)
    raw = np.array([[0.0, 0.5, 0.3]])
    masses = [[2.0, 5.0, 0.0]]  # third entry is padding
    sigma = float(np.logaddexp(0.0, 0.3))
    mu = 0.5
    halo = sum(-0.5 * math.log(2 * math.pi * sigma ** 2)
               - (math.log(m) - mu) ** 2 / (2 * sigma ** 2) for m in (2.0, 5.0))
    u = (math.log(1.0) - mu - sigma ** 2) / math.sqrt(2 * sigma ** 2)
    completion = 0.5 * math.exp(sigma ** 2 / 2) * math.erfc(u)
    assert log_likelihood(head, raw, masses) == pytest.approx(halo - completion)
    flipped = MdnPoissonHead(1, 1.0, 1.0, flip_sign=True)
    assert log_likelihood(flipped, raw, masses) == pytest.approx(completion - halo)


def test_mdn_expected_bin_counts_sum_to_expected_count():
    head = MdnPoissonHead(n_components=2, mass_threshold=1.5, voxel_volume=2.0)
    rng = np.random.default_rng(0)
    r = rng.standard_normal((3, 6))
    edges = np.linspace(math.log(1.5), 30.0, 200)
    total = head.expected_bin_counts(r, edges).sum()
    assert total == pytest.approx(sum(head.expected_count(row) for row in r), rel=1e-6)


def test_heteroscedastic_head_matches_dense_gaussian():
    head = HeteroscedasticGaussianHead(2)
    r_row = np.array([0.5, -1.0, 0.3, 0.8, -0.2])
    y_row = np.array([1.0, 0.5])
    chol = head.cholesky(r_row)
    cov = chol @ chol.T
    from scipy.stats import multivariate_normal
    expected = multivariate_normal(mean=r_row[:2], cov=cov).logpdf(y_row)
    assert log_likelihood(head, [r_row], [y_row]) == pytest.approx(expected, rel=1e-10)


def test_head_additivity_over_rows():
    heads_and_data = [
        (UnitGaussianHead(2), np.random.default_rng(0).standard_normal((5, 2)),
         np.random.default_rng(1).standard_normal((5, 2))),
        (BinomialHead(4), np.random.default_rng(2).standard_normal((5, 1)),
         np.random.default_rng(3).integers(0, 5, (5, 1)).astype(float)),
        (CategoricalHead(3), np.random.default_rng(4).standard_normal((5, 3)),
         np.random.default_rng(5).integers(0, 3, (5, 1)).astype(float)),
        (HeteroscedasticGaussianHead(2),
         np.random.default_rng(6).standard_normal((5, 5)),
         np.random.default_rng(7).standard_normal((5, 2))),
        (MdnPoissonHead(2, 1.0, 1.0),
         np.random.default_rng(8).standard_normal((5, 6)),
         np.abs(np.random.default_rng(9).standard_normal((5, 3))) + 1.5),
    ]
    for head, r, y in heads_and_data:
        total = log_likelihood(head, r, y)
        parts = sum(log_likelihood(head, r[i:i + 1], y[i:i + 1]) for i in range(5))
        assert total == pytest.approx(parts, rel=1e-12), head.kind


def test_head_gradients_match_finite_differences():
    # reverse-mode through every head at random parameter draws
    rng = np.random.default_rng(42)
    cases = [
        (UnitGaussianHead(2), 2, rng.standard_normal((3, 2))),
        (HeteroscedasticGaussianHead(2), 5, rng.standard_normal((3, 2))),
        (CategoricalHead(3), 3, rng.integers(0, 3, (3, 1)).astype(float)),
        (BinomialHead(6), 1, rng.integers(0, 7, (3, 1)).astype(float)),
        (MdnPoissonHead(2, 1.2, 0.7), 6, np.abs(rng.standard_normal((3, 2))) + 1.3),
    ]
    for head, n_cols, targets in cases:
        spec = NetworkSpec((2, 4, n_cols), activation="tanh", head=head)
        data = Dataset(rng.standard_normal((3, 2)), targets)
        target = ModelTarget(spec, IsotropicGaussianPrior(1.0), data)
        tape = target._tape(None, True)
        for _ in range(3):
            w = 0.5 * rng.standard_normal(spec.n_params)
            assert ad.finite_difference_check(tape, w, 1e-5) < 1e-5, head.kind


# ------------------------------------------------------------------ priors

def test_isotropic_prior_at_zero():
    prior = IsotropicGaussianPrior(1.0)
    assert log_prior(prior, np.zeros(2)) == pytest.approx(-math.log(2 * math.pi))


def test_uniform_prior_inside_and_outside():
    prior = UniformPrior(-1.0, 1.0)
    assert log_prior(prior, np.array([0.2, -0.5, 0.9])) == pytest.approx(-3 * math.log(2))
    assert log_prior(prior, np.array([0.2, 1.5, 0.0])) == -math.inf


def test_isotropic_prior_scale_two():
    prior = IsotropicGaussianPrior(2.0)
    got = log_prior(prior, np.array([2.0, 0.0]))
    assert got == pytest.approx(-0.5 - 2 * math.log(2 * math.sqrt(2 * math.pi)))


# ----------------------------------------------------------------- targets

def test_standard_normal_target():
    target = GaussianTarget(np.zeros(1), np.eye(1))
    value, grad = unnorm_log_posterior(target, np.zeros(1))
    assert value == pytest.approx(-0.5 * math.log(2 * math.pi))
    np.testing.assert_allclose(grad, 0.0)


def test_banana_b_zero_is_gaussian():
    target = BananaTarget(a=1.0, b=0.0)
    lam = np.array([0.7, -1.2])
    value, grad = unnorm_log_posterior(target, lam)
    assert value == pytest.approx(-0.5 * float(lam @ lam))
    np.testing.assert_allclose(grad, -lam)


def test_funnel_gradient_matches_fd():
    target = FunnelTarget(dim=3)
    rng = np.random.default_rng(1)
    for _ in range(5):
        lam = rng.standard_normal(3)
        _, grad = target.log_density_and_grad(lam)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            fd = (target.log_density(lam + e) - target.log_density(lam - e)) / 2e-6
            assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_analytic_exprs_match_numpy_paths():
    targets = [
        GaussianTarget([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]]),
        BananaTarget(1.2, 0.8),
        FunnelTarget(dim=2),
    ]
    rng = np.random.default_rng(5)
    for target in targets:
        tape = ad.Tape(target.dim)
        tape.mark_output(target.log_density_exprs(tape.params()))
        for _ in range(4):
            lam = rng.standard_normal(target.dim)
            assert tape.forward(lam) == pytest.approx(target.log_density(lam), rel=1e-10)
            _, g_np = target.log_density_and_grad(lam)
            np.testing.assert_allclose(tape.forward_backward(lam)[1], g_np,
                                       rtol=1e-8, atol=1e-10)


def _gaussian_mean_model(y_values, sigma_p=1.0):
    head = UnitGaussianHead(1)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    data = Dataset(np.zeros((len(y_values), 1)), np.array(y_values)[:, None])
    return ModelTarget(spec, IsotropicGaussianPrior(sigma_p), data)


def test_model_target_value_and_gradient_vs_fd():
    target = _gaussian_mean_model([0.3, 1.9, -0.4])
    tape = target._tape(None, True)
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.standard_normal(2)
        assert ad.finite_difference_check(tape, w, 1e-5) < 1e-8


def test_model_target_row_order_invariance():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((6, 1))
    y = rng.standard_normal((6, 1))
    spec = NetworkSpec((1, 3, 1), activation="tanh", head=UnitGaussianHead(1))
    w = rng.standard_normal(spec.n_params)
    t1 = ModelTarget(spec, IsotropicGaussianPrior(1.0), Dataset(x, y))
    perm = rng.permutation(6)
    t2 = ModelTarget(spec, IsotropicGaussianPrior(1.0), Dataset(x[perm], y[perm]))
    assert t1.log_density(w) == pytest.approx(t2.log_density(w), rel=1e-12)


def test_model_target_minibatch_unbiased_and_rebinds():
    target = _gaussian_mean_model([0.3, 1.9, -0.4, 0.8])
    w = np.array([0.1, 0.4])
    full = target.log_density(w, include_prior=False)
    parts = [target.log_density(w, minibatch=np.array([i]), include_prior=False)
             for i in range(4)]
    # each scaled singleton estimate is n * that row; their mean is the total
    assert np.mean(parts) == pytest.approx(full, rel=1e-12)


def test_uniform_prior_veto_returns_neg_inf():
    head = UnitGaussianHead(1)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    data = Dataset(np.zeros((2, 1)), np.ones((2, 1)))
    target = ModelTarget(spec, UniformPrior(-1.0, 1.0), data)
    assert target.log_density(np.array([0.0, 2.0])) == -math.inf


# ----------------------------------------------------------------- fitting

def test_mle_recovers_sample_mean():
    from deskbayes.models import train_point_estimate
    y = [2.9, 3.3, 3.6, 3.0]
    target = _gaussian_mean_model(y)
    est = train_point_estimate(target, mode="mle", step_size=0.05,
                               n_iterations=2000, init=np.zeros(2))
    assert est.params[1] == pytest.approx(np.mean(y), abs=1e-4)


def test_map_conjugate_posterior_mode():
    from deskbayes.models import train_point_estimate
    target = _gaussian_mean_model([2.0], sigma_p=1.0)
    est = train_point_estimate(target, mode="map", step_size=0.05,
                               n_iterations=2000, init=np.zeros(2))
    assert est.params[1] == pytest.approx(1.0, abs=1e-4)


def test_zero_iteration_budget_returns_init():
    from deskbayes.models import train_point_estimate
    target = _gaussian_mean_model([2.0])
    init = np.array([0.3, -0.7])
    est = train_point_estimate(target, mode="map", n_iterations=0, init=init)
    np.testing.assert_array_equal(est.params, init)


def test_map_with_uniform_prior_matches_mle_iterates():
    head = UnitGaussianHead(1)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    data = Dataset(np.zeros((3, 1)), np.array([[0.5], [1.5], [1.0]]))
    target = ModelTarget(spec, UniformPrior(-10.0, 10.0), data)
    from deskbayes.models import train_point_estimate
    init = np.array([0.05, -0.02])
    for iters in (1, 5, 50):
        mle = train_point_estimate(target, "mle", 0.05, iters, init=init)
        mape = train_point_estimate(target, "map", 0.05, iters, init=init)
        np.testing.assert_array_equal(mle.params, mape.params)


def test_optimizer_divergence_carries_last_iterate():
    from deskbayes.errors import OptimizerDivergence
    from deskbayes.models import train_point_estimate
    target = _gaussian_mean_model([2.0])
    with pytest.raises(OptimizerDivergence) as err:
        train_point_estimate(target, "map", step_size=1e8, n_iterations=50,
                             init=np.array([1e3, 1e3]))
    assert np.all(np.isfinite(err.value.last_params))


def test_posterior_predictive_single_draw_unit_gaussian():
    from deskbayes.models import posterior_predictive
    head = UnitGaussianHead(1)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    w = np.array([0.0, 0.7])
    rng = np.random.default_rng(0)
    pred = posterior_predictive([w], head, spec, np.zeros((1, 1)),
                                n_y_draws=20000, rng=rng)
    assert pred.mean[0, 0] == pytest.approx(0.7)
    assert pred.draws[0].mean() == pytest.approx(0.7, abs=0.02)


def test_posterior_predictive_symmetric_mixture():
    from deskbayes.models import posterior_predictive
    head = UnitGaussianHead(1)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    draws = [np.array([0.0, -1.0]), np.array([0.0, 1.0])]
    pred = posterior_predictive(draws, head, spec, np.zeros((1, 1)), rng=0)
    assert pred.mean[0, 0] == pytest.approx(0.0)


def test_posterior_predictive_binomial_rates_average():
    from deskbayes.models import posterior_predictive
    head = BinomialHead(10)
    spec = NetworkSpec((1, 1), activation="identity", head=head)
    logit = lambda p: math.log(p / (1 - p))
    draws = [np.array([0.0, logit(0.2)]), np.array([0.0, logit(0.4)])]
    pred = posterior_predictive(draws, head, spec, np.zeros((1, 1)), rng=1)
    assert pred.mean[0, 0] == pytest.approx(0.3)


def test_posterior_predictive_empty_draws_error():
    from deskbayes.models import posterior_predictive
    with pytest.raises(ConfigurationError):
        posterior_predictive([], UnitGaussianHead(1),
                             NetworkSpec((1, 1), activation="identity"),
                             np.zeros((1, 1)))


def test_pad_catalog_round_trip():
    cat = [np.array([2.0, 3.0]), np.array([]), np.array([5.0])]
    padded = pad_catalog(cat)
    assert padded.shape == (3, 2)
    np.testing.assert_allclose(padded[1], 0.0)
