from .data import Dataset
from .networks import NetworkSpec, mlp_forward
from .heads import (
    LikelihoodHead,
    UnitGaussianHead,
    HeteroscedasticGaussianHead,
    CategoricalHead,
    BinomialHead,
    MdnPoissonHead,
    log_likelihood,
)
from .priors import IsotropicGaussianPrior, UniformPrior, log_prior
from .targets import (
    TargetDensity,
    GaussianTarget,
    BananaTarget,
    FunnelTarget,
    ModelTarget,
    unnorm_log_posterior,
)
from .fitting import (
    PointEstimate,
    PredictiveSamples,
    train_point_estimate,
    posterior_predictive,
)

__all__ = [
    "Dataset",
    "NetworkSpec",
    "mlp_forward",
    "LikelihoodHead",
    "UnitGaussianHead",
    "HeteroscedasticGaussianHead",
    "CategoricalHead",
    "BinomialHead",
    "MdnPoissonHead",
    "log_likelihood",
    "IsotropicGaussianPrior",
    "UniformPrior",
    "log_prior",
    "TargetDensity",
    "GaussianTarget",
    "BananaTarget",
    "FunnelTarget",
    "ModelTarget",
    "unnorm_log_posterior",
    "PointEstimate",
    "PredictiveSamples",
    "train_point_estimate",
    "posterior_predictive",
]
