from .chain import Chain, KernelConfig, StepSizeAdapter, adapt_step_size, run_chain
from .hmc import PhaseState, StepInfo, hamiltonian, hmc_step, leapfrog
from .mass import MassMatrix
from .metropolis import MHResult, mh_step
from .nuts import nuts_step, u_turn_scalar
from .qnhmc import InverseHessianState, bfgs_inverse_update, qnhmc_step
from .rmhmc import ConstantMetric, GradientOuterProductMetric, rmhmc_step
from .sghmc import sghmc_step
from .kernels import (
    KERNELS,
    HMCKernel,
    NUTSKernel,
    QNHMCKernel,
    RandomWalkKernel,
    RMHMCKernel,
    SGHMCKernel,
)
from .estimators import (
    BaseSampler,
    HamiltonianMC,
    MetropolisHastings,
    NoUTurnSampler,
    QuasiNewtonHMC,
    RiemannianHMC,
    StochasticGradientHMC,
    chain_seeds,
)

__all__ = [
    "Chain", "KernelConfig", "StepSizeAdapter", "adapt_step_size", "run_chain",
    "PhaseState", "StepInfo", "hamiltonian", "hmc_step", "leapfrog",
    "MassMatrix", "MHResult", "mh_step", "nuts_step", "u_turn_scalar",
    "InverseHessianState", "bfgs_inverse_update", "qnhmc_step",
    "ConstantMetric", "GradientOuterProductMetric", "rmhmc_step", "sghmc_step",
    "KERNELS", "HMCKernel", "NUTSKernel", "QNHMCKernel", "RandomWalkKernel",
    "RMHMCKernel", "SGHMCKernel",
    "BaseSampler", "HamiltonianMC", "MetropolisHastings", "NoUTurnSampler",
    "QuasiNewtonHMC", "RiemannianHMC", "StochasticGradientHMC", "chain_seeds",
]
