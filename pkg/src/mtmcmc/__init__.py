"""Population-based Bayesian inference with manifold Langevin transition kernels.

Implements the BASIS/TMCMC sampler with three proposal schemes (random walk,
simplified manifold, position dependent), a boundary-aware correction of the
metric-derived proposal covariance, model-evidence estimation, forward ODE
sensitivities for derivative-based metrics, and benchmark diagnostics.
"""

from mtmcmc.manifold_metric import (
    CorrectionConfig,
    CorrectionStatus,
    CorrectedCovariance,
    MetricKind,
    correct_pseudo_covariance,
)
from mtmcmc.target_model import BoxPrior, DataSet, ModelEvaluation, TargetModel, make_model
from mtmcmc.proposal_kernels import KernelConfig, KernelKind, Proposal, propose
from mtmcmc.tmcmc_engine import RunConfig, RunResult, StageStats, run_tmcmc

__all__ = [
    "BoxPrior",
    "CorrectedCovariance",
    "CorrectionConfig",
    "CorrectionStatus",
    "DataSet",
    "KernelConfig",
    "KernelKind",
    "MetricKind",
    "ModelEvaluation",
    "Proposal",
    "RunConfig",
    "RunResult",
    "StageStats",
    "TargetModel",
    "correct_pseudo_covariance",
    "make_model",
    "propose",
    "run_tmcmc",
]

__version__ = "0.1.0"
