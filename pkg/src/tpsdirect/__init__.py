"""Bayesian thin-plate spline smoothing with direct posterior sampling."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .penalty import (
    SpatialDesign,
    SplineCoefficients,
    SplinePenalty,
    TpsKernel,
    build_design,
    build_penalty,
    evaluate_surface,
    recover_coefficients,
    tps_kernel_eval,
)
from .sampler import (
    EtaPrior,
    JointDraws,
    PosteriorCache,
    build_cache,
    build_rou_envelope,
    draw_joint,
    log_marginal_eta,
    sample_delta0,
    sample_eta,
    sample_nu,
)
