"""Multivariate subexponential claims, ruin-set geometry and ruin probability asymptotics."""

from .asymptotics import (
    SafetyLoading,
    fI_scalar_survival,
    h_curve_mc,
    h_curve_quadrature,
    h_one_dim,
    h_value_quadrature,
    mrv_asymptote,
    mrv_descriptor,
    mrv_ruin_constant,
    safety_loading,
    theta_normalizer,
)
from .claims import (
    AngularMeasure,
    DeterministicClaims,
    DyadicSimplex,
    IndependentMarginals,
    OscillatingModel,
    PolarModel,
    crnonlin_sum_survival,
    crnonlin_survival,
    model_from_descriptor,
)
from .diagnostics import (
    RatioVerdict,
    TailCurve,
    convolution_ratio_mc,
    convolution_ratio_numeric,
    dominated_variation_test,
    empirical_FA,
    kesten_check,
    long_tail_test,
    random_sum_ratio,
    translation_test,
)
from .laws import Exponential, Gamma, Lognormal, Pareto, PointMass, Weibull, integrated_tail, law_from_descriptor
from .ruinsets import (
    BidAskError,
    BidAskSpec,
    HyperplaneFamily,
    LinearMapSpec,
    RuinSetError,
    SolvencyRuinSet,
    compile_bidask,
    family_from_descriptor,
    pullback,
)
from .simulator import RiskConfig, config_from_descriptor, ruin_vs_asymptote, simulate_ruin, simulate_ruin_curve
from .streams import RngStream

__version__ = "0.1.0"
