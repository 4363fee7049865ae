"""Class-separability bounds for cross-entropy-trained classifiers.

Subpackages: :mod:`sepbound.numerics` (quadrature, special functions, RNG),
:mod:`sepbound.bounds` (the closed-form and integral bounds),
:mod:`sepbound.oracle` (Monte-Carlo verification of every analytic
quantity), :mod:`sepbound.empirical` (feature-embedding pipeline),
:mod:`sepbound.synth` (synthetic dataset generators), and
:mod:`sepbound.cli` (the command-line front end).
"""

from .bounds import (
    BoundResult,
    CcdfCurve,
    ClassConfig,
    LossModel,
    b,
    b_A,
    b_c,
    ba_sweep,
    bc_sweep,
    ccdf_sweep,
    default_kappa,
    expected_accuracy,
    h1,
    h2,
    h3,
    inter_ccdf_lower,
    intra_ccdf,
    mu_from_loss,
)
from .empirical import (
    BetaFit,
    FeatureDataset,
    KappaEstimate,
    PairSeparability,
    accuracy_report,
    estimate_kappa,
    fit_beta,
    histogram_export,
    load_dataset,
    mean_cross_entropy,
    pair_separability,
)
from .numerics import (
    McEstimate,
    QuadratureConfig,
    QuadratureError,
    chi2_cdf_scaled,
    integrate_expweighted,
    integrate_expweighted_2d,
    log_expm1_stable,
    log_gamma,
    rng_exponential,
)
from .oracle import mc_b_A, mc_chi2_tails, mc_inter_ccdf, mc_intra_ccdf, mc_p_acc
from .synth import SynthSpec, generate, write_dataset

__version__ = "0.1.0"
