"""rhoreg: robust rho-estimation for regression in exponential families.

The package estimates a regression function theta(.) mapping covariates to
the natural parameter of a one-parameter exponential family, by the
test-statistic-based rho procedure, and benchmarks it against maximum
likelihood and median-based competitors under well-specified, outlier and
contamination regimes.
"""

from .cmaes import CmaResult, OptimizerSettings, cmaes_maximize
from .dataset import Dataset, load_csv, save_csv
from .errors import ConfigError, DomainError, RhoregError, UnsupportedFamilyError
from .families import (
    GeneralParametrization,
    Interval,
    NaturalExpFamily,
    bernoulli,
    exponential,
    gaussian_fixed_sigma,
    get_family,
    mean_parametrization,
    median_approx,
    poisson,
    to_natural,
    variance_stabilizer,
)
from .models import (
    RegressionModel,
    eval_natural,
    eval_theta,
    get_model,
    holder_partition_dim,
    linear_model,
    log1pexp_model,
    loglog1pexp_model,
    piecewise_constant_model,
    vc_dim_bound,
)
from .baselines import MleResult, hinge_init, median_estimate, mle, scenario_initializer
from .rho import (
    KAPPA,
    RhoConfig,
    RhoFitResult,
    TheoreticalBound,
    psi,
    rho_estimate,
    t_statistic,
    theoretical_bound,
    upsilon,
)
from .risk import (
    RiskReport,
    excess,
    hellinger_mixture_sq,
    holder_scenario_fit,
    mixture_approximation_error,
    risk_mc,
)
from .scenarios import (
    Scenario,
    SCENARIO_IDS,
    build_scenario,
    gen_contaminated,
    gen_well_specified,
    generate,
    inject_outlier,
)

__version__ = "0.1.0"
