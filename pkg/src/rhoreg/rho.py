"""The rho-estimation core: psi, the test statistic T, the criterion
upsilon, the iterative search, and the deviation-bound report.

For two candidate regression functions theta, theta' the statistic

    T(X, theta, theta') = sum_i psi( sqrt( q_theta'(x_i) / q_theta(x_i) ) )

with psi(x) = (x - 1) / (x + 1) aggregates pairwise density-ratio evidence;
positive values indicate theta' fits better.  Since psi(sqrt(r)) =
tanh(log(r) / 4), every term is evaluated as tanh of a quarter log-density
difference, which is numerically stable, exactly antisymmetric under
swapping the arguments, and maps the ratio conventions 0/0 -> psi(1) = 0 and
a/0 -> psi(+inf) = 1 onto the +-inf log-density cases.

The criterion upsilon(X, theta) = sup_theta' T(X, theta, theta') is
approximated by CMA-ES over the model's search box; the probe set always
contains theta' = theta, so the approximation is nonnegative.  The search
loop starts from an initializer and repeatedly replaces the iterate by the
best challenger until upsilon falls below an early-stop level (default 1.0)
or an iteration cap is reached.  Fits whose final criterion is at most
kappa / 25 with kappa = 280 sqrt(2) + 74 carry a certificate flag: they
near-minimize upsilon, whose infimum is nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cmaes import OptimizerSettings, cmaes_maximize
from .dataset import Dataset
from .errors import DomainError
from .families import NaturalExpFamily
from .models import RegressionModel, eval_natural_batch

__all__ = [
    "KAPPA",
    "RhoConfig",
    "RhoFitResult",
    "TheoreticalBound",
    "psi",
    "t_statistic",
    "upsilon",
    "UpsilonResult",
    "rho_estimate",
    "theoretical_bound",
]

KAPPA = 280.0 * math.sqrt(2.0) + 74.0


def psi(x):
    """(x - 1) / (x + 1) on [0, +inf], with psi(+inf) = 1.

    Nondecreasing, odd under inversion (psi(1/x) = -psi(x)), and valued in
    [-1, 1].
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise DomainError(f"psi is defined on [0, +inf], got {x!r}")
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(arr), 1.0, (arr - 1.0) / (arr + 1.0))
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass
class RhoConfig:
    """Search knobs for the rho fit.

    ``kappa`` is the certificate constant 280 sqrt(2) + 74 (kappa / 25 lies
    in (18, 18.8)); ``early_stop`` the criterion level ending the iteration
    (must not exceed kappa / 25, otherwise the certificate would be
    vacuous); ``max_iters_L`` the iteration cap; ``sup_search`` the CMA-ES
    settings used for every inner maximization; ``seed`` the master seed
    used when no generator is supplied.
    """

    kappa: float = KAPPA
    early_stop: float = 1.0
    max_iters_L: int = 100
    sup_search: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 0

    def __post_init__(self):
        if not (18.0 < self.kappa / 25.0 < 18.8):
            raise DomainError(
                f"kappa/25 must lie in (18, 18.8), got {self.kappa / 25.0}"
            )
        if self.early_stop > self.kappa / 25.0:
            raise DomainError(
                "early_stop must not exceed kappa/25, otherwise the "
                "certificate is vacuous"
            )


@dataclass
class TraceEntry:
    upsilon: float
    best_t: float
    evals: int


@dataclass
class RhoFitResult:
    """Outcome of one rho fit.

    ``eta_hat`` is the last iterate (the estimator), ``upsilon_hat`` its
    approximate criterion value, ``certificate`` whether that value is at
    most kappa / 25.  The iterate with the smallest criterion seen along the
    way is kept as ``min_upsilon_eta`` for diagnostics; the last iterate is
    the reported estimator.
    """

    eta_hat: np.ndarray
    upsilon_hat: float
    iterations: int
    certificate: bool
    trace: list[TraceEntry]
    min_upsilon: float
    min_upsilon_eta: np.ndarray
    budget_exceeded: bool

    def to_dict(self) -> dict:
        return {
            "eta_hat": [float(v) for v in self.eta_hat],
            "upsilon_hat": self.upsilon_hat,
            "iterations": self.iterations,
            "certificate": self.certificate,
            "min_upsilon": self.min_upsilon,
            "min_upsilon_eta": [float(v) for v in self.min_upsilon_eta],
            "budget_exceeded": self.budget_exceeded,
            "trace": [
                {"upsilon": t.upsilon, "best_t": t.best_t, "evals": t.evals}
                for t in self.trace
            ],
        }


class TCriterion:
    """Evaluator of eta' -> T(X, eta, eta') for a fixed base point eta.

    Precomputes the base log-densities once; each batch of m challengers
    costs one (m, n) model evaluation plus elementwise work.
    """

    def __init__(
        self,
        data: Dataset,
        fam: NaturalExpFamily,
        model: RegressionModel,
        eta: np.ndarray,
    ):
        self.data = data
        self.fam = fam
        self.model = model
        self.W = data.W
        self.S = np.asarray(fam.suff_stat(data.y), dtype=float)
        theta = np.asarray(
            eval_natural_batch(model, np.asarray(eta, float)[None, :], self.W)[0]
        )
        self._validate(theta)
        self.theta_base = theta
        self.A_base = np.asarray(fam.log_partition(theta), dtype=float)

    def _validate(self, theta: np.ndarray) -> None:
        lo_ok = theta > self.fam.interval_I.lo if self.fam.interval_I.lo_open \
            else theta >= self.fam.interval_I.lo
        hi_ok = theta < self.fam.interval_I.hi if self.fam.interval_I.hi_open \
            else theta <= self.fam.interval_I.hi
        bad = ~(lo_ok & hi_ok)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise DomainError(
                f"natural parameter {theta[idx]!r} outside {self.fam.interval_I} "
                f"at data index {idx}"
            )

    def t_batch(self, etas: np.ndarray) -> np.ndarray:
        """T values for a stack of challenger parameters, shape (m,)."""
        etas = np.atleast_2d(np.asarray(etas, dtype=float))
        theta_p = eval_natural_batch(self.model, etas, self.W)
        A_p = self.fam.log_partition(theta_p)
        # log q' - log q; the base A is finite, A' may be +inf off-domain.
        delta = self.S * (theta_p - self.theta_base) - (A_p - self.A_base)
        terms = np.tanh(0.25 * delta)
        # a/0 = +inf and 0/0 = 1 conventions: an infinite log-density gap
        # saturates tanh at +-1 already; NaN can only arise from inf - inf,
        # i.e. both densities vanish, where the convention gives psi(1) = 0.
        if np.isnan(terms).any():
            terms = np.nan_to_num(terms, nan=0.0)
        return terms.sum(axis=1)

    def t_single(self, eta_p: np.ndarray) -> float:
        return float(self.t_batch(np.asarray(eta_p, float)[None, :])[0])


def t_statistic(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    eta,
    eta_prime,
) -> float:
    """T(X, eta, eta'): antisymmetric in its parameter pair, |T| <= n."""
    crit = TCriterion(data, fam, model, np.asarray(eta, dtype=float))
    etas = np.asarray(eta_prime, dtype=float)[None, :]
    theta_p = eval_natural_batch(model, etas, data.W)[0]
    crit._validate(theta_p)
    return crit.t_single(np.asarray(eta_prime, dtype=float))


@dataclass
class UpsilonResult:
    value: float
    argmax_eta: np.ndarray
    evals: int
    budget_exceeded: bool


def upsilon(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    eta,
    cfg: RhoConfig,
    rng: np.random.Generator,
    extra_starts: tuple = (),
) -> UpsilonResult:
    """Approximate sup over eta' of T(X, eta, eta') and its argmax.

    CMA-ES maximizes over the model's search box, starting from ``eta`` with
    restarts from ``extra_starts`` (typically the scenario initializer).
    The probe set always contains eta' = eta, where T vanishes identically,
    so the returned value is >= 0.  When the evaluation budget runs out the
    best-so-far point is returned with ``budget_exceeded`` set; that is not
    an error.
    """
    eta = np.asarray(eta, dtype=float)
    crit = TCriterion(data, fam, model, eta)
    res = cmaes_maximize(
        crit.t_batch,
        eta,
        model.search_box,
        cfg.sup_search,
        rng,
        vectorized=True,
        extra_starts=extra_starts,
    )
    return UpsilonResult(
        value=float(res.f),
        argmax_eta=res.x,
        evals=res.evals,
        budget_exceeded=not res.converged,
    )


def rho_estimate(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    eta0,
    cfg: RhoConfig,
    rng: np.random.Generator | None = None,
) -> RhoFitResult:
    """Iterative search for a rho-estimator.

    Starting from ``eta0``, repeat: evaluate upsilon at the current iterate
    (one CMA-ES maximization, which also yields the maximizer); while the
    value exceeds ``cfg.early_stop`` and the iteration count allows, move to
    the maximizer.  The run is deterministic given (data, cfg.seed) when no
    generator is passed.
    """
    eta0 = np.asarray(eta0, dtype=float)
    box = model.search_box
    if np.any(eta0 < box[:, 0]) or np.any(eta0 > box[:, 1]):
        raise DomainError("eta0 lies outside the model search box")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    eta_hat = eta0
    iterations = 0
    trace: list[TraceEntry] = []
    min_ups = math.inf
    min_eta = eta0
    budget_exceeded = False

    while True:
        res = upsilon(data, fam, model, eta_hat, cfg, rng, extra_starts=(eta0,))
        trace.append(TraceEntry(upsilon=res.value, best_t=res.value, evals=res.evals))
        budget_exceeded = budget_exceeded or res.budget_exceeded
        if res.value < min_ups:
            min_ups = res.value
            min_eta = eta_hat
        if res.value <= cfg.early_stop or iterations > cfg.max_iters_L:
            final_value = res.value
            break
        iterations += 1
        eta_hat = res.argmax_eta

    return RhoFitResult(
        eta_hat=eta_hat,
        upsilon_hat=final_value,
        iterations=iterations,
        certificate=final_value <= cfg.kappa / 25.0,
        trace=trace,
        min_upsilon=min_ups,
        min_upsilon_eta=min_eta,
        budget_exceeded=budget_exceeded,
    )


@dataclass
class TheoreticalBound:
    """Inputs of the non-asymptotic deviation bound (model-exact part).

    The constants are fixed numerical values; V is the VC bound of the
    model class, n the sample size and xi the exponent of the confidence
    level 1 - e^-xi.
    """

    V: int
    n: int
    xi: float
    c1: float = 150.0
    c2: float = 1.1e6
    c3: float = 5014.0

    def __post_init__(self):
        if self.V < 1:
            raise DomainError(f"V must be >= 1, got {self.V}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not self.xi > 0:
            raise DomainError(f"xi must be positive, got {self.xi}")


def theoretical_bound(tb: TheoreticalBound) -> float:
    """c2 * V * (9.11 + log+(n/V)) + c3 * (1.5 + xi).

    This is the estimation part of the high-probability bound on the squared
    Hellinger loss; the misspecification part c1 * h^2(truth, model) is
    added by callers that know the approximation error.
    """
    log_plus = max(0.0, math.log(tb.n / tb.V))
    return tb.c2 * tb.V * (9.11 + log_plus) + tb.c3 * (1.5 + tb.xi)
