"""Natural one-parameter exponential families and their Hellinger geometry.

A family is the set of distributions with density ``q_theta(y) =
exp(S(y) * theta - A(theta))`` against a fixed base measure, indexed by the
natural parameter ``theta`` in an interval ``I``.  Four families are built
in:

========================  =========  ==================  =====================
name                      S(y)       A(theta)            base measure
========================  =========  ==================  =====================
``bernoulli``             y          log(1 + e^theta)    counting on {0, 1}
``poisson``               y          e^theta - 1         Poisson(1) on N
``exponential``           -y         -log(theta)         Lebesgue on R+
``gaussian_fixed_sigma``  y/sigma^2  theta^2/(2sigma^2)  N(0, sigma^2)
========================  =========  ==================  =====================

The sufficient statistic is extended to the whole real line (e.g. S(-1) = -1
for the Bernoulli family) so that corrupted observations outside the nominal
support still produce finite log-density differences.  Density ratios are
never formed by division: every consumer works with ``log_density``
differences.

Squared Hellinger distances between members of one family have the closed
form ``1 - exp(A(mid) - (A(theta) + A(theta')) / 2)`` with ``mid`` the
midpoint, which is what :meth:`NaturalExpFamily.hellinger_sq` evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .errors import DomainError, UnsupportedFamilyError
from .mathutils import TINY_POSITIVE, sigmoid, softplus

__all__ = [
    "Interval",
    "NaturalExpFamily",
    "GeneralParametrization",
    "bernoulli",
    "poisson",
    "exponential",
    "gaussian_fixed_sigma",
    "get_family",
    "to_natural",
    "variance_stabilizer",
    "mean_parametrization",
    "median_approx",
]


@dataclass(frozen=True)
class Interval:
    """An interval of the extended real line with open/closed endpoint flags."""

    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)):
            return False
        lo_ok = (x > self.lo) if self.lo_open else (x >= self.lo)
        hi_ok = (x < self.hi) if self.hi_open else (x <= self.hi)
        return bool(np.all(lo_ok & hi_ok))

    def __str__(self) -> str:
        lo = "(" if self.lo_open else "["
        hi = ")" if self.hi_open else "]"
        return f"{lo}{self.lo}, {self.hi}{hi}"


REAL_LINE = Interval(-math.inf, math.inf)
POSITIVE_HALF_LINE = Interval(0.0, math.inf)


# --------------------------------------------------------------------------
# Per-family ingredients.  Module-level functions (not lambdas) keep family
# objects picklable for the multiprocessing replication pool.
# --------------------------------------------------------------------------

def _identity(y):
    return np.asarray(y, dtype=float)


def _negate(y):
    return -np.asarray(y, dtype=float)


def _scale(y, factor):
    return np.asarray(y, dtype=float) * factor


def _bernoulli_A(theta):
    return softplus(theta)


def _bernoulli_dA(theta):
    return sigmoid(theta)


def _bernoulli_d2A(theta):
    s = sigmoid(theta)
    return s * (1.0 - s)


def _poisson_A(theta):
    return np.expm1(theta)


def _poisson_dA(theta):
    return np.exp(theta)


def _exponential_A(theta):
    # Total extension: +inf outside the domain, so line searches that step
    # out of I see an infinitely bad value instead of a NaN.
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(theta > 0.0, -np.log(np.maximum(theta, TINY_POSITIVE)), np.inf)
    return out


def _exponential_dA(theta):
    return -1.0 / np.asarray(theta, dtype=float)


def _exponential_d2A(theta):
    theta = np.asarray(theta, dtype=float)
    return 1.0 / (theta * theta)


def _gaussian_A(theta, sigma):
    theta = np.asarray(theta, dtype=float)
    return theta * theta / (2.0 * sigma**2)


def _gaussian_dA(theta, sigma):
    return np.asarray(theta, dtype=float) / sigma**2


def _gaussian_d2A(theta, sigma):
    theta = np.asarray(theta, dtype=float)
    return np.full_like(theta, 1.0 / sigma**2)


@dataclass(frozen=True)
class NaturalExpFamily:
    """A natural exponential family with closed-form log-partition.

    Attributes:
        name: one of ``bernoulli``, ``poisson``, ``exponential``,
            ``gaussian_fixed_sigma``.
        interval_I: domain of the natural parameter.
        suff_stat: the statistic S, extended to all real observations.
        log_partition: A on I (returns ``+inf`` outside, never NaN).
        dA / d2A: first and second derivatives of A on the interior of I.
        base_measure: human-readable descriptor of the dominating measure.
        sigma: noise level, Gaussian family only.
    """

    name: str
    interval_I: Interval
    suff_stat: Callable
    log_partition: Callable
    dA: Callable
    d2A: Callable
    base_measure: str
    sigma: float | None = None

    def _check_theta(self, theta, label: str = "theta") -> None:
        if not self.interval_I.contains(theta):
            raise DomainError(
                f"{label}={theta!r} outside the natural domain {self.interval_I} "
                f"of family '{self.name}'"
            )

    def log_density(self, theta, y):
        """log q_theta(y) = S(y) * theta - A(theta) against the base measure."""
        self._check_theta(theta)
        return self.suff_stat(y) * theta - self.log_partition(theta)

    def hellinger_sq(self, theta, theta_prime) -> float:
        """Closed-form squared Hellinger distance between two members.

        Symmetric, exactly zero at theta == theta_prime, and in [0, 1].
        """
        self._check_theta(theta)
        self._check_theta(theta_prime, "theta_prime")
        mid = 0.5 * (theta + theta_prime)
        self._check_theta(mid, "(theta + theta_prime)/2")
        expo = self.log_partition(mid) - 0.5 * (
            self.log_partition(theta) + self.log_partition(theta_prime)
        )
        return float(np.clip(1.0 - np.exp(expo), 0.0, 1.0))

    def mean(self, theta):
        """Mean of S(Y) under Q_theta, i.e. A'(theta)."""
        return self.dA(theta)

    def variance(self, theta):
        """Variance of S(Y) under Q_theta, i.e. A''(theta)."""
        return self.d2A(theta)

    def sample(self, theta, rng: np.random.Generator, size=None):
        """Draw Y ~ Q_theta.  `theta` may be an array of per-draw parameters."""
        self._check_theta(theta)
        theta = np.asarray(theta, dtype=float)
        if size is None and theta.ndim > 0:
            size = theta.shape
        if self.name == "bernoulli":
            return (rng.random(size) < sigmoid(theta)).astype(float)
        if self.name == "poisson":
            return rng.poisson(np.exp(theta), size).astype(float)
        if self.name == "exponential":
            return rng.exponential(1.0 / theta, size)
        if self.name == "gaussian_fixed_sigma":
            return rng.normal(theta, self.sigma, size)
        raise UnsupportedFamilyError(f"no sampler for family '{self.name}'")

    def log_prob(self, theta, y):
        """Log density against the conventional reference measure.

        Counting measure for bernoulli/poisson, Lebesgue for
        exponential/gaussian.  (``log_density`` is taken against the family's
        own base measure; this variant is the one quoted in diagnostics and
        used by mixture-distance computations.)
        """
        self._check_theta(theta)
        y = np.asarray(y, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.name == "bernoulli":
            return y * theta - softplus(theta)
        if self.name == "poisson":
            from scipy.special import gammaln

            return y * theta - np.exp(theta) - gammaln(y + 1.0)
        if self.name == "exponential":
            with np.errstate(divide="ignore"):
                out = np.where(y >= 0.0, np.log(theta) - theta * y, -np.inf)
            return out
        if self.name == "gaussian_fixed_sigma":
            s2 = self.sigma**2
            return -0.5 * np.log(2.0 * math.pi * s2) - (y - theta) ** 2 / (2.0 * s2)
        raise UnsupportedFamilyError(f"no reference density for '{self.name}'")


def bernoulli() -> NaturalExpFamily:
    return NaturalExpFamily(
        name="bernoulli",
        interval_I=REAL_LINE,
        suff_stat=_identity,
        log_partition=_bernoulli_A,
        dA=_bernoulli_dA,
        d2A=_bernoulli_d2A,
        base_measure="counting measure on {0, 1}",
    )


def poisson() -> NaturalExpFamily:
    return NaturalExpFamily(
        name="poisson",
        interval_I=REAL_LINE,
        suff_stat=_identity,
        log_partition=_poisson_A,
        dA=_poisson_dA,
        d2A=_poisson_dA,
        base_measure="Poisson(1) on N",
    )


def exponential() -> NaturalExpFamily:
    return NaturalExpFamily(
        name="exponential",
        interval_I=POSITIVE_HALF_LINE,
        suff_stat=_negate,
        log_partition=_exponential_A,
        dA=_exponential_dA,
        d2A=_exponential_d2A,
        base_measure="Lebesgue on R+",
    )


def gaussian_fixed_sigma(sigma: float = 1.0) -> NaturalExpFamily:
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return NaturalExpFamily(
        name="gaussian_fixed_sigma",
        interval_I=REAL_LINE,
        suff_stat=partial(_scale, factor=1.0 / sigma**2),
        log_partition=partial(_gaussian_A, sigma=sigma),
        dA=partial(_gaussian_dA, sigma=sigma),
        d2A=partial(_gaussian_d2A, sigma=sigma),
        base_measure=f"N(0, {sigma**2:g})",
        sigma=sigma,
    )


_FAMILY_FACTORIES = {
    "bernoulli": bernoulli,
    "poisson": poisson,
    "exponential": exponential,
    "gaussian_fixed_sigma": gaussian_fixed_sigma,
}


def get_family(name: str, sigma: float = 1.0) -> NaturalExpFamily:
    """Resolve a family by its string identifier (as used in config files)."""
    try:
        factory = _FAMILY_FACTORIES[name]
    except KeyError:
        raise UnsupportedFamilyError(
            f"unknown family '{name}'; expected one of {sorted(_FAMILY_FACTORIES)}"
        ) from None
    if name == "gaussian_fixed_sigma":
        return factory(sigma)
    return factory()


# --------------------------------------------------------------------------
# Reparametrizations gamma = v(theta), carried as u = v^{-1}: J -> I.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralParametrization:
    """A strictly monotone change of variable u: J -> I for a family."""

    interval_J: Interval
    u: Callable
    u_inverse: Callable
    kind: str = "custom"


def to_natural(par: GeneralParametrization, gamma):
    """Map a general parameter gamma in J to the natural parameter u(gamma)."""
    if not par.interval_J.contains(gamma):
        raise DomainError(
            f"gamma={gamma!r} outside the parameter domain {par.interval_J}"
        )
    return par.u(gamma)


SQRT8 = math.sqrt(8.0)


def _gauss_vs_u(gamma, sigma):
    return np.asarray(gamma, dtype=float) * (sigma * SQRT8)


def _gauss_vs_v(theta, sigma):
    return np.asarray(theta, dtype=float) / (sigma * SQRT8)


def _bern_vs_u(gamma):
    # Inverse of v(theta) = arcsin(sqrt(sigmoid(theta))) / sqrt(2).
    return 2.0 * np.log(np.tan(math.sqrt(2.0) * np.asarray(gamma, dtype=float)))


def _bern_vs_v(theta):
    return np.arcsin(np.sqrt(sigmoid(theta))) / math.sqrt(2.0)


def _pois_vs_u(gamma):
    gamma = np.asarray(gamma, dtype=float)
    return np.log(2.0 * gamma * gamma)


def _pois_vs_v(theta):
    return np.exp(0.5 * np.asarray(theta, dtype=float)) / math.sqrt(2.0)


def _expo_vs_u(gamma):
    return np.exp(SQRT8 * np.asarray(gamma, dtype=float))


def _expo_vs_v(theta):
    return np.log(np.asarray(theta, dtype=float)) / SQRT8


def variance_stabilizer(fam: NaturalExpFamily) -> GeneralParametrization:
    """The closed-form parametrization with v'(theta) = sqrt(A''(theta) / 8).

    Under it, Hellinger distance is locally equivalent to the Euclidean
    distance between parameters with a unit Lipschitz constant.
    """
    if fam.name == "gaussian_fixed_sigma":
        return GeneralParametrization(
            interval_J=REAL_LINE,
            u=partial(_gauss_vs_u, sigma=fam.sigma),
            u_inverse=partial(_gauss_vs_v, sigma=fam.sigma),
            kind="variance_stabilizing",
        )
    if fam.name == "bernoulli":
        return GeneralParametrization(
            interval_J=Interval(0.0, math.pi / (2.0 * math.sqrt(2.0))),
            u=_bern_vs_u,
            u_inverse=_bern_vs_v,
            kind="variance_stabilizing",
        )
    if fam.name == "poisson":
        return GeneralParametrization(
            interval_J=POSITIVE_HALF_LINE,
            u=_pois_vs_u,
            u_inverse=_pois_vs_v,
            kind="variance_stabilizing",
        )
    if fam.name == "exponential":
        return GeneralParametrization(
            interval_J=REAL_LINE,
            u=_expo_vs_u,
            u_inverse=_expo_vs_v,
            kind="variance_stabilizing",
        )
    raise UnsupportedFamilyError(
        f"no variance-stabilizing map for family '{fam.name}'"
    )


def _bern_mean_u(gamma):
    gamma = np.asarray(gamma, dtype=float)
    return np.log(gamma) - np.log1p(-gamma)


def _pois_mean_u(gamma):
    return np.log(np.asarray(gamma, dtype=float))


def _pois_mean_v(theta):
    return np.exp(np.asarray(theta, dtype=float))


def _expo_mean_u(gamma):
    return 1.0 / np.asarray(gamma, dtype=float)


def mean_parametrization(fam: NaturalExpFamily) -> GeneralParametrization:
    """Parametrize the family by the mean of Y."""
    if fam.name == "bernoulli":
        return GeneralParametrization(
            interval_J=Interval(0.0, 1.0), u=_bern_mean_u, u_inverse=sigmoid,
            kind="mean",
        )
    if fam.name == "poisson":
        return GeneralParametrization(
            interval_J=POSITIVE_HALF_LINE, u=_pois_mean_u, u_inverse=_pois_mean_v,
            kind="mean",
        )
    if fam.name == "exponential":
        # mean 1/theta; the map is its own inverse
        return GeneralParametrization(
            interval_J=POSITIVE_HALF_LINE, u=_expo_mean_u, u_inverse=_expo_mean_u,
            kind="mean",
        )
    if fam.name == "gaussian_fixed_sigma":
        return GeneralParametrization(
            interval_J=REAL_LINE, u=_identity, u_inverse=_identity, kind="mean",
        )
    raise UnsupportedFamilyError(f"no mean parametrization for '{fam.name}'")


def median_approx(fam: NaturalExpFamily, theta):
    """Median (or the standard closed-form approximation of it) of Q_theta.

    Defined for the Poisson and exponential families only; the Bernoulli
    median barely depends on the parameter, so no median-based estimator
    exists there.
    """
    fam._check_theta(theta)
    theta = np.asarray(theta, dtype=float)
    if fam.name == "poisson":
        return np.exp(theta) + 1.0 / 3.0 - 0.02 * np.exp(-theta)
    if fam.name == "exponential":
        return math.log(2.0) / theta
    raise UnsupportedFamilyError(
        f"median-based estimation is not supported for family '{fam.name}'"
    )
