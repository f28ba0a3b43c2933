"""Benchmark scenario definitions and dataset generators.

Nine scenario ids are registered:

* ``bernoulli_ws`` / ``poisson_ws`` / ``exponential_ws`` -- well-specified
  draws from the model at a fixed true parameter;
* ``bernoulli_separable`` -- the two outer covariate cubes only, which makes
  the labels linearly separable with high probability;
* ``bernoulli_outlier`` / ``poisson_outlier`` / ``exponential_outlier`` --
  a well-specified draw plus one aberrant appended pair;
* ``poisson_contam`` / ``exponential_contam`` -- each observation is drawn
  from the model with probability 0.95 and from a contaminating distribution
  with probability 0.05;
* ``holder_poisson`` -- scalar covariate on [0, 1], Poisson response with a
  smooth (Holder) mean profile, fitted by piecewise constants.

All generators draw through separately spawned child streams of one seed
(w draws, responses, contamination mask, contaminant responses), so the
clean rows of a corrupted dataset coincide with the corresponding rows of
the clean generator run under the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, FLAG_CLEAN, FLAG_CONTAMINATED, FLAG_OUTLIER
from .errors import DomainError
from .families import NaturalExpFamily, get_family, mean_parametrization
from .mathutils import sigmoid
from .models import (
    RegressionModel,
    eval_natural,
    holder_partition_dim,
    linear_model,
    log1pexp_model,
    loglog1pexp_model,
    piecewise_constant_model,
)

__all__ = [
    "CovariateMixture",
    "OutlierSpec",
    "ContaminationSpec",
    "ContaminantAtW",
    "Scenario",
    "SCENARIO_IDS",
    "build_scenario",
    "gen_well_specified",
    "inject_outlier",
    "gen_contaminated",
    "generate",
]

CONTAMINATION_RATE = 0.05


@dataclass(frozen=True)
class CovariateMixture:
    """Mixture of product-uniform distributions given by boxes and weights."""

    boxes: np.ndarray  # (k, d, 2)
    weights: np.ndarray  # (k,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"mixture weights must sum to 1, got {w.sum()}")

    @property
    def d(self) -> int:
        return self.boxes.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        u = rng.random((n, self.d))
        lo = self.boxes[comp, :, 0]
        hi = self.boxes[comp, :, 1]
        return lo + u * (hi - lo)


@dataclass(frozen=True)
class OutlierSpec:
    w_out: np.ndarray
    y_out: float


@dataclass(frozen=True)
class ContaminationSpec:
    rate: float
    kind: str  # "poisson_shifted_bernoulli" | "uniform_50_60"


@dataclass(frozen=True)
class ContaminantAtW:
    """Conditional contaminating distribution R(.|w).

    Either a finite discrete law (``support``/``probs``) or a uniform law on
    [lo, hi].
    """

    kind: str  # "discrete" | "uniform"
    support: np.ndarray | None = None
    probs: np.ndarray | None = None
    lo: float = 0.0
    hi: float = 0.0


@dataclass(frozen=True)
class Scenario:
    id: str
    family: NaturalExpFamily
    model: RegressionModel
    eta_star: np.ndarray | None
    pw_spec: CovariateMixture
    corruption: OutlierSpec | ContaminationSpec | None
    n: int
    replications: int
    quadrature_n: int
    holder_alpha: float = 1.0
    holder_M: float = 1.0

    def theta_star(self, W: np.ndarray) -> np.ndarray:
        """True natural parameter at each covariate row."""
        if self.id == "holder_poisson":
            return np.log(self.gamma_star(W))
        return np.asarray(eval_natural(self.model, self.eta_star, W), dtype=float)

    def gamma_star(self, W: np.ndarray) -> np.ndarray:
        """Holder-smooth Poisson mean profile (holder_poisson only).

        1 + (M/2) * |sin(2 pi w) / (2 pi)|^alpha: the scaling keeps the
        Holder(alpha) constant at M/2 <= M.  A fixture, not a quoted value.
        """
        if self.id != "holder_poisson":
            raise DomainError(f"scenario '{self.id}' has no mean profile")
        x = np.asarray(W, dtype=float).reshape(-1)
        a, M = self.holder_alpha, self.holder_M
        return 1.0 + 0.5 * M * np.abs(np.sin(2.0 * math.pi * x) / (2.0 * math.pi)) ** a

    def contaminant_at(self, w: np.ndarray) -> ContaminantAtW:
        if not isinstance(self.corruption, ContaminationSpec):
            raise DomainError(f"scenario '{self.id}' has no contamination")
        if self.corruption.kind == "poisson_shifted_bernoulli":
            p = float(sigmoid(w[0] - w[1] - w[3] + w[4]))
            return ContaminantAtW(
                kind="discrete",
                support=np.array([80.0, 81.0]),
                probs=np.array([1.0 - p, p]),
            )
        return ContaminantAtW(kind="uniform", lo=50.0, hi=60.0)

    def contaminant_sample(self, W: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if not isinstance(self.corruption, ContaminationSpec):
            raise DomainError(f"scenario '{self.id}' has no contamination")
        if self.corruption.kind == "poisson_shifted_bernoulli":
            p = sigmoid(W[:, 0] - W[:, 1] - W[:, 3] + W[:, 4])
            return 80.0 + (rng.random(len(W)) < p).astype(float)
        return rng.uniform(50.0, 60.0, size=len(W))


def _single_box(bounds: list[tuple[float, float]]) -> CovariateMixture:
    return CovariateMixture(
        boxes=np.array([bounds], dtype=float), weights=np.array([1.0])
    )


def _bernoulli_boxes(a: float = 0.25, b: float = 2.0) -> np.ndarray:
    cube = lambda lo, hi: [(lo, hi)] * 5  # noqa: E731 - local shorthand
    return np.array(
        [cube(-a, a), cube(b - 0.25, b + 0.25), cube(-b - 0.25, -b + 0.25)],
        dtype=float,
    )


_BERNOULLI_ETA = np.ones(6)
_POISSON_ETA = np.array([0.7, 3.0, 4.0, 10.0, 2.0, 5.0])
_EXPONENTIAL_ETA = np.array([0.07, 3.0, 4.0, 6.0, 2.0, 1.0])

_POISSON_PW = _single_box([(0.2, 0.25), (0.2, 0.25), (0.2, 0.3), (0.1, 0.2), (0.1, 0.2)])
_EXPONENTIAL_PW = _single_box([(0.0, 0.01)] * 3 + [(0.0, 0.1)] * 2)

_OUTLIERS = {
    "bernoulli_outlier": OutlierSpec(1000.0 * np.ones(5), -1.0),
    "poisson_outlier": OutlierSpec(0.1 * np.ones(5), 200.0),
    "exponential_outlier": OutlierSpec(
        5e-3 * np.array([1.0, 1.0, 1.0, 10.0, 10.0]), 1000.0
    ),
}

SCENARIO_IDS = (
    "bernoulli_ws",
    "bernoulli_separable",
    "poisson_ws",
    "exponential_ws",
    "bernoulli_outlier",
    "poisson_outlier",
    "exponential_outlier",
    "poisson_contam",
    "exponential_contam",
    "holder_poisson",
)


def build_scenario(
    scenario_id: str,
    n: int | None = None,
    replications: int = 500,
    quadrature_n: int = 10_000,
    holder_alpha: float = 1.0,
    holder_M: float = 1.0,
) -> Scenario:
    """Construct a registered scenario, optionally overriding the sample size."""
    if scenario_id not in SCENARIO_IDS:
        raise DomainError(
            f"unknown scenario '{scenario_id}'; expected one of {SCENARIO_IDS}"
        )
    n = 500 if n is None else int(n)
    base = scenario_id.split("_")[0]

    if base == "bernoulli":
        fam = get_family("bernoulli")
        model = linear_model()
        eta = _BERNOULLI_ETA
        boxes = _bernoulli_boxes()
        if scenario_id == "bernoulli_separable":
            pw = CovariateMixture(boxes=boxes[1:], weights=np.array([0.5, 0.5]))
        else:
            pw = CovariateMixture(boxes=boxes, weights=np.full(3, 1.0 / 3.0))
    elif scenario_id == "holder_poisson":
        fam = get_family("poisson")
        D = holder_partition_dim(holder_alpha, holder_M, n, 1.0, "poisson_mean")
        model = piecewise_constant_model(
            D, lo=0.02, hi=2.0 * (1.0 + holder_M),
            parametrization=mean_parametrization(fam),
        )
        return Scenario(
            id=scenario_id,
            family=fam,
            model=model,
            eta_star=None,
            pw_spec=_single_box([(0.0, 1.0)]),
            corruption=None,
            n=n,
            replications=replications,
            quadrature_n=quadrature_n,
            holder_alpha=holder_alpha,
            holder_M=holder_M,
        )
    elif base == "poisson":
        fam = get_family("poisson")
        model = loglog1pexp_model()
        eta = _POISSON_ETA
        pw = _POISSON_PW
    elif base == "exponential":
        fam = get_family("exponential")
        model = log1pexp_model()
        eta = _EXPONENTIAL_ETA
        pw = _EXPONENTIAL_PW
    else:  # pragma: no cover
        raise DomainError(scenario_id)

    corruption: OutlierSpec | ContaminationSpec | None = None
    if scenario_id in _OUTLIERS:
        corruption = _OUTLIERS[scenario_id]
    elif scenario_id.endswith("_contam"):
        kind = "poisson_shifted_bernoulli" if base == "poisson" else "uniform_50_60"
        corruption = ContaminationSpec(rate=CONTAMINATION_RATE, kind=kind)

    return Scenario(
        id=scenario_id,
        family=fam,
        model=model,
        eta_star=eta,
        pw_spec=pw,
        corruption=corruption,
        n=n,
        replications=replications,
        quadrature_n=quadrature_n,
    )


def _streams(seed) -> list[np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(4)]


def gen_well_specified(s: Scenario, seed) -> Dataset:
    """Draw W_i ~ P_W then Y_i ~ Q_{theta*(W_i)}; all rows flagged clean."""
    rng_w, rng_y, _, _ = _streams(seed)
    W = s.pw_spec.sample(s.n, rng_w)
    theta = s.theta_star(W)
    y = s.family.sample(theta, rng_y)
    return Dataset(W, y, np.zeros(s.n, dtype=int))


def inject_outlier(ds: Dataset, s: Scenario) -> Dataset:
    """Append the scenario's single aberrant pair and flag its index."""
    if not isinstance(s.corruption, OutlierSpec):
        raise DomainError(f"scenario '{s.id}' has no outlier specification")
    W = np.vstack([ds.W, s.corruption.w_out[None, :]])
    y = np.append(ds.y, s.corruption.y_out)
    flags = np.append(ds.flags, FLAG_OUTLIER)
    return Dataset(W, y, flags)


def gen_contaminated(s: Scenario, seed) -> Dataset:
    """Mixture draw: each row is clean with probability 1 - rate, else from R.

    The clean responses reuse the same stream as ``gen_well_specified``, so
    dropping the flagged rows recovers the corresponding clean rows.
    """
    if not isinstance(s.corruption, ContaminationSpec):
        raise DomainError(f"scenario '{s.id}' has no contamination specification")
    rng_w, rng_y, rng_mask, rng_r = _streams(seed)
    W = s.pw_spec.sample(s.n, rng_w)
    theta = s.theta_star(W)
    y = s.family.sample(theta, rng_y)
    mask = rng_mask.random(s.n) < s.corruption.rate
    if np.any(mask):
        y = y.copy()
        y[mask] = s.contaminant_sample(W[mask], rng_r)
    flags = np.where(mask, FLAG_CONTAMINATED, FLAG_CLEAN)
    return Dataset(W, y, flags)


def generate(s: Scenario, seed) -> Dataset:
    """Dispatch to the generator matching the scenario's corruption."""
    if isinstance(s.corruption, ContaminationSpec):
        return gen_contaminated(s, seed)
    ds = gen_well_specified(s, seed)
    if isinstance(s.corruption, OutlierSpec):
        ds = inject_outlier(ds, s)
    return ds
