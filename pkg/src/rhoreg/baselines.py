"""Competitor estimators and initializers: MLE, median criterion, hinge.

The MLE maximizes the exponential-family log-likelihood
``sum_i S(y_i) theta_eta(w_i) - A(theta_eta(w_i))`` by damped Newton with a
backtracking line search; for the model links used here the likelihood is
concave in eta.  On separable data the likelihood increases along rays and
no maximizer exists; that outcome is reported through a flag, not an
exception.

The median-based estimator minimizes ``sum_i |y_i - m(theta_eta(w_i))|``
where m is the (approximate) median of the fitted distribution; the
criterion is not convex and is handed to CMA-ES.

The hinge initializer is the penalized classification criterion
``10 sum_i (1 - s_i theta(w_i))_+ + ||eta_1:||^2 / 2`` over affine theta
(s_i the +-1 label), solved by projected-free subgradient descent; it seeds
the Bernoulli rho fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cmaes import OptimizerSettings, cmaes_maximize
from .dataset import Dataset
from .errors import DomainError, UnsupportedFamilyError
from .families import NaturalExpFamily, median_approx
from .mathutils import inv_softplus, sigmoid, softplus
from .models import RegressionModel, eval_theta_batch

__all__ = [
    "MleResult",
    "mle",
    "median_estimate",
    "hinge_init",
    "scenario_initializer",
]

MLE_DIVERGENCE_NORM = 1e3
MLE_TOL_PER_OBS = 1e-8


@dataclass
class MleResult:
    """MLE outcome; ``eta_hat`` is None when the maximizer does not exist."""

    eta_hat: np.ndarray | None
    exists: bool
    log_lik: float
    gradient_norm: float
    newton_iters: int

    def to_dict(self) -> dict:
        return {
            "eta_hat": None if self.eta_hat is None else [float(v) for v in self.eta_hat],
            "exists": self.exists,
            "log_lik": self.log_lik,
            "gradient_norm": self.gradient_norm,
            "newton_iters": self.newton_iters,
        }


def _design(model: RegressionModel, data: Dataset) -> np.ndarray:
    if model.kind in ("linear", "loglog1pexp", "log1pexp"):
        return np.hstack([np.ones((data.n, 1)), data.W])
    if model.kind == "piecewise_constant" and model.parametrization is None:
        idx = np.minimum((data.W[:, 0] * model.dim_p).astype(int), model.dim_p - 1)
        X = np.zeros((data.n, model.dim_p))
        X[np.arange(data.n), idx] = 1.0
        return X
    raise DomainError(f"MLE is not implemented for model kind '{model.kind}'")


def _link(model: RegressionModel, z: np.ndarray):
    """theta, dtheta/dz, d2theta/dz2 for the model's link."""
    if model.kind in ("linear", "piecewise_constant"):
        one = np.ones_like(z)
        return z, one, np.zeros_like(z)
    if model.kind == "log1pexp":
        s = sigmoid(z)
        return softplus(z), s, s * (1.0 - s)
    if model.kind == "loglog1pexp":
        sp = np.maximum(softplus(z), 1e-300)
        s = sigmoid(z)
        g1 = s / sp
        g2 = (s * (1.0 - s) * sp - s * s) / (sp * sp)
        theta = np.where(z < -30.0, z, np.log(sp))
        return theta, g1, g2
    raise DomainError(f"unknown link for model kind '{model.kind}'")


def mle(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    max_iter: int = 500,
    ridge: float = 1e-8,
) -> MleResult:
    """Damped-Newton maximum likelihood fit.

    Convergence when the gradient norm falls below 1e-8 * n.  Nonexistence is
    declared when the parameter norm exceeds 1e3 while the likelihood is
    still increasing (separable-data divergence).
    """
    X = _design(model, data)
    n, p = X.shape
    S = np.asarray(fam.suff_stat(data.y), dtype=float)

    # theta = 0 is outside I for the exponential family; start inside.
    eta = np.zeros(p)
    if model.kind == "piecewise_constant" and not fam.interval_I.contains(0.0):
        eta += 1.0

    def loglik(e):
        theta, _, _ = _link(model, X @ e)
        with np.errstate(invalid="ignore"):
            val = np.sum(S * theta - fam.log_partition(theta))
        return -np.inf if np.isnan(val) else float(val)

    ll = loglik(eta)
    tol = MLE_TOL_PER_OBS * n
    grad_norm = np.inf
    it = 0
    while it < max_iter:
        it += 1
        z = X @ eta
        theta, g1, g2 = _link(model, z)
        resid = S - fam.dA(theta)
        grad = X.T @ (resid * g1)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            return MleResult(eta, True, ll, grad_norm, it - 1)
        d2 = -fam.d2A(theta) * g1 * g1 + resid * g2
        H_neg = X.T @ (X * (-d2)[:, None]) + ridge * np.eye(p)
        try:
            step = np.linalg.solve(H_neg, grad)
        except np.linalg.LinAlgError:
            step = grad
        # Near-singular curvature (saturated links) makes raw Newton steps
        # astronomically long; cap the length so divergence is detected by a
        # genuinely increasing likelihood along the walk, not by one jump.
        cap = max(10.0, 2.0 * float(np.linalg.norm(eta)))
        step_norm = float(np.linalg.norm(step))
        if step_norm > cap:
            step = step * (cap / step_norm)
        # Backtrack until the likelihood does not decrease; ties are accepted
        # so that eps-level steps near the optimum still let the gradient
        # criterion terminate the loop.
        t = 1.0
        accepted = False
        increased = False
        while t > 1e-14:
            cand = eta + t * step
            ll_cand = loglik(cand)
            if ll_cand >= ll:
                increased = ll_cand > ll
                eta, ll = cand, ll_cand
                accepted = True
                break
            t *= 0.5
        if np.linalg.norm(eta) > MLE_DIVERGENCE_NORM and increased:
            return MleResult(None, False, ll, grad_norm, it)
        if not accepted:
            break
    return MleResult(None, False, ll, grad_norm, it)


def _median_criterion_batch(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    etas: np.ndarray,
) -> np.ndarray:
    theta = eval_theta_batch(model, np.atleast_2d(etas), data.W)
    if model.parametrization is not None:
        theta = model.parametrization.u(theta)
    if fam.name == "poisson":
        m = np.exp(theta) + 1.0 / 3.0 - 0.02 * np.exp(-theta)
    elif fam.name == "exponential":
        m = np.log(2.0) / theta
    else:  # pragma: no cover - guarded by median_estimate
        raise UnsupportedFamilyError(fam.name)
    return np.abs(data.y[None, :] - m).sum(axis=1)


def _median_warm_start(
    data: Dataset, fam: NaturalExpFamily, model: RegressionModel
) -> np.ndarray:
    box = model.search_box
    center = 0.5 * (box[:, 0] + box[:, 1])
    if model.kind not in ("loglog1pexp", "log1pexp"):
        return center
    # Least squares on the inverted link applied to a floored response.
    if model.kind == "loglog1pexp":
        target = inv_softplus(np.maximum(data.y, 0.05))
    else:
        target = inv_softplus(np.maximum(np.log(2.0) / np.maximum(data.y, 0.01), 1e-6))
    X = np.hstack([np.ones((data.n, 1)), data.W])
    eta, *_ = np.linalg.lstsq(X, target, rcond=None)
    return np.clip(eta, box[:, 0], box[:, 1])


def median_estimate(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    settings: OptimizerSettings,
    rng: np.random.Generator,
) -> np.ndarray:
    """Minimizer of the absolute-deviation-from-median criterion.

    Defined for the Poisson and exponential families.  CMA-ES minimizes the
    criterion starting from a least-squares warm start on the transformed
    responses; the warm start only seeds the search.
    """
    if fam.name not in ("poisson", "exponential"):
        raise UnsupportedFamilyError(
            f"median-based estimation is not supported for family '{fam.name}'"
        )
    median_approx(fam, 1.0)  # fail fast if the family lacks the m function
    warm = _median_warm_start(data, fam, model)

    def objective(H):
        return -_median_criterion_batch(data, fam, model, H)

    res = cmaes_maximize(
        objective, warm, model.search_box, settings, rng, vectorized=True
    )
    return res.x


def hinge_init(
    data: Dataset,
    max_iter: int = 6000,
    tol: float = 1e-6,
) -> np.ndarray:
    """Penalized-hinge initializer for Bernoulli regression.

    Minimizes 10 * sum_i (1 - s_i (eta_0 + <eta_1:, w_i>))_+ +
    ||eta_1:||^2 / 2 by subgradient descent with a 1/sqrt(t) step, stopping
    once the best objective stops improving by more than `tol`.  Labels
    s_i = sign(2 y_i - 1) clamped to {-1, +1}, so corrupted responses
    outside {0, 1} are still usable.
    """
    y = np.asarray(data.y, dtype=float)
    s = np.where(2.0 * y - 1.0 >= 0.0, 1.0, -1.0)
    X = np.hstack([np.ones((data.n, 1)), data.W])
    sX = s[:, None] * X
    p = X.shape[1]

    def objective(e):
        margins = 1.0 - sX @ e
        pen = 0.5 * float(e[1:] @ e[1:])
        return 10.0 * float(np.maximum(margins, 0.0).sum()) + pen

    eta = np.zeros(p)
    best = objective(eta)
    best_eta = eta.copy()
    last_improve = 0
    for t in range(1, max_iter + 1):
        margins = 1.0 - sX @ eta
        active = margins > 0.0
        g = -10.0 * sX[active].sum(axis=0)
        g[1:] += eta[1:]
        norm = np.linalg.norm(g)
        if norm == 0.0:
            break
        eta = eta - (1.0 / np.sqrt(t)) * g / norm
        val = objective(eta)
        if val < best - tol:
            best, best_eta = val, eta.copy()
            last_improve = t
        elif t - last_improve > 500:
            break
    return best_eta


def scenario_initializer(
    data: Dataset,
    fam: NaturalExpFamily,
    model: RegressionModel,
    settings: OptimizerSettings,
    rng: np.random.Generator,
) -> np.ndarray:
    """Start point for the rho search.

    Bernoulli: the hinge minimizer.  Poisson/exponential links: the
    median-based estimate.  Piecewise mean models: per-cell response means.
    Anything else: the center of the search box.
    """
    box = model.search_box
    if fam.name == "bernoulli" and model.kind == "linear":
        return np.clip(hinge_init(data), box[:, 0], box[:, 1])
    if model.kind in ("loglog1pexp", "log1pexp") and fam.name in (
        "poisson",
        "exponential",
    ):
        return median_estimate(data, fam, model, settings, rng)
    if model.kind == "piecewise_constant" and model.parametrization is not None:
        idx = np.minimum((data.W[:, 0] * model.dim_p).astype(int), model.dim_p - 1)
        means = np.array(
            [
                data.y[idx == j].mean() if np.any(idx == j) else 1.0
                for j in range(model.dim_p)
            ]
        )
        return np.clip(means, box[:, 0], box[:, 1])
    if model.kind == "piecewise_constant" and fam.name in ("poisson", "exponential"):
        return median_estimate(data, fam, model, settings, rng)
    return 0.5 * (box[:, 0] + box[:, 1])
