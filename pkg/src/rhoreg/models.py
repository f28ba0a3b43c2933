"""Regression-function classes: eta -> theta(.) maps with VC-dimension bounds.

Four model kinds are provided.  The first three compose a 6-parameter affine
predictor ``z = eta_0 + <eta_1:, w>`` on R^5 with a fixed monotone link:

* ``linear``       theta(w) = z                      (Bernoulli regression)
* ``loglog1pexp``  theta(w) = log(log(1 + e^z))      (Poisson regression)
* ``log1pexp``     theta(w) = log(1 + e^z)           (exponential regression)

Composing a finite-dimensional linear space with a monotone map keeps the
class VC-subgraph, with dimension at most 7 for these three.

``piecewise_constant`` models live on [0, 1]: theta(w) = eta_j on the cell
[(j-1)/D, j/D) (last cell closed at 1), with VC bound D + 1.  They may carry
a :class:`~rhoreg.families.GeneralParametrization`, in which case ``eta``
holds general parameters (e.g. per-cell Poisson means) and callers map to the
natural scale through :func:`eval_natural`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .families import (
    GeneralParametrization,
    Interval,
    POSITIVE_HALF_LINE,
    REAL_LINE,
)
from .mathutils import TINY_POSITIVE, log_softplus, softplus

__all__ = [
    "RegressionModel",
    "linear_model",
    "loglog1pexp_model",
    "log1pexp_model",
    "piecewise_constant_model",
    "get_model",
    "eval_theta",
    "eval_theta_batch",
    "eval_natural",
    "eval_natural_batch",
    "holder_partition_dim",
    "vc_dim_bound",
]

LINK_KINDS = ("linear", "loglog1pexp", "log1pexp")


@dataclass(frozen=True)
class RegressionModel:
    """A parameter class Theta: finite vector eta -> function theta(.).

    Attributes:
        kind: one of ``linear``, ``loglog1pexp``, ``log1pexp``,
            ``piecewise_constant``.
        dim_p: number of free coordinates of eta.
        covariate_dim: dimension d of the covariate space.
        codomain: interval containing every theta(w) (the natural domain I,
            or J when a parametrization is attached).
        vc_bound: upper bound on the VC-subgraph dimension of the class.
        search_box: (dim_p, 2) per-coordinate bounds used by derivative-free
            optimizers.
        parametrization: optional general parametrization; present only for
            piecewise-constant models expressed in a non-natural parameter.
    """

    kind: str
    dim_p: int
    covariate_dim: int
    codomain: Interval
    vc_bound: int
    search_box: np.ndarray
    parametrization: GeneralParametrization | None = None


def _box(dim_p: int, lo: float, hi: float) -> np.ndarray:
    box = np.empty((dim_p, 2))
    box[:, 0] = lo
    box[:, 1] = hi
    box.setflags(write=False)
    return box


def linear_model(covariate_dim: int = 5, half_width: float = 20.0) -> RegressionModel:
    return RegressionModel(
        kind="linear",
        dim_p=covariate_dim + 1,
        covariate_dim=covariate_dim,
        codomain=REAL_LINE,
        vc_bound=covariate_dim + 2,
        search_box=_box(covariate_dim + 1, -half_width, half_width),
    )


def loglog1pexp_model(covariate_dim: int = 5, half_width: float = 20.0) -> RegressionModel:
    return RegressionModel(
        kind="loglog1pexp",
        dim_p=covariate_dim + 1,
        covariate_dim=covariate_dim,
        codomain=REAL_LINE,
        vc_bound=covariate_dim + 2,
        search_box=_box(covariate_dim + 1, -half_width, half_width),
    )


def log1pexp_model(covariate_dim: int = 5, half_width: float = 20.0) -> RegressionModel:
    return RegressionModel(
        kind="log1pexp",
        dim_p=covariate_dim + 1,
        covariate_dim=covariate_dim,
        codomain=POSITIVE_HALF_LINE,
        vc_bound=covariate_dim + 2,
        search_box=_box(covariate_dim + 1, -half_width, half_width),
    )


def piecewise_constant_model(
    n_cells: int,
    lo: float,
    hi: float,
    parametrization: GeneralParametrization | None = None,
) -> RegressionModel:
    """Piecewise-constant model on [0, 1] with `n_cells` equal cells.

    ``lo``/``hi`` bound the per-cell parameter values (they define both the
    codomain and the optimizer search box).
    """
    if n_cells < 1:
        raise DomainError(f"n_cells must be >= 1, got {n_cells}")
    return RegressionModel(
        kind="piecewise_constant",
        dim_p=n_cells,
        covariate_dim=1,
        codomain=Interval(lo, hi, lo_open=False, hi_open=False),
        vc_bound=n_cells + 1,
        search_box=_box(n_cells, lo, hi),
        parametrization=parametrization,
    )


_MODEL_FACTORIES = {
    "linear": linear_model,
    "loglog1pexp": loglog1pexp_model,
    "log1pexp": log1pexp_model,
    "piecewise_constant": piecewise_constant_model,
}


def get_model(kind: str, **kwargs) -> RegressionModel:
    """Resolve a model by its string identifier (as used in config files)."""
    try:
        factory = _MODEL_FACTORIES[kind]
    except KeyError:
        raise DomainError(
            f"unknown model kind '{kind}'; expected one of {sorted(_MODEL_FACTORIES)}"
        ) from None
    return factory(**kwargs)


def _as_covariates(model: RegressionModel, w) -> tuple[np.ndarray, bool]:
    """Normalize w to shape (n, d); returns (W, was_single_point)."""
    W = np.asarray(w, dtype=float)
    if model.covariate_dim == 1 and W.ndim <= 1:
        single = W.ndim == 0
        W = W.reshape(-1, 1)
        return W, single
    if W.ndim == 1:
        W = W.reshape(1, -1)
        single = True
    else:
        single = False
    if W.shape[1] != model.covariate_dim:
        raise DomainError(
            f"covariate dimension mismatch: model expects d={model.covariate_dim}, "
            f"got {W.shape[1]}"
        )
    return W, single


def _cells(model: RegressionModel, W: np.ndarray) -> np.ndarray:
    x = W[:, 0]
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("piecewise-constant models are defined on [0, 1]")
    # Half-open cells [(j-1)/D, j/D); the last cell is closed at 1.
    return np.minimum((x * model.dim_p).astype(int), model.dim_p - 1)


def eval_theta(model: RegressionModel, eta, w):
    """Evaluate theta_eta at one covariate point or a stack of points.

    Returns a float for a single point, else an array of shape (n,).  The
    output lies in ``model.codomain`` (general parameter scale when a
    parametrization is attached).
    """
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (model.dim_p,):
        raise DomainError(
            f"parameter dimension mismatch: model expects p={model.dim_p}, "
            f"got shape {eta.shape}"
        )
    W, single = _as_covariates(model, w)
    if model.kind == "piecewise_constant":
        out = eta[_cells(model, W)]
    else:
        z = eta[0] + W @ eta[1:]
        if model.kind == "linear":
            out = z
        elif model.kind == "loglog1pexp":
            out = log_softplus(z)
        elif model.kind == "log1pexp":
            out = np.maximum(softplus(z), TINY_POSITIVE)
        else:  # pragma: no cover - factories prevent this
            raise DomainError(f"unknown model kind '{model.kind}'")
    return float(out[0]) if single else out


def eval_theta_batch(model: RegressionModel, etas: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Evaluate a batch of parameter vectors at once; returns shape (m, n).

    Hot path of the optimizers: one matrix product per candidate generation.
    """
    etas = np.asarray(etas, dtype=float)
    if model.kind == "piecewise_constant":
        return etas[:, _cells(model, W)]
    Z = etas[:, :1] + etas[:, 1:] @ W.T
    if model.kind == "linear":
        return Z
    if model.kind == "loglog1pexp":
        return log_softplus(Z)
    if model.kind == "log1pexp":
        return np.maximum(softplus(Z), TINY_POSITIVE)
    raise DomainError(f"unknown model kind '{model.kind}'")


def eval_natural(model: RegressionModel, eta, w):
    """theta_eta on the natural scale (applies the attached u, if any)."""
    out = eval_theta(model, eta, w)
    if model.parametrization is not None:
        out = model.parametrization.u(out)
    return out


def eval_natural_batch(model: RegressionModel, etas: np.ndarray, W: np.ndarray) -> np.ndarray:
    out = eval_theta_batch(model, etas, W)
    if model.parametrization is not None:
        out = model.parametrization.u(out)
    return out


def holder_partition_dim(
    alpha: float, M: float, n: int, kappa: float, family_regime: str
) -> int:
    """Number of cells D(alpha, M, n) for piecewise-constant Holder fits.

    ``stabilized`` is the choice for a variance-stabilized parametrization,
    the smallest integer k with (kappa^2 M^2 n / (1 + log n))^(1/(1+2alpha))
    <= k.  ``poisson_mean`` is the choice for the Poisson family parametrized
    by its mean, the smallest integer k with
    (M n / (2 log(e n)))^(1/(1+alpha)) <= k.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not M > 0:
        raise DomainError(f"M must be positive, got {M}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if family_regime == "stabilized":
        x = (kappa**2 * M**2 * n / (1.0 + math.log(n))) ** (1.0 / (1.0 + 2.0 * alpha))
    elif family_regime == "poisson_mean":
        x = (M * n / (2.0 * math.log(math.e * n))) ** (1.0 / (1.0 + alpha))
    else:
        raise DomainError(
            f"family_regime must be 'stabilized' or 'poisson_mean', got '{family_regime}'"
        )
    return max(1, math.ceil(x))


def vc_dim_bound(model: RegressionModel) -> int:
    """VC-subgraph dimension bound: 7 for the affine-link models on R^5,
    D + 1 for piecewise constants on D cells."""
    return model.vc_bound
