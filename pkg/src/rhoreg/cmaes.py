"""Covariance Matrix Adaptation evolution strategy for bounded maximization.

A compact numpy implementation of the standard (mu/mu_w, lambda) CMA-ES with
cumulative step-size adaptation and rank-one plus rank-mu covariance updates.
Candidates falling outside the search box are repaired by projection, and the
repaired points drive both ranking and distribution updates, so the incumbent
never leaves the box.

The public entry point :func:`cmaes_maximize` maximizes; internally fitness
is kept in "larger is better" orientation throughout.  It supports several
start points (the caller's restarts) sharing one evaluation budget, and
always evaluates the start points themselves, so the returned best value is
at least the value at ``x0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["OptimizerSettings", "CmaResult", "cmaes_maximize"]

# Run-level termination tolerances. A run that triggers one of these hands
# its unused budget to the remaining restarts.
TOL_FUN = 1e-11
TOL_X = 1e-13
TOL_STALL_GENS = 30


@dataclass
class OptimizerSettings:
    """Knobs for the derivative-free searches.

    ``population`` and ``sigma0`` default to the dimension-based rule
    4 + floor(3 log p) and to 0.3 times the mean box width.  ``max_evals``
    is the total objective-evaluation budget shared by all ``restarts``
    start points.
    """

    population: int | None = None
    sigma0: float | None = None
    max_evals: int = 5000
    restarts: int = 2
    seed_stream: int = 0

    def __post_init__(self):
        if self.population is not None and self.population < 4:
            raise DomainError(f"population must be >= 4, got {self.population}")
        pop = self.population or 4
        if self.max_evals < pop:
            raise DomainError(
                f"max_evals={self.max_evals} smaller than one population ({pop})"
            )
        if self.restarts < 1:
            raise DomainError(f"restarts must be >= 1, got {self.restarts}")


@dataclass
class CmaResult:
    x: np.ndarray
    f: float
    evals: int
    converged: bool


def _default_population(p: int) -> int:
    return 4 + int(3.0 * math.log(p)) if p > 1 else 4


def _make_batch_eval(objective, vectorized: bool):
    if vectorized:
        def batch(X):
            return np.asarray(objective(X), dtype=float).reshape(len(X))
    else:
        def batch(X):
            return np.array([float(objective(x)) for x in X])
    return batch


def _run(batch_eval, start, box, sigma0, lam, budget, rng):
    """One CMA run; returns (best_x, best_f, evals_used, converged)."""
    p = len(start)
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)

    cs = (mueff + 2.0) / (p + mueff + 5.0)
    ds = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (p + 1.0)) - 1.0) + cs
    cc = (4.0 + mueff / p) / (p + 4.0 + 2.0 * mueff / p)
    c1 = 2.0 / ((p + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((p + 2.0) ** 2 + mueff))
    chi_n = math.sqrt(p) * (1.0 - 1.0 / (4.0 * p) + 1.0 / (21.0 * p * p))

    width = float(np.mean(box[:, 1] - box[:, 0]))
    xmean = np.clip(np.asarray(start, dtype=float), box[:, 0], box[:, 1])
    sigma = sigma0
    C = np.eye(p)
    ps = np.zeros(p)
    pc = np.zeros(p)

    best_f = -math.inf
    best_x = xmean.copy()
    evals = 0
    gen = 0
    stall = 0
    hist: list[float] = []

    while evals + lam <= budget:
        gen += 1
        C = 0.5 * (C + C.T)
        eigvals, B = np.linalg.eigh(C)
        eigvals = np.maximum(eigvals, 1e-20)
        D = np.sqrt(eigvals)

        Z = rng.standard_normal((lam, p))
        X = xmean + sigma * (Z * D) @ B.T
        Xr = np.clip(X, box[:, 0], box[:, 1])
        F = batch_eval(Xr)
        F = np.where(np.isnan(F), -math.inf, F)
        evals += lam

        order = np.argsort(-F)
        gen_best = float(F[order[0]])
        if gen_best > best_f:
            best_f = gen_best
            best_x = Xr[order[0]].copy()
            stall = 0
        else:
            stall += 1

        elite = Xr[order[:mu]]
        xold = xmean
        xmean = w @ elite
        y_w = (xmean - xold) / sigma

        c_inv_half_y = B @ ((B.T @ y_w) / D)
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * c_inv_half_y
        hsig = (
            np.linalg.norm(ps) / math.sqrt(1.0 - (1.0 - cs) ** (2 * gen)) / chi_n
            < 1.4 + 2.0 / (p + 1.0)
        )
        pc = (1.0 - cc) * pc + hsig * math.sqrt(cc * (2.0 - cc) * mueff) * y_w

        art = (elite - xold) / sigma
        rank_mu = art.T @ (art * w[:, None])
        C = (
            (1.0 - c1 - cmu) * C
            + c1 * (np.outer(pc, pc) + (1.0 - hsig) * cc * (2.0 - cc) * C)
            + cmu * rank_mu
        )
        sigma *= math.exp((cs / ds) * (np.linalg.norm(ps) / chi_n - 1.0))
        sigma = min(sigma, 10.0 * width)

        hist.append(gen_best)
        if len(hist) > 20:
            hist.pop(0)
            if max(hist) - min(hist) < TOL_FUN * (1.0 + abs(best_f)):
                return best_x, best_f, evals, True
        if sigma * math.sqrt(float(eigvals.max())) < TOL_X * max(width, 1.0):
            return best_x, best_f, evals, True
        if stall >= TOL_STALL_GENS and sigma < 1e-9 * max(width, 1.0):
            return best_x, best_f, evals, True

    return best_x, best_f, evals, False


def cmaes_maximize(
    objective,
    x0,
    box,
    settings: OptimizerSettings,
    rng: np.random.Generator,
    vectorized: bool = False,
    extra_starts: tuple = (),
) -> CmaResult:
    """Maximize `objective` over the box, starting at ``x0``.

    Args:
        objective: maps a parameter vector to a float.  With
            ``vectorized=True`` it must instead accept an (m, p) array of
            candidates and return m values (one matrix pass per generation).
        x0: start point, must lie inside the box and evaluate to a finite
            number (NaN at ``x0`` is an error; NaN elsewhere is treated as
            -inf).
        box: (p, 2) array of per-coordinate [low, high] bounds.
        settings: population/step-size/budget/restarts; see
            :class:`OptimizerSettings`.
        rng: the source of all randomness; results are deterministic given
            the generator state.
        extra_starts: optional additional start points for the restarts
            beyond the first; missing ones re-use ``x0``.

    Returns:
        :class:`CmaResult` with the best probed point, its value, the number
        of evaluations spent and whether every run terminated by its own
        convergence test (rather than by budget exhaustion).
    """
    box = np.asarray(box, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] != len(x0):
        raise DomainError(f"box must have shape ({len(x0)}, 2), got {box.shape}")
    if np.any(x0 < box[:, 0]) or np.any(x0 > box[:, 1]):
        raise DomainError("x0 lies outside the search box")

    p = len(x0)
    lam = settings.population or _default_population(p)
    sigma0 = settings.sigma0 or 0.3 * float(np.mean(box[:, 1] - box[:, 0]))
    batch_eval = _make_batch_eval(objective, vectorized)

    starts = [x0] + [
        np.clip(np.asarray(s, dtype=float), box[:, 0], box[:, 1])
        for s in extra_starts
    ]
    n_runs = max(1, settings.restarts)
    if len(starts) < n_runs:
        starts = starts + [x0] * (n_runs - len(starts))
    starts = starts[:n_runs]

    # Probe the start points themselves; guarantees f* >= f(x0).
    f_starts = batch_eval(np.array(starts))
    if np.isnan(f_starts[0]):
        raise DomainError("objective is NaN at x0")
    f_starts = np.where(np.isnan(f_starts), -math.inf, f_starts)
    evals = len(starts)
    k_best = int(np.argmax(f_starts))
    best_x = starts[k_best].copy()
    best_f = float(f_starts[k_best])

    converged_all = True
    for k, start in enumerate(starts):
        remaining = settings.max_evals - evals
        runs_left = len(starts) - k
        budget = remaining // runs_left
        if budget < lam:
            converged_all = False
            break
        x, f, used, conv = _run(batch_eval, start, box, sigma0, lam, budget, rng)
        evals += used
        converged_all = converged_all and conv
        if f > best_f:
            best_f, best_x = f, x

    return CmaResult(x=best_x, f=best_f, evals=evals, converged=converged_all)
