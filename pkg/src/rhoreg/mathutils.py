"""Numerically stable scalar/array helpers used across the package.

All functions are numpy ufunc compositions and accept scalars or arrays.
"""

from __future__ import annotations

import numpy as np

# Smallest positive value we let a (0, inf)-valued parameter reach.  Keeps
# log/&division paths finite when a link saturates.
TINY_POSITIVE = 1e-300


def softplus(x):
    """log(1 + e^x) without overflow; equals x + log(1 + e^-x) for large x."""
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


def log_softplus(x):
    """log(log(1 + e^x)), finite for any float input.

    For x below -30, softplus(x) = e^x up to relative error < 1e-13, so the
    value is x itself; this branch avoids log(0) when softplus underflows.
    """
    x = np.asarray(x, dtype=float)
    sp = softplus(x)
    with np.errstate(divide="ignore"):
        out = np.where(x < -30.0, x, np.log(np.maximum(sp, TINY_POSITIVE)))
    return out


def sigmoid(x):
    """1 / (1 + e^-x), computed as exp(-softplus(-x)) so neither tail overflows."""
    x = np.asarray(x, dtype=float)
    return np.exp(-np.logaddexp(0.0, -x))


def inv_softplus(y):
    """Inverse of softplus on (0, inf): log(e^y - 1)."""
    y = np.asarray(y, dtype=float)
    # For y > 30 the correction log(1 - e^-y) is below double precision.
    with np.errstate(divide="ignore"):
        small = np.log(np.maximum(np.expm1(y), TINY_POSITIVE))
    return np.where(y > 30.0, y, small)
