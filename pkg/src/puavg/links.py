"""Scalar link functions for case-control corrected logistic likelihoods.

The positive-unlabeled log-likelihood of one observation is built from three
pieces evaluated at the linear predictor ``t = x @ beta``:

    h(t)    = t - log(1 + exp(t))
    g(t, b) = log(1 + (1 + b) * exp(t)) - log(1 + exp(t))
    c(z, b) = z * log(b)

where ``b`` is the labeled/unlabeled nuisance constant of the domain.  All
functions accept scalars or arrays and stay finite for arguments far outside
the range where a bare exp() overflows: every exp/log composition goes
through ``log1pexp`` which switches to the shifted form at t > 30.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import DataError


def log1pexp(t):
    """log(1 + exp(t)) through the shifted log-sum-exp form (single ufunc,
    overflow-safe for any finite t)."""
    t = np.asarray(t, dtype=float)
    out = np.logaddexp(0.0, t)
    return float(out) if out.ndim == 0 else out


def sigmoid(t):
    """Standard logistic function, overflow-safe."""
    t = np.asarray(t, dtype=float)
    out = expit(t)
    return float(out) if out.ndim == 0 else out


def link_h(t):
    """h(t) = t - log(1 + exp(t)); always <= 0, strictly increasing."""
    t = np.asarray(t, dtype=float)
    out = -np.logaddexp(0.0, -t)
    return float(out) if out.ndim == 0 else out


def link_g(t, b: float):
    """g(t, b) = log(1 + (1+b) exp(t)) - log(1 + exp(t)).

    Uses the identity 1 + (1+b) e^t = 1 + e^(t + log(1+b)) so that g is an
    exact difference of two log1pexp terms; in particular g(t, 0) == 0
    bit-for-bit and g saturates at log(1+b) for large t.
    """
    if not (np.isfinite(b) and b >= 0.0):
        raise ValueError(f"b must be finite and >= 0, got {b!r}")
    t = np.asarray(t, dtype=float)
    out = np.logaddexp(0.0, t + np.log1p(b)) - np.logaddexp(0.0, t)
    return float(out) if out.ndim == 0 else out


def link_c(z, b: float):
    """c(z, b) = z * log(b) for z in {0, 1}."""
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if b <= 0.0 or not np.isfinite(b):
        if np.any(z == 1):
            raise DataError("degenerate PU constant: c(1, b) requires b > 0")
        out = np.zeros_like(z)
    else:
        out = z * np.log(b)
    return float(out[0]) if scalar else out


def link_derivs(t, b: float):
    """First and second derivatives of h and g at t.

    Returns (h', h'', g', g'') with

        h'(t)  = 1 - sigma(t)
        h''(t) = -sigma(t) (1 - sigma(t))
        g'(t)  = s_b - s,            s_b = sigma(t + log(1+b)), s = sigma(t)
        g''(t) = s_b (1 - s_b) - s (1 - s)
    """
    if not (np.isfinite(b) and b >= 0.0):
        raise ValueError(f"b must be finite and >= 0, got {b!r}")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    s = expit(t)
    sb = expit(t + np.log1p(b))
    h1 = expit(-t)
    h2 = -s * h1
    g1 = sb - s
    g2 = sb * (1.0 - sb) - s * (1.0 - s)
    if scalar:
        return float(h1[0]), float(h2[0]), float(g1[0]), float(g2[0])
    return h1, h2, g1, g2
