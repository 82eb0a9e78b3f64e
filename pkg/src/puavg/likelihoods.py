"""Negative log-likelihood objectives for the three labeling schemes.

All objectives are averaged over rows (mean scaling keeps step sizes stable
across sample sizes); the exact sum form is ``n * value``.  Constant terms
that do not depend on beta, the ``z log b`` term of the PU likelihood and the
``log h0`` / ``log h1`` factors of the semi-supervised one, are kept in the
reported values so that likelihood-based metrics need no recentering.

Per-observation contributions (negated and averaged):

* binary:  y * eta - log(1 + exp(eta))
* pu:      z * h(eta) - g(eta) + c(z, b)
* semi, labeled rows:    y log[h1 s(v)] + (1-y) log[h0 (1-s(v))]
* semi, unlabeled rows:  log[1 - h0 (1-s(v)) - h1 s(v)]

with eta = x @ beta, v = nu + eta, s the logistic function.  The unlabeled
semi-supervised mixture term can go nonpositive at extreme v; it is clamped
at 1e-12 (with the affected rows counted, and a zero gradient there) so the
objective stays defined along optimizer line searches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DomainDataset, LinkConstants, constants_for
from .errors import IllPosedLikelihoodError
from .links import link_c, log1pexp, sigmoid

BRACKET_FLOOR = 1e-12
CLAMP_FAIL_FRACTION = 0.01


@dataclass(frozen=True)
class Objective:
    """A dataset bound to the constants its likelihood should use.

    ``constants`` normally come from the dataset's own counts; callers that
    need different ones (the weight-selection criterion evaluates held-out
    rows under the full-data constant) pass them explicitly.
    """

    data: DomainDataset
    constants: LinkConstants

    @classmethod
    def for_dataset(cls, data: DomainDataset,
                    constants: Optional[LinkConstants] = None) -> "Objective":
        return cls(data=data, constants=constants if constants is not None
                   else constants_for(data))

    @property
    def kind(self) -> str:
        return self.data.scheme

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p

    def _check_beta(self, beta: np.ndarray) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ValueError(
                f"beta has shape {beta.shape}, expected ({self.p},)")
        return beta

    def value_grad(self, beta) -> tuple[float, np.ndarray]:
        """Mean-scaled NLL and its gradient (clamp count discarded)."""
        value, grad, _ = self.value_grad_clamped(beta)
        return value, grad

    def value_grad_clamped(self, beta) -> tuple[float, np.ndarray, int]:
        """As value_grad, plus the number of clamped unlabeled rows (semi)."""
        beta = self._check_beta(beta)
        if self.kind == "binary":
            value, grad = _binary_value_grad(beta, self.data)
            return value, grad, 0
        if self.kind == "pu":
            value, grad = _pu_value_grad(beta, self.data, self.constants)
            return value, grad, 0
        return _semi_value_grad(beta, self.data, self.constants)

    def value_grad_sum(self, beta) -> tuple[float, np.ndarray]:
        """Exact-sum form: n times the mean-scaled value and gradient."""
        value, grad = self.value_grad(beta)
        return self.n * value, self.n * grad


def _binary_value_grad(beta, data):
    eta = data.x @ beta
    value = float(np.mean(log1pexp(eta) - data.y * eta))
    grad = data.x.T @ (sigmoid(eta) - data.y) / data.n
    return value, grad


def _pu_value_grad(beta, data, constants):
    b = constants.b
    if b is None or not np.isfinite(b):
        raise ValueError(f"PU likelihood needs a finite constant b, got {b!r}")
    eta = data.x @ beta
    value, rows = pu_mean_nll_grad_eta(eta, data.z, b)
    return value, data.x.T @ rows


def _semi_value_grad(beta, data, constants):
    h0, h1, nu = constants.h0, constants.h1, constants.nu
    if h0 is None or h1 is None or nu is None:
        raise ValueError("semi likelihood needs constants h0, h1, nu")
    if not (0.0 < h0 < 1.0 and 0.0 < h1 < 1.0):
        raise ValueError(f"h0, h1 must lie in (0, 1), got {h0}, {h1}")
    v = nu + data.x @ beta
    s = sigmoid(v)
    labeled = data.z == 1
    y = data.y[labeled]
    # labeled: -[y log(h1 s) + (1-y) log(h0 (1-s))]
    vl = v[labeled]
    ll = y * (np.log(h1) - log1pexp(-vl)) + (1.0 - y) * (np.log(h0) - log1pexp(vl))
    # unlabeled: -log[(1 - h0) + (h0 - h1) s]
    su = s[~labeled]
    bracket = (1.0 - h0) + (h0 - h1) * su
    clamped = bracket < BRACKET_FLOOR
    n_clamped = int(clamped.sum())
    safe = np.maximum(bracket, BRACKET_FLOOR)
    value = -(ll.sum() + np.log(safe).sum()) / data.n

    rows = np.empty(data.n)
    rows[labeled] = s[labeled] - y
    du = -(h0 - h1) * su * (1.0 - su) / safe
    du[clamped] = 0.0
    rows[~labeled] = du
    grad = data.x.T @ rows / data.n
    return float(value), grad, n_clamped


def clamp_fraction_ok(n_clamped: int, n_unlabeled: int) -> bool:
    return n_unlabeled == 0 or n_clamped <= CLAMP_FAIL_FRACTION * n_unlabeled


# -- spec'd operation surfaces ---------------------------------------------

def binary_nll_grad(beta, obj: Objective) -> tuple[float, np.ndarray]:
    if obj.kind != "binary":
        raise ValueError(f"objective kind is {obj.kind!r}, expected binary")
    return obj.value_grad(beta)


def pu_nll_grad(beta, obj: Objective) -> tuple[float, np.ndarray]:
    if obj.kind != "pu":
        raise ValueError(f"objective kind is {obj.kind!r}, expected pu")
    return obj.value_grad(beta)


def semi_nll_grad(beta, obj: Objective) -> tuple[float, np.ndarray]:
    """Raises IllPosedLikelihoodError when more than 1% of the unlabeled
    rows hit the mixture-term clamp at this beta."""
    if obj.kind != "semi":
        raise ValueError(f"objective kind is {obj.kind!r}, expected semi")
    value, grad, n_clamped = obj.value_grad_clamped(beta)
    if not clamp_fraction_ok(n_clamped, obj.data.n_unlabeled):
        raise IllPosedLikelihoodError(
            f"semi-supervised likelihood ill-posed for this (h0, h1, nu): "
            f"{n_clamped} of {obj.data.n_unlabeled} unlabeled rows clamped")
    return value, grad


# -- predictor-space helpers (shared by CV criterion and metrics) -----------
#
# These run inside optimizer loops, so the h/g/c pieces are fused into one
# pass using the identities h(t) = -log1pexp(-t) and
# log1pexp(t) = t + log1pexp(-t):
#
#   -[z h - g + c] = (z - 1) log1pexp(-eta) + log1pexp(eta + log1p(b))
#                    - eta - z log(b)

def _pu_constant_term(z: np.ndarray, b: float) -> float:
    if b <= 0.0 or not np.isfinite(b):
        return float(np.mean(link_c(z, b)))  # raises if labeled rows exist
    return float(np.log(b) * np.mean(z))


def pu_mean_nll(eta, z, b: float) -> float:
    """Mean of -[z h(eta) - g(eta) + c(z, b)] over rows."""
    eta = np.asarray(eta, dtype=float)
    z = np.asarray(z, dtype=float)
    lb = np.log1p(b)
    core = (z - 1.0) * np.logaddexp(0.0, -eta) + np.logaddexp(0.0, eta + lb) - eta
    return float(np.mean(core)) - _pu_constant_term(z, b)


def pu_mean_nll_grad_eta(eta, z, b: float) -> tuple[float, np.ndarray]:
    """pu_mean_nll plus its per-row derivative d(value)/d(eta_i) (already
    carrying the 1/n factor)."""
    eta = np.asarray(eta, dtype=float)
    z = np.asarray(z, dtype=float)
    lb = np.log1p(b)
    core = (z - 1.0) * np.logaddexp(0.0, -eta) + np.logaddexp(0.0, eta + lb) - eta
    value = float(np.mean(core)) - _pu_constant_term(z, b)
    s = sigmoid(eta)
    # g' - z h' with g' = sigmoid(eta + lb) - s and h' = 1 - s
    rows = (sigmoid(eta + lb) - s - z * (1.0 - s)) / len(eta)
    return value, rows
