"""Evaluation metrics for PU classifiers.

AUC is the Mann-Whitney statistic (ties get half credit) computed by rank
sums.  AUC_adj removes the bias of scoring against PU indicators:

    AUC_adj = (AUC_naive - pi1 / 2) / (1 - pi1)

where AUC_naive scores against z.  On small samples the corrected value can
leave [0, 1]; it is reported unclamped.

RKL is the per-observation gap, times 100, between the best attainable PU
log-likelihood on a test set and the one achieved by the evaluated
coefficients; the sup is the test set's own multi-start MLE, whose solver
slack sets the "rkl >= -1e-6" tolerance.

The estimated KL divergence compares weighted candidate predictors against
an oracle linear predictor supplied by the simulation harness (it requires
knowing the data-generating parameters, so it is a simulation-only
diagnostic); its minimizer over the simplex gives the ratio diagnostic
KL(selected w) / inf_w KL(w).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .averaging import CandidateBank
from .data import DomainDataset, LinkConstants
from .errors import DataError
from .estimation import FitOptions, FitResult, fit_mle
from .likelihoods import Objective, pu_mean_nll
from .links import link_derivs, link_g, log1pexp
from .simplex import minimize_on_simplex


@dataclass(frozen=True)
class EvalReport:
    acc: float
    auc: float
    auc_adj: float
    tpr: float
    fpr: float
    rkl: float
    n_test: int
    threshold: float = 0.5

    FIELDS = ("acc", "auc", "auc_adj", "tpr", "fpr", "rkl")


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with 0.5 credit for ties, via rank sums."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: labels contain a single class")
    ranks = rankdata(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_adj(scores, z, pi1: float) -> float:
    """Affine correction of the PU-label AUC; equals AUC_naive at pi1 = 0."""
    if not (0.0 <= pi1 < 1.0):
        raise DataError(f"pi1 must lie in [0, 1) for the correction, got {pi1}")
    naive = auc(scores, z)
    return (naive - pi1 / 2.0) / (1.0 - pi1)


def confusion_metrics(scores, labels, threshold: float = 0.5):
    """(acc, tpr, fpr) at `score >= threshold => predict 1`.

    A rate whose class is absent comes back as NaN.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    pred = scores >= threshold
    actual = labels == 1
    acc = float((pred == actual).mean())
    n_pos = int(actual.sum())
    n_neg = len(labels) - n_pos
    tpr = float((pred & actual).sum() / n_pos) if n_pos else float("nan")
    fpr = float((pred & ~actual).sum() / n_neg) if n_neg else float("nan")
    return acc, tpr, fpr


def rkl(beta_hat, test: DomainDataset, b: float,
        opts: FitOptions = FitOptions(),
        test_mle: Optional[FitResult] = None) -> float:
    """100 x per-observation log-likelihood gap to the test-set PU MLE."""
    obj = Objective(data=test, constants=LinkConstants(
        b=b, counts=(test.n_labeled, test.n_unlabeled)))
    if test_mle is None:
        test_mle = fit_mle(obj, opts)
    value_hat, _ = obj.value_grad(np.asarray(beta_hat, dtype=float))
    return rkl_from_value(value_hat, test_mle.objective)


def rkl_from_value(mean_nll_hat: float, mean_nll_sup: float) -> float:
    """RKL from precomputed mean NLL values (sup = test-set MLE)."""
    return 100.0 * (mean_nll_hat - mean_nll_sup)


def rkl_from_eta(eta_hat, z, b: float, mean_nll_sup: float) -> float:
    """RKL of a method given only its linear predictor on the test rows."""
    return rkl_from_value(pu_mean_nll(eta_hat, z, b), mean_nll_sup)


def estimated_kl(w, bank: CandidateBank, oracle_eta_star, eval_x, z,
                 b: float) -> float:
    """Average of z [h(eta*) - h(eta(w))] - [g(eta*) - g(eta(w))] on fresh
    rows, where eta(w) weights the full-data candidate predictors."""
    crit = EstimatedKl(bank, oracle_eta_star, eval_x, z, b)
    return crit.value(np.asarray(w, dtype=float))


class EstimatedKl:
    """Estimated KL divergence as a function of the weight vector."""

    def __init__(self, bank: CandidateBank, oracle_eta_star, eval_x, z,
                 b: float):
        eval_x = np.asarray(eval_x, dtype=float)
        self.predictors = eval_x @ bank.candidate_betas()
        self.z = np.asarray(z, dtype=float)
        eta_star = np.asarray(oracle_eta_star, dtype=float)
        if eta_star.shape != (eval_x.shape[0],):
            raise ValueError("oracle predictor length must match eval rows")
        # constant part: mean of z h(eta*) - g(eta*)
        self.star_part = float(np.mean(
            -self.z * log1pexp(-eta_star) - link_g(eta_star, b)))
        self.b = b
        self.dim = bank.n_candidates

    def value(self, w) -> float:
        eta = self.predictors @ np.asarray(w, dtype=float)
        hat_part = float(np.mean(
            -self.z * log1pexp(-eta) - link_g(eta, self.b)))
        return self.star_part - hat_part

    def value_grad(self, w):
        w = np.asarray(w, dtype=float)
        eta = self.predictors @ w
        hat_part = float(np.mean(
            -self.z * log1pexp(-eta) - link_g(eta, self.b)))
        h1, _, g1, _ = link_derivs(eta, self.b)
        rows = (g1 - self.z * h1) / len(eta)
        return self.star_part - hat_part, self.predictors.T @ rows

    def minimize(self):
        """(w_min, value_min) over the simplex, same solver as the weights."""
        res = minimize_on_simplex(self.value_grad, self.dim)
        return res.x, res.value


def kl_ratio(w_hat, bank: CandidateBank, oracle_eta_star, eval_x, z,
             b: float) -> float:
    """KL(w_hat) / inf_w KL(w); NaN when the infimum is numerically zero."""
    crit = EstimatedKl(bank, oracle_eta_star, eval_x, z, b)
    _, inf_value = crit.minimize()
    if not np.isfinite(inf_value) or inf_value <= 1e-12:
        return float("nan")
    return crit.value(np.asarray(w_hat, dtype=float)) / inf_value
