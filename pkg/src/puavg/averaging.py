"""Cross-validated model averaging over per-domain coefficient estimates.

Workflow: split the PU target into stratified folds; refit the target on
each fold complement; fit every source once on its own data (source fitting
never sees target rows, which is the whole privacy point of transferring
parameters instead of data).  The weight criterion is the pooled held-out
negative PU log-likelihood of the weighted predictor

    CV(w) = (1/n0) sum_k sum_{i in fold k}
            -z_i h(eta_i(w)) + g(eta_i(w)) - c(z_i, b)

with eta_i(w) = x_i @ (w_0 beta_fold(k) + sum_m w_m beta_source(m)) and b the
full-target constant.  CV is minimized over the probability simplex; the
final estimator averages the full-data target fit with the source fits at
the selected weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import DomainDataset, LinkConstants, pu_constant
from .errors import DataError, NumericalError
from .estimation import FitOptions, FitResult, L1Options, default_lambda_grid, \
    fit_l1, fit_mle, select_lambda
from .folds import FoldPlan, make_folds
from .likelihoods import Objective, pu_mean_nll_grad_eta
from .links import sigmoid
from .parallel import parallel_map
from .simplex import minimize_on_simplex

__all__ = [
    "CandidateBank", "WeightVector", "make_folds", "build_bank",
    "CvCriterion", "cv_criterion", "solve_weights", "averaged_coefficients",
    "predict_proba",
]


@dataclass(frozen=True)
class CandidateBank:
    """All fitted candidates entering the averaging step."""

    target_full: FitResult
    target_folds: tuple[Optional[FitResult], ...]
    sources: tuple[FitResult, ...]
    b_full: float
    b_folds: tuple[float, ...]
    source_ids: tuple[str, ...] = ()
    lambdas: Optional[tuple[float, ...]] = None

    @property
    def n_candidates(self) -> int:
        return 1 + len(self.sources)

    @property
    def folds_usable(self) -> bool:
        return all(f is not None for f in self.target_folds)

    def candidate_betas(self) -> np.ndarray:
        """(p, M+1) matrix of full-data candidate coefficients."""
        cols = [self.target_full.beta] + [s.beta for s in self.sources]
        return np.column_stack(cols)


@dataclass(frozen=True)
class WeightVector:
    """Simplex weights (index 0 = target) with solver diagnostics."""

    w: np.ndarray
    cv_value: float
    iters: int
    start_index: int
    grad_mapping_norm: float
    vertex_cv: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def fit_domain(data: DomainDataset, opts: FitOptions,
               l1: Optional[L1Options] = None,
               lam: Optional[float] = None,
               constants: Optional[LinkConstants] = None) -> FitResult:
    """Fit one domain with its scheme-appropriate likelihood.

    With ``l1`` given, the penalty level is ``lam`` if supplied, otherwise
    selected by K-fold CV on this domain's own data.
    """
    obj = Objective.for_dataset(data, constants)
    if l1 is None:
        return fit_mle(obj, opts)
    if lam is None:
        grid = l1.grid if l1.grid is not None else default_lambda_grid(obj, l1, opts)
        lam = select_lambda(obj, grid, l1.cv_folds, opts.seed, opts)
    return fit_l1(obj, float(lam), opts)


def build_bank(target: DomainDataset, sources: Sequence[DomainDataset],
               folds: FoldPlan, opts: FitOptions = FitOptions(),
               l1: Optional[L1Options] = None) -> CandidateBank:
    """Fit the K+1 target candidates and the M source candidates.

    Every fold-complement fit recomputes its PU constant from the
    complement's own counts.  Source fits are a function of (source data,
    options) only.  In the L1 mode the target's CV-selected lambda is reused
    for its fold refits; each source selects its own.
    """
    if target.scheme != "pu":
        raise DataError(f"target must be PU data, got {target.scheme!r}")
    for s in sources:
        if s.p != target.p:
            raise DataError(
                f"domain {s.domain_id!r} has {s.p} features, target has {target.p}")

    lam_target: Optional[float] = None
    lambdas: list[float] = []
    if l1 is not None:
        obj = Objective.for_dataset(target)
        grid = l1.grid if l1.grid is not None else default_lambda_grid(obj, l1, opts)
        lam_target = select_lambda(obj, grid, l1.cv_folds, opts.seed, opts)
        lambdas.append(lam_target)

    try:
        target_full = fit_domain(target, opts, l1, lam_target)
    except NumericalError as exc:
        raise NumericalError(f"target domain {target.domain_id!r}: {exc}") from exc

    fold_fits: list[Optional[FitResult]] = []
    b_folds = []
    failures = []
    for k in range(folds.k):
        comp = target.subset(folds.complement_rows(k))
        b_folds.append(pu_constant(comp.n_labeled, comp.n_unlabeled, comp.pi1).b)
        try:
            fold_fits.append(fit_domain(comp, opts, l1, lam_target))
        except NumericalError as exc:
            fold_fits.append(None)
            failures.append(f"fold {k}: {exc}")
    if failures and len(failures) < folds.k:
        raise NumericalError(
            f"target domain {target.domain_id!r} fold fits failed: "
            + "; ".join(failures))
    if failures:
        warnings.warn(
            f"all target fold fits failed for {target.domain_id!r}; weight "
            "selection restricted to the sources", RuntimeWarning)

    def fit_source(s: DomainDataset) -> FitResult:
        try:
            return fit_domain(s, opts, l1)
        except NumericalError as exc:
            raise NumericalError(f"source domain {s.domain_id!r}: {exc}") from exc

    source_fits = parallel_map(fit_source, list(sources))
    b_full = pu_constant(target.n_labeled, target.n_unlabeled, target.pi1).b
    return CandidateBank(
        target_full=target_full, target_folds=tuple(fold_fits),
        sources=tuple(source_fits), b_full=b_full, b_folds=tuple(b_folds),
        source_ids=tuple(s.domain_id for s in sources),
        lambdas=tuple(lambdas) if l1 is not None else None)


class CvCriterion:
    """Evaluates CV(w) and its gradient in O(n0 * (M+1)) per call.

    The n0 x (M+1) matrix of per-candidate linear predictors is built once:
    column 0 holds each row's fold-complement target predictor, column m the
    m-th source predictor.
    """

    def __init__(self, bank: CandidateBank, target: DomainDataset,
                 folds: FoldPlan):
        if not bank.folds_usable:
            raise NumericalError("fold fits unavailable; cannot evaluate CV")
        n, m1 = target.n, bank.n_candidates
        preds = np.empty((n, m1))
        for k in range(folds.k):
            rows = folds.fold_rows(k)
            preds[rows, 0] = target.x[rows] @ bank.target_folds[k].beta
        for j, src in enumerate(bank.sources, start=1):
            preds[:, j] = target.x @ src.beta
        self.predictors = preds
        self.z = np.asarray(target.z, dtype=float)
        self.b = bank.b_full
        self.dim = m1

    def value_grad(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"w has shape {w.shape}, expected ({self.dim},)")
        eta = self.predictors @ w
        value, rows = pu_mean_nll_grad_eta(eta, self.z, self.b)
        return value, self.predictors.T @ rows

    def value(self, w: np.ndarray) -> float:
        return self.value_grad(w)[0]


def cv_criterion(w, bank: CandidateBank, target: DomainDataset,
                 folds: FoldPlan) -> tuple[float, np.ndarray]:
    """One-shot CV(w) evaluation (builds the predictor matrix each call)."""
    return CvCriterion(bank, target, folds).value_grad(w)


@dataclass(frozen=True)
class WeightSolveOptions:
    max_iters: int = 5000
    tol: float = 1e-8


def solve_weights(bank: CandidateBank, target: DomainDataset, folds: FoldPlan,
                  wopts: WeightSolveOptions = WeightSolveOptions()) -> WeightVector:
    """Minimize CV(w) over the simplex from every vertex plus uniform."""
    m1 = bank.n_candidates
    if bank.folds_usable:
        crit = CvCriterion(bank, target, folds)
        res = minimize_on_simplex(crit.value_grad, m1,
                                  max_iters=wopts.max_iters, tol=wopts.tol)
        w = res.x
        vertex_cv = res.start_values[:m1]
    else:
        # degenerate target: restrict to the source face (w0 = 0)
        if not bank.sources:
            raise NumericalError("no usable candidates for weight selection")
        crit = _SourceFaceCriterion(bank, target)
        res = minimize_on_simplex(crit.value_grad, m1 - 1,
                                  max_iters=wopts.max_iters, tol=wopts.tol)
        w = np.concatenate([[0.0], res.x])
        vertex_cv = (np.inf,) + res.start_values[:m1 - 1]
    value = _full_cv_value(crit, w, restricted=not bank.folds_usable)
    return WeightVector(w=w, cv_value=value, iters=res.iters,
                        start_index=res.start_index,
                        grad_mapping_norm=res.grad_mapping_norm,
                        vertex_cv=tuple(float(v) for v in vertex_cv))


class _SourceFaceCriterion:
    def __init__(self, bank: CandidateBank, target: DomainDataset):
        preds = np.column_stack([target.x @ s.beta for s in bank.sources])
        self.predictors = preds
        self.z = np.asarray(target.z, dtype=float)
        self.b = bank.b_full

    def value_grad(self, w):
        eta = self.predictors @ np.asarray(w, dtype=float)
        value, rows = pu_mean_nll_grad_eta(eta, self.z, self.b)
        return value, self.predictors.T @ rows


def _full_cv_value(crit, w, restricted: bool) -> float:
    if restricted:
        return crit.value_grad(np.asarray(w)[1:])[0]
    return crit.value_grad(np.asarray(w))[0]


def averaged_coefficients(w, bank: CandidateBank) -> np.ndarray:
    """Convex combination of the full-data candidate coefficient vectors."""
    w = np.asarray(w.w if isinstance(w, WeightVector) else w, dtype=float)
    if w.shape != (bank.n_candidates,):
        raise ValueError(
            f"w has shape {w.shape}, expected ({bank.n_candidates},)")
    return bank.candidate_betas() @ w


def predict_proba(beta, x_new):
    """Predicted class probability sigma(x @ beta), strictly inside (0, 1)."""
    beta = np.asarray(beta, dtype=float)
    x_new = np.asarray(x_new, dtype=float)
    eta = x_new @ beta
    p = sigmoid(eta)
    lo = np.nextafter(0.0, 1.0)
    hi = np.nextafter(1.0, 0.0)
    return float(np.clip(p, lo, hi)) if np.ndim(p) == 0 else np.clip(p, lo, hi)
