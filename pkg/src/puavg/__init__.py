"""Multi-source transfer learning for positive-unlabeled data.

Per-domain logistic-family likelihoods (binary, PU, semi-supervised) are fit
locally; only coefficient vectors cross domain boundaries.  A K-fold
cross-validation criterion on the PU target selects simplex weights, and the
weighted coefficient average drives prediction.  A simulation harness
reproduces the method's qualitative behavior on synthetic scenarios.
"""

from .averaging import CandidateBank, CvCriterion, WeightVector, \
    averaged_coefficients, build_bank, cv_criterion, predict_proba, \
    solve_weights
from .data import DomainDataset, LinkConstants, constants_for, pu_constant, \
    semi_constants
from .errors import DataError, IllPosedLikelihoodError, NumericalError, \
    PuavgError
from .estimation import FitOptions, FitResult, L1Options, \
    default_lambda_grid, fit_l1, fit_mle, lambda_max, select_lambda
from .folds import FoldPlan, make_folds
from .likelihoods import Objective, binary_nll_grad, pu_nll_grad, \
    semi_nll_grad
from .links import link_c, link_derivs, link_g, link_h, sigmoid
from .metrics import EvalReport, auc, auc_adj, confusion_metrics, \
    estimated_kl, kl_ratio, rkl
from .simulate import CaseConfig, CaseResult, DgpSpec, DomainSpec, \
    ReplicationReport, beta_vector, case_config, generate_population, \
    run_baseline, run_case, sample_domain

__version__ = "0.1.0"

__all__ = [
    "CandidateBank", "CaseConfig", "CaseResult", "CvCriterion", "DataError",
    "DgpSpec", "DomainDataset", "DomainSpec", "EvalReport", "FitOptions",
    "FitResult", "FoldPlan", "IllPosedLikelihoodError", "L1Options",
    "LinkConstants", "NumericalError", "Objective", "PuavgError",
    "ReplicationReport", "WeightVector", "auc", "auc_adj",
    "averaged_coefficients", "beta_vector", "binary_nll_grad", "build_bank",
    "case_config", "confusion_metrics", "constants_for", "cv_criterion",
    "default_lambda_grid", "estimated_kl", "fit_l1", "fit_mle",
    "generate_population", "kl_ratio", "lambda_max", "link_c", "link_derivs",
    "link_g", "link_h", "make_folds", "predict_proba", "pu_constant",
    "pu_nll_grad", "rkl", "run_baseline", "run_case", "sample_domain",
    "select_lambda", "semi_constants", "semi_nll_grad", "sigmoid",
    "solve_weights",
]
