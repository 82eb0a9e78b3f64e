"""Synthetic data generation and the replication harness.

Three scenario presets are shipped (``case_config(1 | 2 | 3)``):

* case 1: every candidate model omits the last covariate, so all candidates
  are misspecified; the estimated-KL ratio diagnostic is tracked.
* case 2: the candidate set contains correctly specified models; sources
  whose generating coefficients differ from the target's are flagged
  uninformative and the sum of their selected weights is tracked.
* case 3: like case 2 but the outcome is generated through a probit link
  while every working model stays logistic.

Covariates are N(0, S) with S_ij = rho^|i-j|; labels are Bernoulli through
the configured link.  Each replication regenerates a population of 100k rows
per distinct coefficient vector, samples every domain from it, runs the full
averaging pipeline next to its baselines, and scores everything on a fresh
PU test draw that is disjoint from all training draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtr

from .averaging import CandidateBank, WeightVector, averaged_coefficients, \
    build_bank, solve_weights
from .data import DomainDataset, pu_constant
from .errors import DataError
from .estimation import FitOptions, FitResult, fit_mle, minimize_smooth
from .folds import FoldPlan, make_folds
from .likelihoods import Objective, pu_mean_nll
from .links import sigmoid
from .metrics import EvalReport, auc, auc_adj, confusion_metrics, kl_ratio, \
    rkl_from_eta
from .parallel import parallel_map

METHODS = ("single_pu", "oracle", "equal_weight", "cv_avg")

_BETA_BUILDERS = {}


def _register(name):
    def deco(fn):
        _BETA_BUILDERS[name] = fn
        return fn
    return deco


@_register("head5")
def _beta_head5(p):
    v = np.zeros(p)
    v[:5] = 1.0
    return v


@_register("alt01")
def _beta_alt01(p):
    v = np.zeros(p)
    v[1::2] = 1.0
    return v


@_register("head5_tail")
def _beta_head5_tail(p):
    v = np.zeros(p)
    v[:5] = 1.0
    v[-1] = 0.5
    return v


@_register("odd3")
def _beta_odd3(p):
    v = np.zeros(p)
    v[[0, 2, 4]] = 1.0
    return v


@_register("tail5")
def _beta_tail5(p):
    v = np.zeros(p)
    v[-5:] = 1.0
    return v


def beta_vector(name: str, p: int) -> np.ndarray:
    """Named coefficient vectors used by the scenario presets."""
    if p < 10:
        raise ValueError(f"named coefficient vectors need p >= 10, got {p}")
    try:
        return _BETA_BUILDERS[name](p)
    except KeyError:
        raise KeyError(f"unknown coefficient vector {name!r}; "
                       f"choose from {sorted(_BETA_BUILDERS)}") from None


# -- data-generating process -------------------------------------------------

@dataclass(frozen=True)
class DgpSpec:
    beta_true: np.ndarray
    p: int = 10
    rho: float = 0.3
    link: str = "logit"
    population_size: int = 100_000

    def __post_init__(self):
        beta = np.asarray(self.beta_true, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta_true", beta)
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.link not in ("logit", "probit"):
            raise ValueError(f"link must be 'logit' or 'probit', got {self.link!r}")
        if beta.shape != (self.p,):
            raise ValueError(
                f"beta_true has shape {beta.shape}, expected ({self.p},)")


@dataclass(frozen=True)
class Population:
    x: np.ndarray
    y: np.ndarray
    pi1: float
    dgp: DgpSpec


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_population(dgp: DgpSpec, seed) -> Population:
    """Draw the finite population the domains sample from."""
    rng = _rng(seed)
    chol = np.linalg.cholesky(ar1_covariance(dgp.p, dgp.rho))
    x = rng.standard_normal((dgp.population_size, dgp.p)) @ chol.T
    eta = x @ dgp.beta_true
    prob = sigmoid(eta) if dgp.link == "logit" else ndtr(eta)
    y = (rng.random(dgp.population_size) < prob).astype(float)
    return Population(x=x, y=y, pi1=float(y.mean()), dgp=dgp)


# -- domain sampling ----------------------------------------------------------

@dataclass(frozen=True)
class DomainSpec:
    scheme: str
    n: int
    p_l: Optional[float] = None
    drop_last_covariate: bool = False
    domain_id: str = ""

    def __post_init__(self):
        if self.scheme != "binary" and self.p_l is None:
            raise ValueError(f"scheme {self.scheme!r} requires p_l")

    @property
    def n_labeled(self) -> int:
        if self.scheme == "binary":
            return self.n
        return int(round(self.n * self.p_l))


@dataclass(frozen=True)
class DomainSample:
    """A sampled domain dataset plus the bookkeeping the harness needs."""

    dataset: DomainDataset
    rows: np.ndarray      # population indices, aligned with dataset rows
    y_true: np.ndarray    # hidden truth for every drawn row
    x_full: np.ndarray    # features before any covariate drop


def sample_domain(pop: Population, spec: DomainSpec, seed,
                  exclude: Optional[np.ndarray] = None) -> DomainSample:
    """Draw one domain from the population, without replacement.

    ``exclude`` removes population rows from the pool (used to keep test and
    diagnostic draws disjoint from training draws).
    """
    rng = _rng(seed)
    mask = np.ones(len(pop.y), dtype=bool)
    if exclude is not None and len(exclude):
        mask[np.asarray(exclude, dtype=int)] = False

    if spec.scheme == "binary":
        pool = np.flatnonzero(mask)
        if len(pool) < spec.n:
            raise DataError("population too small for the requested draw")
        rows = rng.choice(pool, size=spec.n, replace=False)
        y = pop.y[rows]
        x = pop.x[rows]
        ds = DomainDataset.binary(_view(x, spec), y, pi1=pop.pi1,
                                  domain_id=spec.domain_id)
        return DomainSample(dataset=ds, rows=rows, y_true=y, x_full=x)

    n_l = spec.n_labeled
    n_u = spec.n - n_l
    if spec.scheme == "pu":
        pos_pool = np.flatnonzero(mask & (pop.y == 1))
        if len(pos_pool) < n_l:
            raise DataError(
                f"n_L={n_l} exceeds the {len(pos_pool)} available positives")
        labeled = rng.choice(pos_pool, size=n_l, replace=False)
        mask2 = mask.copy()
        mask2[labeled] = False
        rest_pool = np.flatnonzero(mask2)
        if len(rest_pool) < n_u:
            raise DataError("population too small for the unlabeled draw")
        unlabeled = rng.choice(rest_pool, size=n_u, replace=False)
        rows = np.concatenate([labeled, unlabeled])
        z = np.concatenate([np.ones(n_l), np.zeros(n_u)])
        x = pop.x[rows]
        ds = DomainDataset.pu(_view(x, spec), z, pi1=pop.pi1,
                              domain_id=spec.domain_id)
        return DomainSample(dataset=ds, rows=rows, y_true=pop.y[rows], x_full=x)

    # semi: n rows drawn, a uniform subset of n_l keeps its labels
    pool = np.flatnonzero(mask)
    if len(pool) < spec.n:
        raise DataError("population too small for the requested draw")
    rows = rng.choice(pool, size=spec.n, replace=False)
    keep = rng.choice(spec.n, size=n_l, replace=False)
    z = np.zeros(spec.n)
    z[keep] = 1.0
    y_true = pop.y[rows]
    y_obs = np.full(spec.n, np.nan)
    y_obs[keep] = y_true[keep]
    x = pop.x[rows]
    ds = DomainDataset.semi(_view(x, spec), z, y_obs, pi1=pop.pi1,
                            domain_id=spec.domain_id)
    return DomainSample(dataset=ds, rows=rows, y_true=y_true, x_full=x)


def _view(x: np.ndarray, spec: DomainSpec) -> np.ndarray:
    return x[:, :-1] if spec.drop_last_covariate else x


# -- probit fitting (oracle baseline under link misspecification) -------------

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def probit_nll_grad(beta, x, y):
    """Mean negative log-likelihood and gradient of probit regression."""
    beta = np.asarray(beta, dtype=float)
    eta = x @ beta
    value = -float(np.mean(y * log_ndtr(eta) + (1.0 - y) * log_ndtr(-eta)))
    log_pdf = -0.5 * eta * eta - _LOG_SQRT_2PI
    ratio_pos = np.exp(log_pdf - log_ndtr(eta))
    ratio_neg = np.exp(log_pdf - log_ndtr(-eta))
    rows = -(y * ratio_pos - (1.0 - y) * ratio_neg)
    return value, x.T @ rows / len(y)


def fit_probit(x, y, opts: FitOptions) -> FitResult:
    """Multi-start probit MLE with the same smooth solver as fit_mle."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    starts = [np.zeros(x.shape[1])]
    for _ in range(opts.n_starts - 1):
        starts.append(rng.normal(0.0, opts.start_sd, size=x.shape[1]))
    runs = []
    for idx, s in enumerate(starts):
        xopt, f, g, iters, trace, ok = minimize_smooth(
            lambda b: probit_nll_grad(b, x, y), s, opts)
        if ok:
            runs.append((idx, xopt, f, g, iters, trace))
    if not runs:
        raise DataError("probit fit failed at every start")
    idx, xopt, f, g, iters, trace = min(runs, key=lambda r: r[2])
    gnorm = float(np.max(np.abs(g)))
    return FitResult(beta=xopt, objective=f, converged=gnorm <= opts.grad_tol,
                     iters=iters, start_index=idx, grad_norm=gnorm,
                     start_objectives=tuple(r[2] for r in runs), trace=trace)


# -- scenario configuration ----------------------------------------------------

@dataclass(frozen=True)
class DomainTemplate:
    domain_id: str
    role: str      # "target" | "source"
    scheme: str
    beta_name: str


@dataclass(frozen=True)
class CaseConfig:
    case: int
    domains: tuple[DomainTemplate, ...]
    link: str = "logit"
    p: int = 10
    rho: float = 0.3
    population_size: int = 100_000
    n_grid: tuple[int, ...] = (400, 800, 1600)
    pl_grid: tuple[float, ...] = (0.3, 0.4)
    reps: int = 100
    n_test: int = 500
    k: int = 5
    seed: int = 0
    drop_last_covariate: bool = False
    uninformative: tuple[str, ...] = ()
    track_kl_ratio: bool = False
    kl_eval_size: int = 3000
    threshold: float = 0.5
    fit: FitOptions = field(default_factory=FitOptions)

    @property
    def target(self) -> DomainTemplate:
        return next(d for d in self.domains if d.role == "target")

    @property
    def sources(self) -> tuple[DomainTemplate, ...]:
        return tuple(d for d in self.domains if d.role != "target")


def case_config(case: int, *, n_grid=(400, 800, 1600), pl_grid=(0.3, 0.4),
                reps: int = 100, n_test: int = 500, k: int = 5,
                seed: int = 0, kl_eval_size: int = 3000) -> CaseConfig:
    """Preset scenario configurations 1-3."""
    if case == 1:
        domains = (
            DomainTemplate("0", "target", "pu", "head5_tail"),
            DomainTemplate("1", "source", "binary", "head5"),
            DomainTemplate("2", "source", "binary", "alt01"),
            DomainTemplate("3", "source", "pu", "head5"),
            DomainTemplate("4", "source", "pu", "alt01"),
            DomainTemplate("5", "source", "semi", "head5"),
            DomainTemplate("6", "source", "semi", "alt01"),
        )
        return CaseConfig(case=1, domains=domains, link="logit",
                          drop_last_covariate=True, track_kl_ratio=True,
                          n_grid=tuple(n_grid), pl_grid=tuple(pl_grid),
                          reps=reps, n_test=n_test, k=k, seed=seed,
                          kl_eval_size=kl_eval_size)
    if case in (2, 3):
        domains = (
            DomainTemplate("0", "target", "pu", "head5"),
            DomainTemplate("1", "source", "binary", "head5"),
            DomainTemplate("2", "source", "binary", "odd3"),
            DomainTemplate("3", "source", "binary", "tail5"),
            DomainTemplate("4", "source", "pu", "head5"),
            DomainTemplate("5", "source", "pu", "odd3"),
            DomainTemplate("6", "source", "pu", "tail5"),
            DomainTemplate("7", "source", "semi", "head5"),
            DomainTemplate("8", "source", "semi", "odd3"),
            DomainTemplate("9", "source", "semi", "tail5"),
        )
        return CaseConfig(case=case, domains=domains,
                          link="logit" if case == 2 else "probit",
                          uninformative=("2", "3", "5", "6", "8", "9"),
                          n_grid=tuple(n_grid), pl_grid=tuple(pl_grid),
                          reps=reps, n_test=n_test, k=k, seed=seed,
                          kl_eval_size=kl_eval_size)
    raise ValueError(f"unknown case {case}; choose 1, 2 or 3")


# -- replication runner ---------------------------------------------------------

@dataclass(frozen=True)
class ReplicationContext:
    """Everything a baseline needs to produce test-set predictions."""

    bank: CandidateBank
    weights: WeightVector
    folds: FoldPlan
    target: DomainSample
    test: DomainSample
    oracle_fit: FitResult
    oracle_link: str
    b_test: float
    test_sup_nll: float
    threshold: float


@dataclass(frozen=True)
class ReplicationReport:
    case: int
    n: int
    p_l: float
    rep: int
    method_reports: dict[str, EvalReport]
    weights: np.ndarray
    uninformative_weight_sum: float
    kl_ratio: float


@dataclass(frozen=True)
class CaseResult:
    config: CaseConfig
    reports: tuple[ReplicationReport, ...]
    failures: tuple[str, ...]

    @property
    def batch_failed(self) -> bool:
        attempted = len(self.reports) + len(self.failures)
        return attempted > 0 and len(self.failures) > 0.10 * attempted


def _logit(p):
    p = np.clip(np.asarray(p, dtype=float), 1e-300, 1.0 - 1e-16)
    return np.log(p) - np.log1p(-p)


def run_baseline(name: str, ctx: ReplicationContext) -> EvalReport:
    """Score one method on the replication's test draw."""
    x_cand = ctx.test.dataset.x
    if name == "single_pu":
        eta = x_cand @ ctx.bank.target_full.beta
        scores, eta_logit = sigmoid(eta), eta
    elif name == "equal_weight":
        w = np.full(ctx.bank.n_candidates, 1.0 / ctx.bank.n_candidates)
        eta = x_cand @ averaged_coefficients(w, ctx.bank)
        scores, eta_logit = sigmoid(eta), eta
    elif name == "cv_avg":
        eta = x_cand @ averaged_coefficients(ctx.weights, ctx.bank)
        scores, eta_logit = sigmoid(eta), eta
    elif name == "oracle":
        eta = ctx.test.x_full @ ctx.oracle_fit.beta
        if ctx.oracle_link == "probit":
            scores = ndtr(eta)
            eta_logit = _logit(scores)
        else:
            scores, eta_logit = sigmoid(eta), eta
    else:
        raise ValueError(f"unknown method {name!r}; choose from {METHODS}")
    return _evaluate(scores, eta_logit, ctx)


def _evaluate(scores, eta_logit, ctx: ReplicationContext) -> EvalReport:
    y = ctx.test.y_true
    z = ctx.test.dataset.z
    acc, tpr, fpr = confusion_metrics(scores, y, ctx.threshold)
    return EvalReport(
        acc=acc,
        auc=auc(scores, y),
        auc_adj=auc_adj(scores, z, ctx.test.dataset.pi1),
        tpr=tpr, fpr=fpr,
        rkl=rkl_from_eta(eta_logit, z, ctx.b_test, ctx.test_sup_nll),
        n_test=len(y), threshold=ctx.threshold)


def _run_replication(cfg: CaseConfig, scenario_index: int, n: int, p_l: float,
                     rep: int) -> ReplicationReport:
    ss = np.random.SeedSequence(entropy=cfg.seed,
                                spawn_key=(scenario_index, rep))
    pop_ss, draw_ss, fit_ss, eval_ss = ss.spawn(4)

    beta_names = sorted({d.beta_name for d in cfg.domains})
    pops = {}
    for name, child in zip(beta_names, pop_ss.spawn(len(beta_names))):
        dgp = DgpSpec(beta_true=beta_vector(name, cfg.p), p=cfg.p,
                      rho=cfg.rho, link=cfg.link,
                      population_size=cfg.population_size)
        pops[name] = generate_population(dgp, child)

    used: dict[str, list[np.ndarray]] = {name: [] for name in beta_names}
    samples: dict[str, DomainSample] = {}
    for tpl, child in zip(cfg.domains, draw_ss.spawn(len(cfg.domains))):
        spec = DomainSpec(scheme=tpl.scheme, n=n,
                          p_l=None if tpl.scheme == "binary" else p_l,
                          drop_last_covariate=cfg.drop_last_covariate,
                          domain_id=tpl.domain_id)
        sample = sample_domain(pops[tpl.beta_name], spec, child)
        samples[tpl.domain_id] = sample
        used[tpl.beta_name].append(sample.rows)

    target_tpl = cfg.target
    target = samples[target_tpl.domain_id]
    target_pop = pops[target_tpl.beta_name]
    train_rows = np.concatenate(used[target_tpl.beta_name])

    test_ss, kl_ss = eval_ss.spawn(2)
    test_spec = DomainSpec(scheme="pu", n=cfg.n_test, p_l=p_l,
                           drop_last_covariate=cfg.drop_last_covariate,
                           domain_id="test")
    test = sample_domain(target_pop, test_spec, test_ss, exclude=train_rows)

    seeds = fit_ss.generate_state(2)
    opts = replace(cfg.fit, seed=int(seeds[0]))
    folds = make_folds(target.dataset, cfg.k, seed=int(seeds[1]))
    bank = build_bank(target.dataset, [samples[t.domain_id].dataset
                                       for t in cfg.sources], folds, opts)
    weights = solve_weights(bank, target.dataset, folds)

    oracle_fit = _fit_oracle(target, cfg.link, opts)

    b_test = pu_constant(test.dataset.n_labeled, test.dataset.n_unlabeled,
                         test.dataset.pi1).b
    test_full_ds = DomainDataset.pu(test.x_full, test.dataset.z,
                                    pi1=test.dataset.pi1, domain_id="test")
    sup_obj = Objective.for_dataset(test_full_ds)
    sup = fit_mle(sup_obj, opts)
    test_sup_nll = pu_mean_nll(test.x_full @ sup.beta, test.dataset.z, b_test)

    ctx = ReplicationContext(
        bank=bank, weights=weights, folds=folds, target=target, test=test,
        oracle_fit=oracle_fit, oracle_link=cfg.link, b_test=b_test,
        test_sup_nll=test_sup_nll, threshold=cfg.threshold)
    method_reports = {name: run_baseline(name, ctx) for name in METHODS}

    uninf = float("nan")
    if cfg.uninformative:
        idx = [1 + bank.source_ids.index(d) for d in cfg.uninformative]
        uninf = float(np.sum(weights.w[idx]))

    ratio = float("nan")
    if cfg.track_kl_ratio:
        excl = np.concatenate([train_rows, test.rows])
        kl_spec = DomainSpec(scheme="pu", n=cfg.kl_eval_size, p_l=p_l,
                             drop_last_covariate=cfg.drop_last_covariate,
                             domain_id="kl_eval")
        kl_sample = sample_domain(target_pop, kl_spec, kl_ss, exclude=excl)
        eta_star = kl_sample.x_full @ target_pop.dgp.beta_true
        ratio = kl_ratio(weights.w, bank, eta_star, kl_sample.dataset.x,
                         kl_sample.dataset.z, bank.b_full)

    return ReplicationReport(case=cfg.case, n=n, p_l=p_l, rep=rep,
                             method_reports=method_reports,
                             weights=np.asarray(weights.w),
                             uninformative_weight_sum=uninf, kl_ratio=ratio)


def _fit_oracle(target: DomainSample, link: str, opts: FitOptions) -> FitResult:
    """True-label fit on the target rows, full feature set, true link."""
    if link == "probit":
        return fit_probit(target.x_full, target.y_true, opts)
    ds = DomainDataset.binary(target.x_full, target.y_true,
                              pi1=target.dataset.pi1, domain_id="oracle")
    return fit_mle(Objective.for_dataset(ds), opts)


def run_case(cfg: CaseConfig) -> CaseResult:
    """Run every (n, p_L) scenario in the grid for cfg.reps replications.

    Individual replication failures are recorded and skipped; the batch is
    marked failed when more than 10% of replications fail.
    """
    scenarios = [(n, pl) for n in cfg.n_grid for pl in cfg.pl_grid]
    reports: list[ReplicationReport] = []
    failures: list[str] = []
    for si, (n, pl) in enumerate(scenarios):
        def run_one(rep, _si=si, _n=n, _pl=pl):
            try:
                return _run_replication(cfg, _si, _n, _pl, rep)
            except Exception as exc:  # noqa: BLE001 - recorded, not fatal
                return f"n={_n} p_l={_pl} rep={rep}: {type(exc).__name__}: {exc}"
        for out in parallel_map(run_one, list(range(cfg.reps))):
            if isinstance(out, str):
                failures.append(out)
            else:
                reports.append(out)
    return CaseResult(config=cfg, reports=tuple(reports),
                      failures=tuple(failures))
