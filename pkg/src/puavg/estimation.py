"""Per-domain fitting: smooth maximum likelihood and L1-penalized variants.

Fitted coefficient vectors are the only artifacts that ever cross domain
boundaries, so everything downstream (weight selection, averaging,
prediction) consumes the FitResult produced here.

The smooth solver is a limited-memory quasi-Newton loop (two-loop recursion
over secant pairs) with Armijo backtracking, run from several starts because
the PU and semi-supervised objectives are not convex.  The L1 solver is
proximal gradient with FISTA momentum, adaptive restart, and backtracking on
the smooth part; the intercept column (column 0 when the dataset declares
one) is never penalized.  Both are deterministic given (data, options, seed).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError
from .folds import stratified_assignments
from .likelihoods import Objective, clamp_fraction_ok

GradFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class FitOptions:
    max_iters: int = 500
    grad_tol: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    step_shrink: float = 0.5
    armijo_c: float = 1e-4
    start_sd: float = 0.1
    memory: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    objective: float
    converged: bool
    iters: int
    start_index: int
    grad_norm: float
    clamp_warnings: int = 0
    start_objectives: tuple[float, ...] = ()
    trace: tuple[float, ...] = ()

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)


def _starting_points(p: int, opts: FitOptions) -> list[np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(opts.seed))
    starts = [np.zeros(p)]
    for _ in range(opts.n_starts - 1):
        starts.append(rng.normal(0.0, opts.start_sd, size=p))
    return starts


def _minimize_lbfgs(fun: GradFn, x0: np.ndarray, opts: FitOptions):
    """Limited-memory quasi-Newton descent with Armijo backtracking.

    Returns (x, f, g, iters, trace, ok); ok is False when the objective was
    non-finite at the start.  The trace records the objective at every
    accepted iterate, so it is nonincreasing by construction.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun(x)
    if not np.isfinite(f):
        return x, np.inf, g, 0, (), False
    trace = [f]
    pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=opts.memory)
    it = 0
    for it in range(1, opts.max_iters + 1):
        if np.max(np.abs(g)) <= opts.grad_tol:
            it -= 1
            break
        d = _lbfgs_direction(g, pairs)
        dg = float(d @ g)
        if not np.isfinite(dg) or dg >= 0.0:
            d = -g
            dg = -float(g @ g)
        step = 1.0 if pairs else min(1.0, 1.0 / (1.0 + np.sqrt(-dg)))
        accepted = False
        while step > 1e-20:
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + opts.armijo_c * step * dg:
                accepted = True
                break
            step *= opts.step_shrink
        if not accepted:
            break
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            pairs.append((s, yv, sy))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
    return x, f, g, it, tuple(trace), True


def minimize_smooth(fun: GradFn, x0: np.ndarray, opts: FitOptions):
    """Public surface of the smooth solver for single-start use by callers
    that bring their own objective (e.g. the probit oracle baseline).

    Returns (x, f, g, iters, trace, ok)."""
    return _minimize_lbfgs(fun, x0, opts)


def _lbfgs_direction(g: np.ndarray, pairs) -> np.ndarray:
    q = -g.copy()
    if not pairs:
        return q
    alphas = []
    for s, yv, sy in reversed(pairs):
        a = float(s @ q) / sy
        q -= a * yv
        alphas.append(a)
    s, yv, sy = pairs[-1]
    q *= sy / float(yv @ yv)
    for (s, yv, sy), a in zip(pairs, reversed(alphas)):
        b = float(yv @ q) / sy
        q += (a - b) * s
    return q


def fit_mle(obj: Objective, opts: FitOptions = FitOptions()) -> FitResult:
    """Best local minimizer of the mean-scaled NLL over multiple starts.

    Starts that hit a non-finite objective are dropped; semi-supervised
    starts whose final iterate clamps more than 1% of the unlabeled rows are
    kept only if nothing better exists (and flagged unconverged).  If no
    start produces a finite result a NumericalError is raised.
    """
    return _multistart_fit(obj, opts, lambda start: _smooth_run(obj, start, opts))


def _smooth_run(obj: Objective, start: np.ndarray, opts: FitOptions):
    x, f, g, iters, trace, ok = _minimize_lbfgs(obj.value_grad, start, opts)
    if not ok:
        return None
    gnorm = float(np.max(np.abs(g)))
    _, _, n_clamped = obj.value_grad_clamped(x)
    # a mean NLL at its zero floor means every observation is fitted
    # perfectly: separable data, no finite maximizer (the small gradient
    # there is saturation, not stationarity)
    separated = f <= max(opts.grad_tol, 1e-10)
    converged = gnorm <= opts.grad_tol and not separated
    return x, f, gnorm, iters, trace, converged, n_clamped


def _multistart_fit(obj: Objective, opts: FitOptions, run) -> FitResult:
    runs = []
    for idx, start in enumerate(_starting_points(obj.p, opts)):
        out = run(start)
        if out is not None:
            runs.append((idx, out))
    if not runs:
        raise NumericalError(
            f"domain {obj.data.domain_id!r}: objective non-finite at every start")
    n_unlab = obj.data.n_unlabeled if obj.kind == "semi" else 0

    def usable(entry):
        _, (_, _, _, _, _, _, n_clamped) = entry
        return clamp_fraction_ok(n_clamped, n_unlab)

    pool = [r for r in runs if usable(r)] or runs
    idx, (x, f, gnorm, iters, trace, converged, n_clamped) = min(
        pool, key=lambda entry: entry[1][1])
    if not clamp_fraction_ok(n_clamped, n_unlab):
        converged = False
    return FitResult(
        beta=x, objective=f, converged=converged, iters=iters, start_index=idx,
        grad_norm=gnorm, clamp_warnings=n_clamped,
        start_objectives=tuple(out[1] for _, out in runs), trace=trace)


# -- L1-penalized fitting ----------------------------------------------------

@dataclass(frozen=True)
class L1Options:
    """Grid policy for the L1 tuning parameter."""

    grid: Optional[tuple[float, ...]] = None
    grid_size: int = 20
    min_ratio: float = 1e-3
    cv_folds: int = 5


def _penalty_mask(obj: Objective) -> np.ndarray:
    mask = np.ones(obj.p, dtype=bool)
    if obj.data.has_intercept_column:
        mask[0] = False
    return mask


def _soft_threshold(x: np.ndarray, t, mask: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[mask] = np.sign(x[mask]) * np.maximum(np.abs(x[mask]) - t, 0.0)
    return out


def _l1_subgrad_residual(g: np.ndarray, x: np.ndarray, lam: float,
                         mask: np.ndarray) -> float:
    r = np.abs(g.copy())
    pen = mask & (x != 0.0)
    r[pen] = np.abs(g[pen] + lam * np.sign(x[pen]))
    zero = mask & (x == 0.0)
    r[zero] = np.maximum(np.abs(g[zero]) - lam, 0.0)
    return float(np.max(r)) if len(r) else 0.0


def _fista_run(obj: Objective, lam: float, start: np.ndarray, opts: FitOptions,
               mask: np.ndarray, change_tol: float = 1e-8):
    x = np.asarray(start, dtype=float).copy()
    f, g = obj.value_grad(x)
    if not np.isfinite(f):
        return None

    def total(xv, fv):
        return fv + lam * float(np.sum(np.abs(xv[mask])))

    lip = 1.0
    y = x.copy()
    fy, gy = f, g
    t_mom = 1.0
    obj_prev = total(x, f)
    trace = [obj_prev]
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        while True:
            x_new = _soft_threshold(y - gy / lip, lam / lip, mask)
            f_new, g_new = obj.value_grad(x_new)
            d = x_new - y
            quad = fy + float(gy @ d) + 0.5 * lip * float(d @ d)
            if np.isfinite(f_new) and f_new <= quad + 1e-12:
                break
            lip *= 2.0
            if lip > 1e16:
                return None
        obj_new = total(x_new, f_new)
        change = float(np.max(np.abs(x_new - x)))
        if obj_new > obj_prev + 1e-12:
            # adaptive restart: drop momentum and retry from the last iterate
            t_mom = 1.0
            y = x.copy()
            fy, gy = obj.value_grad(y)
            continue
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
        fy, gy = obj.value_grad(y)
        x, f = x_new, f_new
        obj_prev = obj_new
        t_mom = t_next
        trace.append(obj_new)
        lip = max(lip * 0.9, 1e-10)
        if change <= change_tol:
            break
    f, g = obj.value_grad(x)
    resid = _l1_subgrad_residual(g, x, lam, mask)
    _, _, n_clamped = obj.value_grad_clamped(x)
    converged = resid <= 1e-6
    return x, total(x, f), resid, iters, tuple(trace), converged, n_clamped


def fit_l1(obj: Objective, lam: float, opts: FitOptions = FitOptions(),
           starts: Optional[Sequence[np.ndarray]] = None) -> FitResult:
    """argmin of NLL + lam * ||beta||_1 over the penalized coordinates.

    ``starts`` overrides the default multi-start set (used for warm starts
    along a lambda path).  The reported objective includes the penalty.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be finite and >= 0, got {lam}")
    mask = _penalty_mask(obj)
    if starts is None:
        start_list = _starting_points(obj.p, opts)
    else:
        start_list = [np.asarray(s, dtype=float) for s in starts]

    runs = []
    for idx, start in enumerate(start_list):
        out = _fista_run(obj, lam, start, opts, mask)
        if out is not None:
            runs.append((idx, out))
    if not runs:
        raise NumericalError(
            f"domain {obj.data.domain_id!r}: L1 fit failed at every start")
    n_unlab = obj.data.n_unlabeled if obj.kind == "semi" else 0
    pool = [r for r in runs if clamp_fraction_ok(r[1][6], n_unlab)] or runs
    idx, (x, f, resid, iters, trace, converged, n_clamped) = min(
        pool, key=lambda entry: entry[1][1])
    if not clamp_fraction_ok(n_clamped, n_unlab):
        converged = False
    return FitResult(
        beta=x, objective=f, converged=converged, iters=iters, start_index=idx,
        grad_norm=resid, clamp_warnings=n_clamped,
        start_objectives=tuple(out[1] for _, out in runs), trace=trace)


def lambda_max(obj: Objective, opts: FitOptions = FitOptions()) -> float:
    """Smallest lambda that zeroes every penalized coordinate at the null fit
    (intercept-only when the dataset has an intercept column, beta=0
    otherwise)."""
    beta0 = np.zeros(obj.p)
    if obj.data.has_intercept_column:
        def restricted(t):
            v, g = obj.value_grad(np.concatenate([t, beta0[1:]]))
            return v, g[:1]
        t_opt, _, _, _, _, ok = _minimize_lbfgs(
            restricted, np.zeros(1), replace(opts, n_starts=1))
        if ok:
            beta0 = np.concatenate([t_opt, beta0[1:]])
    _, g = obj.value_grad(beta0)
    mask = _penalty_mask(obj)
    return float(np.max(np.abs(g[mask])))


def default_lambda_grid(obj: Objective, l1opts: L1Options = L1Options(),
                        opts: FitOptions = FitOptions()) -> np.ndarray:
    """Log-spaced grid from lambda_max down to lambda_max * min_ratio,
    sorted descending."""
    lmax = lambda_max(obj, opts)
    if lmax <= 0:
        lmax = 1e-8
    return np.geomspace(lmax, lmax * l1opts.min_ratio, num=l1opts.grid_size)


def select_lambda(obj: Objective, grid: Sequence[float], k: int,
                  seed: int, opts: FitOptions = FitOptions()) -> float:
    """Grid value minimizing the K-fold held-out mean NLL.

    Folds are stratified by the dataset's label indicator (z where present,
    y for binary data).  Held-out rows are scored under the full dataset's
    constants so values are comparable across folds; ties within 1e-12 go to
    the larger lambda (the sparser model).  Grid values whose fit fails in
    any fold are dropped; if every value drops, a NumericalError is raised.
    """
    grid = np.sort(np.asarray(grid, dtype=float))[::-1]
    if len(grid) == 0:
        raise ValueError("lambda grid must be nonempty")
    if k < 2:
        raise ValueError(f"K must be at least 2, got {k}")
    if len(grid) == 1:
        return float(grid[0])

    indicator = obj.data.z if obj.data.z is not None else obj.data.y
    assignments = stratified_assignments(indicator, k, seed)
    full_constants = obj.constants

    scores = np.zeros(len(grid))
    dropped = np.zeros(len(grid), dtype=bool)
    n_total = obj.n
    for fold in range(k):
        held = assignments == fold
        train = obj.data.subset(~held)
        try:
            train_obj = Objective.for_dataset(train)
        except DataError:
            raise NumericalError(f"fold {fold} leaves a degenerate training set")
        held_obj = Objective(data=obj.data.subset(held), constants=full_constants)
        warm = np.zeros(obj.p)
        for j, lam in enumerate(grid):
            if dropped[j]:
                continue
            try:
                fit = fit_l1(train_obj, float(lam), opts, starts=[warm])
            except NumericalError:
                dropped[j] = True
                continue
            if not np.all(np.isfinite(fit.beta)):
                dropped[j] = True
                continue
            warm = fit.beta.copy()
            v, _ = held_obj.value_grad(fit.beta)
            scores[j] += v * held_obj.n / n_total
    if np.all(dropped):
        raise NumericalError("every lambda on the grid failed to fit")
    scores[dropped] = np.inf
    best = float(np.min(scores))
    tied = (scores <= best + 1e-12) & ~dropped
    return float(np.max(grid[tied]))
