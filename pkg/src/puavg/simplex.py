"""Minimization of a smooth function over the probability simplex.

Euclidean projection uses the non-iterative sort-and-threshold construction
(Held/Wolfe/Crowder; see also Wang & Carreira-Perpinan 2013).  The solver is
projected gradient descent with a backtracking step size, run from every
vertex plus the uniform point because the objectives handled here (held-out
negative log-likelihoods of weighted predictors) are smooth but not convex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

ValueGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]

MAX_ITERS = 5000
GRAD_MAP_TOL = 1e-8
VALUE_TIE_TOL = 1e-10


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto {w : w >= 0, sum w = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    j = np.arange(1, len(v) + 1)
    rho = np.max(np.nonzero(u - css / j > 0)[0]) if np.any(u - css / j > 0) else 0
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    value: float
    iters: int
    start_index: int
    grad_mapping_norm: float
    start_values: tuple[float, ...]    # objective at each start point
    end_values: tuple[float, ...]      # objective at each start's endpoint


def default_starts(dim: int) -> list[np.ndarray]:
    starts = [np.eye(dim)[m] for m in range(dim)]
    starts.append(np.full(dim, 1.0 / dim))
    return starts


def minimize_on_simplex(value_grad: ValueGrad, dim: int, *,
                        starts: Optional[Sequence[np.ndarray]] = None,
                        max_iters: int = MAX_ITERS,
                        tol: float = GRAD_MAP_TOL,
                        shrink: float = 0.5) -> SimplexResult:
    """Multi-start projected gradient descent.

    Among endpoints whose values tie within 1e-10 of the best, the one
    closest (Euclidean) to the uniform point wins, then the lowest start
    index; this makes flat optima deterministic.
    """
    if dim == 1:
        x = np.ones(1)
        f, _ = value_grad(x)
        return SimplexResult(x=x, value=f, iters=0, start_index=0,
                             grad_mapping_norm=0.0, start_values=(f,),
                             end_values=(f,))
    start_list = default_starts(dim) if starts is None else \
        [project_simplex(np.asarray(s, dtype=float)) for s in starts]

    runs = []
    start_values = []
    for x0 in start_list:
        start_values.append(value_grad(x0)[0])
        x, f, iters, gmnorm = _pgd(value_grad, x0, max_iters, tol, shrink)
        runs.append((x, f, iters, gmnorm))

    best_f = min(f for _, f, _, _ in runs)
    uniform = np.full(dim, 1.0 / dim)
    tied = [(i, r) for i, r in enumerate(runs) if r[1] <= best_f + VALUE_TIE_TOL]
    idx, (x, f, iters, gmnorm) = min(
        tied, key=lambda e: (float(np.linalg.norm(e[1][0] - uniform)), e[0]))
    # feasibility polish: no entry below -1e-12 survives, total renormalized
    x = np.maximum(x, 0.0)
    x = x / x.sum()
    return SimplexResult(x=x, value=f, iters=iters, start_index=idx,
                         grad_mapping_norm=gmnorm,
                         start_values=tuple(start_values),
                         end_values=tuple(r[1] for r in runs))


def _pgd(value_grad: ValueGrad, x0: np.ndarray, max_iters: int, tol: float,
         shrink: float):
    """Projected gradient descent with Nesterov momentum, backtracking, and
    adaptive restart.

    Momentum restarts when it points uphill (the O'Donoghue-Candes test), so
    individual steps may occasionally tick upward; the best iterate seen is
    tracked and returned, which keeps the endpoint value at or below the
    start value.  Convergence is declared when the unit-step gradient mapping
    drops below ``tol``; the loop also exits on numerical stagnation.
    """
    x = x0.copy()
    f, g = value_grad(x)
    gmnorm = float(np.max(np.abs(x - project_simplex(x - g))))
    if gmnorm <= tol:
        return x, f, 0, gmnorm
    best_x, best_f = x, f
    y, fy, gy = x, f, g
    t_mom = 1.0
    alpha = 1.0
    stall = 0
    it = 0
    for it in range(1, max_iters + 1):
        accepted = False
        while alpha > 1e-18:
            x_new = project_simplex(y - alpha * gy)
            d = x_new - y
            dd = float(d @ d)
            if dd == 0.0:
                break
            f_new, g_new = value_grad(x_new)
            if np.isfinite(f_new) and \
                    f_new <= fy + float(gy @ d) + dd / (2.0 * alpha) + 1e-12:
                accepted = True
                break
            alpha *= shrink
        if not accepted:
            if np.array_equal(y, x):
                break
            # extrapolated point is stuck; retry unaccelerated
            t_mom = 1.0
            y, fy, gy = x, f, g
            continue
        gmnorm = float(np.max(np.abs(x_new - project_simplex(x_new - g_new))))
        if f_new < best_f:
            best_x, best_f = x_new, f_new
        if gmnorm <= tol:
            x, f = x_new, f_new
            break
        step = float(np.max(np.abs(x_new - x)))
        if step <= 1e-15:
            stall += 1
            if stall >= 20:
                x, f = x_new, f_new
                break
        else:
            stall = 0
        if float((y - x_new) @ (x_new - x)) > 0.0:
            # momentum points uphill: restart it at the new point
            t_mom = 1.0
            y, fy, gy = x_new, f_new, g_new
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            y = x_new + ((t_mom - 1.0) / t_next) * (x_new - x)
            fy, gy = value_grad(y)
            t_mom = t_next
        x, f, g = x_new, f_new, g_new
        alpha = min(alpha * 1.5, 1e8)
    if f <= best_f:
        return x, f, it, gmnorm
    gm_best = float("nan")
    _, g_best = value_grad(best_x)
    gm_best = float(np.max(np.abs(best_x - project_simplex(best_x - g_best))))
    return best_x, best_f, it, gm_best
