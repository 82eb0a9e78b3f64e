import numpy as np
import pytest

from puavg.data import DomainDataset, LinkConstants
from puavg.likelihoods import Objective


def fd_gradient(fun, x, step=1e-6):
    """Central finite differences of a scalar function (independent oracle
    for every analytic gradient in the package)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        out[j] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return out


def rel_err(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return np.max(np.abs(approx - exact) / np.maximum(np.abs(exact), 1e-10))


def random_pu_dataset(rng, n, p, beta_true=None, label_rate=0.3,
                      domain_id="pu"):
    """PU draw from a logistic DGP: positives get labeled at label_rate."""
    if beta_true is None:
        beta_true = rng.normal(size=p)
    x = rng.normal(size=(n, p))
    prob = 1.0 / (1.0 + np.exp(-(x @ beta_true)))
    y = (rng.random(n) < prob).astype(float)
    z = ((y == 1) & (rng.random(n) < label_rate)).astype(float)
    if z.sum() == 0:
        z[np.argmax(y)] = 1.0
        y[np.argmax(y)] = 1.0
    if z.sum() == n:
        z[0] = 0.0
    pi1 = float(np.clip(y.mean(), 0.05, 0.95))
    return DomainDataset.pu(x, z, pi1=pi1, domain_id=domain_id), y


def pu_objective(rng, n, p, b, label_rate=0.3):
    ds, _ = random_pu_dataset(rng, n, p, label_rate=label_rate)
    return Objective(data=ds, constants=LinkConstants(b=b))


def small_pu_instance():
    """Fixed p=2, n=60 PU instance with externally set constant b=0.75.

    The optimum sits well inside [-3, 3]^2, so the brute-force lattice search
    below brackets it."""
    rng = np.random.default_rng(4242)
    ds, _ = random_pu_dataset(rng, 60, 2, beta_true=np.array([1.0, -0.7]),
                              label_rate=0.45)
    return Objective(data=ds, constants=LinkConstants(b=0.75))


def grid_search_minimum(obj, lo=-3.0, hi=3.0, res=0.01):
    """Brute-force lattice minimizer of a 2-d objective (oracle for the
    smooth fitter; only evaluates the objective, never its gradient)."""
    grid = np.arange(lo, hi + res / 2, res)
    best_val = np.inf
    best = None
    x, z, b = obj.data.x, obj.data.z, obj.constants.b
    from puavg.likelihoods import pu_mean_nll
    for b0 in grid:
        etas = np.outer(x[:, 0], np.ones_like(grid)) * b0 + \
            np.outer(x[:, 1], grid)
        lb = np.log1p(b)
        core = ((z[:, None] - 1.0) * np.logaddexp(0.0, -etas)
                + np.logaddexp(0.0, etas + lb) - etas).mean(axis=0) \
            - np.log(b) * z.mean()
        j = int(np.argmin(core))
        if core[j] < best_val:
            best_val = float(core[j])
            best = np.array([b0, grid[j]])
    return best, best_val


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
