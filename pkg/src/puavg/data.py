"""Domain datasets and the nuisance constants of their likelihoods.

A domain is a covariate matrix plus one of three labeling schemes:

* ``binary``: every row carries a true label y in {0, 1};
* ``pu``: rows carry only a presence indicator z (z=1 means a confirmed
  positive, z=0 means unlabeled);
* ``semi``: rows carry z, and y is observed exactly on the z=1 rows.

Each incomplete scheme needs constants derived from the label counts and the
(assumed known) class prior pi1 = Pr(y = 1):

    b  = n_L / (pi1 * n_U)                               (pu)
    h0 = n_L0 / (n_L0 + pi0 * n_U)                        (semi)
    h1 = n_L1 / (n_L1 + pi1 * n_U)                        (semi)
    nu = log[(n_L1 + pi1 n_U) pi0] - log[(n_L0 + pi0 n_U) pi1]

with pi0 = 1 - pi1.  Datasets are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DataError

SCHEMES = ("binary", "pu", "semi")


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DomainDataset:
    """One domain's design matrix and labels. Use the classmethod builders."""

    x: np.ndarray
    scheme: str
    pi1: float
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    domain_id: str = ""
    has_intercept_column: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))
        if self.x.ndim != 2:
            raise DataError(f"features must be a 2-d matrix, got ndim={self.x.ndim}")
        if not np.all(np.isfinite(self.x)):
            raise DataError(f"domain {self.domain_id!r}: non-finite feature values")
        n = self.x.shape[0]
        if self.scheme not in SCHEMES:
            raise DataError(f"unknown scheme {self.scheme!r}")
        if not (0.0 < self.pi1 < 1.0):
            raise DataError(f"pi1 must lie in (0, 1), got {self.pi1}")
        if self.scheme == "binary":
            self._check_indicator("y", n)
            object.__setattr__(self, "z", None)
        elif self.scheme == "pu":
            self._check_indicator("z", n)
            object.__setattr__(self, "y", None)
            nl = int(self.z.sum())
            if nl == 0 or nl == n:
                raise DataError(
                    f"domain {self.domain_id!r}: PU data needs at least one "
                    "labeled and one unlabeled row"
                )
        else:
            self._check_indicator("z", n)
            if self.y is None:
                raise DataError("semi scheme requires y on the labeled rows")
            y = _frozen_array(self.y)
            if y.shape != (n,):
                raise DataError(f"y has shape {y.shape}, expected ({n},)")
            observed = np.isfinite(y)
            if not np.array_equal(observed, self.z == 1):
                raise DataError("semi scheme: y must be present exactly where z=1")
            if not np.all(np.isin(y[observed], (0.0, 1.0))):
                raise DataError("semi scheme: observed y values must be 0 or 1")
            object.__setattr__(self, "y", y)

    def _check_indicator(self, name: str, n: int):
        v = getattr(self, name)
        if v is None:
            raise DataError(f"scheme {self.scheme!r} requires a {name} vector")
        v = _frozen_array(v)
        if v.shape != (n,):
            raise DataError(f"{name} has shape {v.shape}, expected ({n},)")
        if not np.all(np.isin(v, (0.0, 1.0))):
            raise DataError(f"{name} values must be 0 or 1")
        object.__setattr__(self, name, v)

    # -- builders ----------------------------------------------------------

    @classmethod
    def binary(cls, x, y, pi1: float | None = None, domain_id: str = "",
               has_intercept_column: bool = False) -> "DomainDataset":
        """Fully labeled domain. If pi1 is omitted it defaults to the
        empirical positive rate (clipped away from {0,1}); the binary
        likelihood itself never uses it."""
        y = np.asarray(y, dtype=float)
        if pi1 is None:
            n = max(len(y), 1)
            pi1 = float(np.clip(y.mean() if n else 0.5, 0.5 / n, 1.0 - 0.5 / n))
        return cls(x=x, scheme="binary", pi1=pi1, y=y, domain_id=domain_id,
                   has_intercept_column=has_intercept_column)

    @classmethod
    def pu(cls, x, z, pi1: float, domain_id: str = "",
           has_intercept_column: bool = False) -> "DomainDataset":
        return cls(x=x, scheme="pu", pi1=pi1, z=z, domain_id=domain_id,
                   has_intercept_column=has_intercept_column)

    @classmethod
    def semi(cls, x, z, y, pi1: float, domain_id: str = "",
             has_intercept_column: bool = False) -> "DomainDataset":
        """y may use NaN on the z=0 rows (and must be NaN exactly there)."""
        return cls(x=x, scheme="semi", pi1=pi1, y=y, z=z, domain_id=domain_id,
                   has_intercept_column=has_intercept_column)

    # -- views -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_labeled(self) -> int:
        if self.z is None:
            return self.n
        return int(self.z.sum())

    @property
    def n_unlabeled(self) -> int:
        return self.n - self.n_labeled

    def labeled_counts(self) -> tuple[int, int]:
        """(n_L0, n_L1) for the semi scheme."""
        if self.scheme != "semi":
            raise ValueError("labeled_counts is only defined for semi data")
        obs = self.y[self.z == 1]
        n_l1 = int(obs.sum())
        return len(obs) - n_l1, n_l1

    def subset(self, rows: np.ndarray) -> "DomainDataset":
        """Row subset preserving the scheme (used by fold splits)."""
        y = self.y[rows] if self.y is not None else None
        z = self.z[rows] if self.z is not None else None
        return DomainDataset(x=self.x[rows], scheme=self.scheme, pi1=self.pi1,
                             y=y, z=z, domain_id=self.domain_id,
                             has_intercept_column=self.has_intercept_column)


@dataclass(frozen=True)
class LinkConstants:
    """Nuisance constants of a domain likelihood (empty for binary)."""

    b: Optional[float] = None
    h0: Optional[float] = None
    h1: Optional[float] = None
    nu: Optional[float] = None
    counts: tuple[int, ...] = field(default=())


def pu_constant(n_l: int, n_u: int, pi1: float) -> LinkConstants:
    """b = n_L / (pi1 * n_U) from the PU label counts."""
    if n_l < 1 or n_u < 1:
        raise DataError(f"degenerate PU dataset: n_L={n_l}, n_U={n_u}")
    if not (0.0 < pi1 < 1.0):
        raise DataError(f"pi1 must lie in (0, 1), got {pi1}")
    b = n_l / (pi1 * n_u)
    if not np.isfinite(np.log(b)):
        raise DataError(f"degenerate PU constant b={b}")
    return LinkConstants(b=b, counts=(n_l, n_u))


def semi_constants(n_l0: int, n_l1: int, n_u: int, pi1: float) -> LinkConstants:
    """h0, h1 and the offset nu from the semi-supervised label counts."""
    if n_l0 < 1 or n_l1 < 1 or n_u < 1:
        raise DataError(
            f"degenerate semi-supervised dataset: n_L0={n_l0}, n_L1={n_l1}, n_U={n_u}"
        )
    if not (0.0 < pi1 < 1.0):
        raise DataError(f"pi1 must lie in (0, 1), got {pi1}")
    pi0 = 1.0 - pi1
    h0 = n_l0 / (n_l0 + pi0 * n_u)
    h1 = n_l1 / (n_l1 + pi1 * n_u)
    nu = np.log((n_l1 + pi1 * n_u) * pi0) - np.log((n_l0 + pi0 * n_u) * pi1)
    return LinkConstants(h0=h0, h1=h1, nu=float(nu), counts=(n_l0, n_l1, n_u))


def constants_for(data: DomainDataset) -> LinkConstants:
    """Scheme-appropriate constants computed from a dataset's own counts."""
    if data.scheme == "binary":
        return LinkConstants()
    if data.scheme == "pu":
        return pu_constant(data.n_labeled, data.n_unlabeled, data.pi1)
    n_l0, n_l1 = data.labeled_counts()
    return semi_constants(n_l0, n_l1, data.n_unlabeled, data.pi1)
