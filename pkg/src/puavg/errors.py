"""Exception types shared across the package.

``DataError`` marks malformed or degenerate input (bad CSV rows, impossible
label configurations); ``NumericalError`` marks failures of the numerical
machinery (all optimizer starts diverged, ill-posed likelihood at the
solution).  The CLI maps them to exit codes 2 and 3.
"""


class PuavgError(Exception):
    pass


class DataError(PuavgError):
    """Invalid or degenerate input data / configuration."""


class NumericalError(PuavgError):
    """A numerical routine failed to produce a usable result."""


class IllPosedLikelihoodError(NumericalError):
    """Semi-supervised mixture term nonpositive on too many rows."""
