"""Exception hierarchy shared by all riskattrib modules.

``InputError`` subclasses signal bad user input or malformed data (CLI exit
code 2); ``NumericalError`` subclasses signal failures of the numerical
machinery on structurally valid input (CLI exit code 3).
"""


class RiskAttribError(Exception):
    """Base class for all library errors."""


class InputError(RiskAttribError):
    """Bad arguments, malformed files, or violated input contracts."""


class NumericalError(RiskAttribError):
    """Numerical failure on otherwise well-formed input."""


# --- matrix kernels / sampling -------------------------------------------

class NotPositiveDefinite(NumericalError):
    """Matrix failed the positive-definiteness (Cholesky pivot) test."""


class DegenerateDf(NumericalError):
    """Wishart-family degrees of freedom at or below the degeneracy bound."""


class TooFewObservations(InputError):
    """Not enough rows to form the requested statistic."""


class DimensionMismatch(InputError):
    """Incompatible matrix/vector dimensions."""


# --- prior / posterior -----------------------------------------------------

class InvalidSlack(InputError):
    """Prior slack parameter must be strictly positive."""


class ImproperPosterior(NumericalError):
    """Posterior degrees of freedom do not exceed the properness bound."""


class ZeroVariance(NumericalError):
    """A diagonal prior target requires strictly positive sample variances."""


# --- shrinkage -------------------------------------------------------------

class DegenerateN(InputError):
    """Too few observations for the requested shrinkage weight formula."""


# --- attribution -----------------------------------------------------------

class InvalidWeights(InputError):
    """Portfolio weights violate the no-short-selling simplex constraints."""


class ZeroSims(InputError):
    """Simulation size must be at least one replication."""


class TooFewDraws(InputError):
    """Need at least two draws to summarize a posterior sample."""


# --- optimization / backtest -----------------------------------------------

class NoConvergence(NumericalError):
    """Optimizer hit the iteration cap before meeting its tolerance.

    Carries the last iterate in ``weights`` so callers can inspect it.
    """

    def __init__(self, message, weights=None):
        super().__init__(message)
        self.weights = weights


class ZeroDispersion(NumericalError):
    """Return series has no dispersion, so the Sharpe ratio is undefined."""


class InsufficientPeriods(InputError):
    """A rolling backtest needs at least two periods."""


# --- ingestion ---------------------------------------------------------------

class ParseError(InputError):
    """Malformed CSV cell; carries 1-based row/column of the offending cell."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateDate(InputError):
    """Two input rows share the same date."""


class EmptyFile(InputError):
    """Input file has no data rows."""


class NonPositivePrice(InputError):
    """Price panels require strictly positive prices."""


class EmptyPeriod(InputError):
    """A requested calendar period contains no observations."""
