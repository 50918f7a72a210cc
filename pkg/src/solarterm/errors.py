"""Exception hierarchy.

The CLI maps these onto exit codes: :class:`OutputError` -> 1, :class:`DataError` -> 2,
:class:`EstimationError` -> 3.
"""


class SolarTermError(Exception):
    """Base class for all package errors."""


class DataError(SolarTermError, ValueError):
    """Input data is malformed or violates a precondition."""


class EphemerisError(SolarTermError, RuntimeError):
    """Root bracketing failed while locating a term instant."""


class WindowOverlapError(DataError):
    """Two solar-term windows claim the same trading day."""

    def __init__(self, collisions):
        self.collisions = list(collisions)
        shown = ", ".join(
            f"{day.isoformat()} (terms {a} and {b})" for day, a, b in self.collisions[:5]
        )
        super().__init__(f"overlapping term windows: {shown}")


class EstimationError(SolarTermError, RuntimeError):
    """A model could not be estimated."""


class RankDeficiencyError(EstimationError):
    """Design matrix does not have full column rank."""

    def __init__(self, columns, message=None):
        self.columns = list(columns)
        if message is None:
            message = "design matrix is rank deficient; dependent columns: " + ", ".join(
                map(str, self.columns)
            )
        super().__init__(message)


class CollinearityError(EstimationError):
    """Perfect collinearity found while computing variance inflation factors."""


class LeverageError(EstimationError):
    """An observation has leverage one, so HC3 weights are undefined."""

    def __init__(self, row):
        self.row = int(row)
        super().__init__(f"observation {self.row} has leverage 1; HC3 covariance undefined")


class ConvergenceError(EstimationError):
    """Likelihood maximisation failed after all restarts."""


class OutputError(SolarTermError, OSError):
    """The report bundle could not be written."""
