"""Exception hierarchy shared by the fitting, subspace and CLI layers."""


class HMMDRError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HMMDRError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(HMMDRError, ValueError):
    """A parameter container violates its invariants."""


class NumericalError(HMMDRError, ArithmeticError):
    """A factorization or solve failed (singular or non-SPD matrix)."""


class FittingError(HMMDRError, RuntimeError):
    """EM fitting failed; ``causes`` collects per-candidate messages."""

    def __init__(self, message, causes=None):
        super().__init__(message)
        self.causes = list(causes or [])


class PipelineError(HMMDRError, RuntimeError):
    """A stage of the dimension-reduction loop failed."""

    def __init__(self, stage, iteration, cause):
        super().__init__(f"stage {stage!r} failed at iteration {iteration}: {cause}")
        self.stage = stage
        self.iteration = iteration
        self.cause = cause


class InputError(HMMDRError, ValueError):
    """A data file could not be read; ``row``/``column`` locate the problem (1-based rows, header = 1)."""

    def __init__(self, message, path=None, row=None, column=None):
        where = [f"{k} {v}" for k, v in (("row", row), ("column", column)) if v is not None]
        super().__init__(f"{path}: {message}" + (f" ({', '.join(where)})" if where else ""))
        self.path = path
        self.row = row
        self.column = column


class MissingFileError(InputError):
    """The input file does not exist or cannot be opened."""


class MalformedRowError(InputError):
    """A row has the wrong number of fields (or the file has no header)."""


class NonNumericError(InputError):
    """A feature cell does not parse as a finite number."""


class UnknownColumnError(InputError):
    """A requested column name is not in the header."""
