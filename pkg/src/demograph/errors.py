"""Exception hierarchy. The CLI maps each class to an exit code."""


class DemographError(Exception):
    exit_code = 1


class DataError(DemographError, ValueError):
    """Input data violates a documented format or invariant."""

    exit_code = 2


class NumericError(DemographError, ArithmeticError):
    """A numerical routine produced non-finite or degenerate output."""

    exit_code = 3


class MissingArtifactError(DemographError, FileNotFoundError):
    """A pipeline stage was run before the stage that produces its input."""

    exit_code = 2

    def __init__(self, path, stage):
        self.path = path
        self.stage = stage
        super().__init__(f"missing artifact {path}; run the '{stage}' stage first")
