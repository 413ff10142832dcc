"""Exception hierarchy shared across the package."""


class EmorecolorError(Exception):
    """Base class for all package errors."""


class EmptyDatabase(EmorecolorError):
    pass


class EmptyCandidates(EmorecolorError):
    pass


class SignatureMismatch(EmorecolorError):
    pass


class UnknownBackend(EmorecolorError):
    pass


class BackendFailure(EmorecolorError):
    pass


class ParseError(EmorecolorError):
    pass


class ManifestParseError(ParseError):
    pass


class MissingSidecar(EmorecolorError):
    pass


class BinningMismatch(EmorecolorError):
    pass


class AllZeroWeights(EmorecolorError):
    pass


class StageError(EmorecolorError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
