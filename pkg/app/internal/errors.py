class ScopeError(ValueError):
    """Base class for every pipeline error that should end a run with a clean message."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigurationError(ScopeError):
    pass


class ArtifactMissingError(ScopeError):
    pass
