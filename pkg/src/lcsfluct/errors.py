"""Exception hierarchy. Every error is a ValueError so callers can catch broadly."""


class LcsFluctError(ValueError):
    pass


class ValidationError(LcsFluctError):
    """A parameter failed validation. ``field`` names the offending parameter."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvalidAlphabetError(ValidationError):
    def __init__(self, k):
        super().__init__("k", f"alphabet size must be an integer >= 2, got {k!r}")


class ShapeError(LcsFluctError):
    pass


class NoBlockError(LcsFluctError):
    pass


class SizeCapError(LcsFluctError):
    pass


class FitError(LcsFluctError):
    pass


class NoSolutionError(LcsFluctError):
    pass
