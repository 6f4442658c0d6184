"""Exception hierarchy."""


class NavFilterError(Exception):
    pass


class EmptyLandmarkSet(NavFilterError, ValueError):
    pass


class InsufficientFeatures(NavFilterError):
    """Fewer than three non-collinear weighted features are available."""


class UnknownLandmarkId(NavFilterError, KeyError):
    pass


class EnvelopeViolation(NavFilterError, ValueError):
    """An error channel left the open interval where its transform is defined."""


class NonMonotoneTime(NavFilterError, ValueError):
    pass


class RateMismatch(NavFilterError, ValueError):
    pass


class ParseError(NavFilterError, ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class NoTimeOverlap(NavFilterError, ValueError):
    pass


class DegenerateTrajectory(NavFilterError, ValueError):
    pass


class ConfigError(NavFilterError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
