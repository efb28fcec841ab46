"""Exception types raised across the package."""


class SagError(ValueError):
    """Base class for all sagtrack errors."""


class DegenerateCovarianceError(SagError):
    pass


class InvalidTransformError(SagError):
    pass


class DegenerateViewError(SagError):
    """Camera centre inside a 1-sigma ellipsoid, or a point on/behind the camera plane."""


class NonEllipticProjectionError(DegenerateViewError):
    """The silhouette of an ellipsoid is not an ellipse (it straddles the principal plane)."""


class InvalidInputError(SagError):
    pass


class InvalidPoseError(InvalidInputError):
    pass


class ParseError(SagError):
    """Malformed input file. Carries the file name and 1-based line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
