"""Exception hierarchy shared by all toporecon modules."""


class TopoReconError(Exception):
    """Base class for every error raised by the package."""


class ParseError(TopoReconError):
    pass


class DimensionError(TopoReconError):
    pass


class EmptyCloudError(TopoReconError):
    pass


class DegenerateCloudError(TopoReconError):
    pass


class SingularCovarianceError(TopoReconError):
    pass


class DegenerateInputError(TopoReconError):
    pass


class NonMonotoneFiltrationError(TopoReconError):
    pass


class NotFaceClosedError(TopoReconError):
    pass


class UnsupportedDimensionError(TopoReconError):
    pass


class TooLargeForOracleError(TopoReconError):
    pass


class DivergenceError(TopoReconError):
    pass


class EmptySuperlevelError(TopoReconError):
    pass


class ConvergenceFailureError(TopoReconError):
    pass


class LengthMismatchError(TopoReconError):
    pass


class EmptyMeshError(TopoReconError):
    pass
