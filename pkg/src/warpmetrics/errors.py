"""Exception hierarchy shared by every warpmetrics module."""


class WarpMetricsError(Exception):
    pass


class InvalidDimensionError(WarpMetricsError, ValueError):
    pass


class InvalidInputError(WarpMetricsError, ValueError):
    pass


class InvalidMeshError(WarpMetricsError, ValueError):
    pass


class DegenerateInputError(WarpMetricsError, ValueError):
    pass


class NondifferentiableError(WarpMetricsError, ValueError):
    """Raised when a gradient is requested at a cell boundary where the
    one-sided Jacobians of the piecewise mesh map disagree."""


class ParameterError(WarpMetricsError, ValueError):
    pass


class UndefinedStatisticError(WarpMetricsError, ValueError):
    pass


class PredictorError(WarpMetricsError):
    def __init__(self, message, image_id=None):
        super().__init__(message if image_id is None else f"[{image_id}] {message}")
        self.image_id = image_id


class FormatError(WarpMetricsError, ValueError):
    pass
