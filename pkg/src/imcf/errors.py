"""Exception hierarchy shared by all modules."""


class ImcfError(Exception):
    """Base class for all errors raised by this package."""


class PointOutsideChart(ImcfError):
    pass


class NoConvergence(ImcfError):
    pass


class DegenerateSlice(ImcfError):
    pass


class GridTooCoarse(ImcfError):
    pass


class NonFiniteGeometry(ImcfError):
    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class InadmissibleData(ImcfError):
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SpeedBlowup(ImcfError):
    pass


class StepUnderflow(ImcfError):
    pass


class AreaLawViolated(ImcfError):
    pass


class ModeUnsupported(ImcfError):
    pass


class ConfigError(ImcfError):
    pass
