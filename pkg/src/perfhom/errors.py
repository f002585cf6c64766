"""Exception hierarchy shared by all modules."""


class PerfhomError(Exception):
    """Base class."""


class ArgumentError(PerfhomError, ValueError):
    pass


class GeometryError(PerfhomError):
    pass


class MeshError(PerfhomError):
    pass


class DeformationError(PerfhomError):
    def __init__(self, msg, worst_triangle=None, worst_area=None):
        super().__init__(msg)
        self.worst_triangle = worst_triangle
        self.worst_area = worst_area


class KineticsError(PerfhomError):
    pass


class UnsupportedError(PerfhomError):
    pass


class NonConvergenceError(PerfhomError):
    def __init__(self, msg, residual=float("nan"), iterations=0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class SolverError(PerfhomError):
    pass


class DomainError(PerfhomError):
    pass


class ScaleError(PerfhomError):
    pass


class ConfigError(PerfhomError):
    pass
