"""Exception types raised across the package."""


class MagnetError(Exception):
    """Base class for all package errors."""


class InvalidParams(MagnetError, ValueError):
    pass


class DimensionMismatch(MagnetError, ValueError):
    pass


class IsolatedNode(MagnetError, ValueError):
    def __init__(self, node):
        super().__init__(f"node {node} has degree 0")
        self.node = node


class CholeskyFailure(MagnetError, ArithmeticError):
    pass


class DegenerateFeature(MagnetError, UserWarning):
    pass


class ShapeMismatch(MagnetError, ValueError):
    pass


class DomainError(MagnetError, ArithmeticError):
    pass


class NonScalarRoot(MagnetError, ValueError):
    pass


class SingleClassTrainingSet(MagnetError, ValueError):
    pass


class EmptyDataset(MagnetError, ValueError):
    pass


class UndefinedMetric(MagnetError, ZeroDivisionError):
    pass


class SchemaError(MagnetError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class VersionMismatch(MagnetError, ValueError):
    pass
