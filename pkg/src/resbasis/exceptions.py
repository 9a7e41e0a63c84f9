"""Exception hierarchy shared across the package."""


class ResidualBasisError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(ResidualBasisError, ValueError):
    pass


class MeshFormatError(ResidualBasisError, ValueError):
    pass


class AssemblyError(ResidualBasisError):
    pass


class PartialSpectrumError(ResidualBasisError):
    """Fewer finite eigenvalues were found than requested.

    The modes that were found are attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoConvergenceError(ResidualBasisError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IncompleteSpectrumError(ResidualBasisError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class NoPartnerError(ResidualBasisError, ValueError):
    pass


class ConstructionError(ResidualBasisError):
    pass


class FieldFormatError(ResidualBasisError, ValueError):
    pass


class MismatchError(ResidualBasisError, ValueError):
    """Field and basis live on different meshes or wavenumbers."""
