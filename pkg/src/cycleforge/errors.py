"""Exception hierarchy shared across the package."""


class CycleForgeError(Exception):
    """Base class for all package errors."""


class ContractError(CycleForgeError, ValueError):
    """An argument violates an operation's documented precondition."""


class GeometryError(ContractError):
    """Raster dimensions do not agree."""


class LevelCountError(ContractError):
    """Pyramid depth is invalid for the raster size."""


class WrongKindError(ContractError):
    """A pyramid of the wrong kind was supplied."""


class ValidationError(ContractError):
    """Input data failed validation (ranges, emptiness, schema)."""


class DegenerateError(ContractError):
    """A vector has zero norm where a direction is required."""


class NumericalError(CycleForgeError, ArithmeticError):
    """A numerical routine produced a result outside tolerance."""


class UnfillableError(CycleForgeError):
    """An inpainting region has no boundary pixels to diffuse from."""


class PairingError(ContractError):
    """Triplets from different pairs were combined."""
