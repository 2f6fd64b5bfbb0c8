"""Exception types raised by spinthermal."""

from __future__ import annotations

from typing import Optional, Tuple


class SpinThermalError(Exception):
    """Base error. ``code`` is the process exit status the CLI reports for it."""

    default_code = 1

    def __init__(self, message: str, code: Optional[int] = None):
        self.message = message
        self.code = self.default_code if code is None else code
        super().__init__(message)


class ValidationError(SpinThermalError, ValueError):
    """Input outside the domain of an operation."""

    default_code = 2


class UndefinedCouplingError(ValidationError):
    """Closed-form two-spin expression requested with J = 0 (xi undefined)."""

    def __init__(self, what: str):
        super().__init__(
            f"{what} needs J != 0; with J = 0 the Gibbs state is diagonal "
            "(fields only), use gibbs_state(diagonalize(two_spin_hamiltonian(spec)), beta) "
            "and note that its concurrence is 0"
        )


class XStateShapeError(ValidationError):
    """State is not of the zero-corner X shape; use the general concurrence path."""


class ResourceLimitError(SpinThermalError):
    """Requested system size exceeds the configured cap."""


class EigensolverError(SpinThermalError):
    """Dense eigensolver failed on one block."""

    def __init__(self, message: str, block=None):
        self.block = block
        super().__init__(f"eigensolver failed on block {block!r}: {message}")


class IndeterminateThresholdError(SpinThermalError):
    """Threshold equation asymptotics cannot decide between a root and no root."""


class ObjectiveError(SpinThermalError):
    """Fit objective could not be evaluated."""

    def __init__(self, message: str, point: Tuple[float, float]):
        self.point = point
        super().__init__(f"objective failed at (alpha1, alpha2) = {point}: {message}")


class RealizationError(SpinThermalError):
    """A disorder realization failed; ``seed`` reproduces it."""

    def __init__(self, message: str, seed: int):
        self.seed = seed
        super().__init__(f"realization with seed {seed} failed: {message}")
