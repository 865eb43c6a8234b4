"""
Exception hierarchy for the perturbation engine.

Library code raises these; PerturbationServer.handle_request turns them into
result dictionaries. Every SolverRefusal maps to CLI exit code 2, everything
else (bad input, bad config) to exit code 1.
"""

from typing import Optional


class PerturbationError(Exception):
    """Root of all engine errors"""

    def __init__(self, message: str, order: Optional[int] = None):
        self.order = order
        self.reason = message
        if order is not None:
            message = f"order {order}: {message}"
        super().__init__(message)

    def at_order(self, order: int) -> "PerturbationError":
        """Attach the perturbation order at which the failure happened"""
        if self.order is None:
            self.order = order
            self.args = (f"order {order}: {self.reason}",)
        return self


class ConstructionError(PerturbationError, ValueError):
    """Invalid matrix, lattice, basis, potential, policy or settings"""


class SingularPivotError(PerturbationError):
    """Exactly zero pivot met while counting the inertia of h - shift*I"""

    def __init__(self, shift: float, pivot_index: int):
        self.shift = shift
        self.pivot_index = pivot_index
        super().__init__(f"zero pivot at row {pivot_index} for shift {shift!r}")


class SolverRefusal(PerturbationError):
    """The solver refuses to produce numbers it cannot certify"""


class DegenerateState(SolverRefusal):
    """A neighbouring eigenvalue sits within the degeneracy gap of the target"""

    def __init__(self, message: str, energy: float, gap: float, order: Optional[int] = 0):
        self.energy = energy
        self.gap = gap
        super().__init__(message, order=order)


class IllConditioned(SolverRefusal):
    """Bordered hierarchy system is (numerically) singular"""

    def __init__(self, message: str, order: Optional[int] = None,
                 condition: float = float("inf")):
        self.condition = condition
        super().__init__(message, order=order)


class EigensolverError(SolverRefusal):
    """Inverse iteration did not reach the requested residual"""


class StateCrossing(SolverRefusal):
    """State tracking along a coupling grid became ambiguous"""

    def __init__(self, message: str, lam: float):
        self.lam = lam
        super().__init__(message, order=0)


class NoisyDerivative(SolverRefusal):
    """Richardson pair of finite-difference estimates disagrees too much"""

    def __init__(self, message: str, order: int, step: float):
        self.step = step
        super().__init__(message, order=order)
