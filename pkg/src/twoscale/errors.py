"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TwoScaleError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TwoScaleError):
    """Invalid, unknown, or inconsistent configuration input."""


class MeshError(TwoScaleError):
    """Grid construction or classification failure."""


class AssemblyError(TwoScaleError):
    """A coefficient or weight violated its pointwise requirements.

    Carries the first offending (element, quadrature point) location.
    """

    def __init__(self, message: str, element: int | None = None,
                 quad_point: int | None = None):
        super().__init__(message)
        self.element = element
        self.quad_point = quad_point


class SolverBreakdownError(TwoScaleError):
    """Factorization failed: the operator is singular or not positive
    definite on the constrained subspace."""


class SolverConvergenceError(TwoScaleError):
    """A solve finished but did not meet the residual tolerance."""


class DegenerateDeformation(TwoScaleError):
    """det F0 dropped to or below j_min somewhere in the cell domain.

    Reports the macroscopic time, the macro quadrature point, and the
    cell-domain location where the deformation gradient degenerated.
    """

    def __init__(self, t: float, x_q, y, det_value: float):
        self.t = t
        self.x_q = tuple(float(v) for v in x_q)
        self.y = tuple(float(v) for v in y)
        self.det_value = float(det_value)
        super().__init__(
            f"deformation gradient degenerate at t={t:.6g}, "
            f"macro point x={self.x_q}, cell point y={self.y}: "
            f"det F0 = {det_value:.6g}"
        )
