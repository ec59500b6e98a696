"""Exception and warning types raised across the package."""

from __future__ import annotations

import numpy as np

__all__ = [
    "FeynmanError",
    "AsymmetricMatrix",
    "EllipticityViolation",
    "CoefficientUnbounded",
    "MissingDerivatives",
    "BoundaryConditionViolated",
    "NonpositiveTime",
    "UnsupportedDomain",
    "OutsideCollar",
    "OutsideChart",
    "FrameNotOrthonormal",
    "NormalPointsOutward",
    "SingularJacobian",
    "CollarTooWide",
    "IterateBlowup",
    "SingularTridiagonal",
    "PathExplosion",
    "ConfigError",
    "InvariantFailure",
    "KernelTruncatedWarning",
]


class FeynmanError(Exception):
    """Base class for all package errors."""


def _fmt(point) -> str:
    return np.array2string(np.asarray(point, dtype=float), precision=6)


class AsymmetricMatrix(FeynmanError):
    def __init__(self, point, defect: float):
        self.point = np.asarray(point)
        self.defect = float(defect)
        super().__init__(f"coefficient matrix not symmetric at {_fmt(point)} (defect {defect:.3g})")


class EllipticityViolation(FeynmanError):
    def __init__(self, point, eig: float, bound: float):
        self.point = np.asarray(point)
        self.eig = float(eig)
        self.bound = float(bound)
        super().__init__(
            f"smallest eigenvalue {eig:.6g} below ellipticity constant {bound:.6g} at {_fmt(point)}"
        )


class CoefficientUnbounded(FeynmanError):
    def __init__(self, point, value: float, bound: float):
        self.point = np.asarray(point)
        self.value = float(value)
        self.bound = float(bound)
        super().__init__(f"coefficient magnitude {value:.6g} exceeds bound {bound:.6g} at {_fmt(point)}")


class MissingDerivatives(FeynmanError):
    pass


class BoundaryConditionViolated(FeynmanError):
    """Raised when a function fails the ``u = Lu = 0`` boundary test.

    ``residuals`` maps the failed condition name to its largest observed
    magnitude.
    """

    def __init__(self, residuals: dict[str, float], tol: float):
        self.residuals = dict(residuals)
        self.tol = tol
        parts = ", ".join(f"{k}={v:.3g}" for k, v in residuals.items())
        super().__init__(f"boundary condition violated ({parts}; tol {tol:.1g})")


class NonpositiveTime(FeynmanError, ValueError):
    pass


class UnsupportedDomain(FeynmanError, TypeError):
    pass


class OutsideCollar(FeynmanError, ValueError):
    pass


class OutsideChart(FeynmanError, ValueError):
    pass


class FrameNotOrthonormal(FeynmanError, ValueError):
    pass


class NormalPointsOutward(FeynmanError, ValueError):
    pass


class SingularJacobian(FeynmanError):
    pass


class CollarTooWide(FeynmanError, ValueError):
    pass


class IterateBlowup(FeynmanError):
    def __init__(self, step: int, sup: float, bound: float):
        self.step = step
        self.sup = sup
        self.bound = bound
        super().__init__(f"iterate {step} has sup {sup:.6g} above growth bound {bound:.6g}")


class SingularTridiagonal(FeynmanError):
    pass


class PathExplosion(FeynmanError):
    pass


class ConfigError(FeynmanError):
    """Malformed or incomplete experiment configuration."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvariantFailure(FeynmanError):
    def __init__(self, check: str, cause: Exception | str):
        self.check = check
        self.cause = cause
        super().__init__(f"{check} failed: {cause}")


class KernelTruncatedWarning(UserWarning):
    """The quadrature box clips a non-negligible part of the Gaussian kernel."""
