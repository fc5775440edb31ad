"""Vector fields of the tumor-immune predator-prey model.

Two forms of the model are provided: the original predator-prey system with
the allometric ``y^(2/3)`` interaction, and the polynomial system obtained by
the substitution ``y_bar = y**3`` together with the time rescaling
``dt/dt_bar = 1 + x``.  The polynomial form is the canonical one used
throughout the toolkit; the original form exists for validation only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "ModelParams",
    "State",
    "TaylorCoefficients",
    "eval_polynomial_field",
    "eval_original_field",
    "jacobian",
    "taylor_expand",
    "composite_params",
]


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class ModelParams:
    """The five positive model parameters.

    lambda1: lymphocyte decay rate
    lambda2: tumor growth rate
    alpha1:  stimulation coefficient
    alpha2:  binding coefficient
    xc:      lymphocyte carrying abscissa
    """

    lambda1: float
    lambda2: float
    alpha1: float
    alpha2: float
    xc: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "alpha1", "alpha2", "xc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"parameter {name} must be finite and > 0, got {v!r}")

    @property
    def psi(self) -> float:
        """Composite parameter lambda1*lambda2**2 / (alpha1*alpha2**2)."""
        return self.lambda1 * self.lambda2**2 / (self.alpha1 * self.alpha2**2)

    @property
    def lam(self) -> float:
        """Composite parameter lambda2/lambda1."""
        return self.lambda2 / self.lambda1

    @classmethod
    def from_composites(cls, psi: float, lam: float, alpha1: float, alpha2: float,
                        xc: float) -> "ModelParams":
        """Invert (psi, lam) -> (lambda1, lambda2) at fixed alpha1, alpha2, xc.

        The gauge freedom of the composite parametrization is fixed by the
        given alpha values: lambda1 = (psi*alpha1*alpha2**2 / lam**2)**(1/3),
        lambda2 = lam*lambda1.
        """
        if psi <= 0 or lam <= 0:
            raise DomainError(f"psi and lam must be positive, got {psi!r}, {lam!r}")
        lambda1 = (psi * alpha1 * alpha2**2 / lam**2) ** (1.0 / 3.0)
        return cls(lambda1, lam * lambda1, alpha1, alpha2, xc)

    def replace(self, **kw) -> "ModelParams":
        d = self.to_dict()
        d.update(kw)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "xc": self.xc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        try:
            return cls(**{k: float(d[k]) for k in
                          ("lambda1", "lambda2", "alpha1", "alpha2", "xc")})
        except KeyError as e:
            raise DomainError(f"missing parameter key {e.args[0]!r}") from e

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class State:
    """A point of the scaled phase plane (x lymphocytes, y = y_bar**(1/3))."""

    x: float
    y: float

    def in_roi(self, params: ModelParams) -> bool:
        """Membership in the region of real interest 0 < x < xc, 0 < y."""
        return 0.0 < self.x < params.xc and self.y > 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def _check_finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise DomainError("non-finite input")


def eval_polynomial_field(params: ModelParams, s) -> np.ndarray:
    """Right-hand side of the polynomial system at state ``s = (x, y)``.

    Vectorized: ``s`` may be a (2,) point or an (n, 2) batch.
    """
    s = np.asarray(s, dtype=float)
    _check_finite(s)
    x, y = s[..., 0], s[..., 1]
    p = params
    fx = -p.lambda1 * x * (1 + x) + p.alpha1 * (1 - x / p.xc) * x * y * y
    fy = p.lambda2 * (1 + x) * y - p.alpha2 * x
    return np.stack([fx, fy], axis=-1)


def eval_original_field(params: ModelParams, s) -> np.ndarray:
    """Right-hand side of the original (non-polynomial) system.

    Here the second state component is the unscaled tumor variable y_bar.
    Defined only for y_bar > 0: the field loses Lipschitz continuity at
    y_bar = 0 and solutions there are not unique.
    """
    s = np.asarray(s, dtype=float)
    _check_finite(s)
    x, ybar = s[..., 0], s[..., 1]
    if np.any(ybar <= 0):
        raise DomainError("original field requires y > 0 (non-Lipschitz locus)")
    p = params
    frac = p.alpha1 * x * ybar ** (2.0 / 3.0) / (1 + x)
    fx = -p.lambda1 * x + frac * (1 - x / p.xc)
    fy = p.lambda2 * ybar - p.alpha2 * x * ybar ** (2.0 / 3.0) / (1 + x)
    return np.stack([fx, fy], axis=-1)


def jacobian(params: ModelParams, s) -> np.ndarray:
    """Exact Jacobian of the polynomial field at ``s``."""
    s = np.asarray(s, dtype=float)
    _check_finite(s)
    x, y = s[..., 0], s[..., 1]
    p = params
    dfx_dx = -p.lambda1 * (1 + 2 * x) + p.alpha1 * (1 - 2 * x / p.xc) * y * y
    dfx_dy = 2 * p.alpha1 * x * y * (1 - x / p.xc)
    dfy_dx = p.lambda2 * y - p.alpha2
    dfy_dy = p.lambda2 * (1 + x)
    return np.stack([np.stack([dfx_dx, dfx_dy], axis=-1),
                     np.stack([dfy_dx, dfy_dy], axis=-1)], axis=-2)


@dataclass(frozen=True)
class TaylorCoefficients:
    """Taylor expansion of the polynomial field about a base point.

    The expansion is exact and finite:

        x1' = a0 + a1*x1 + a2*y1 + a3*x1^2 + a4*y1^2 + a5*x1*y1
                 + a6*x1*y1^2 + a7*x1^2*y1 + a8*x1^2*y1^2
        y1' = b0 + b1*x1 + b2*y1 + b3*x1*y1
    """

    a: tuple  # a0..a8
    b: tuple  # b0..b3
    base_point: State

    def evaluate(self, x1: float, y1: float) -> np.ndarray:
        a, b = self.a, self.b
        fx = (a[0] + a[1] * x1 + a[2] * y1 + a[3] * x1**2 + a[4] * y1**2
              + a[5] * x1 * y1 + a[6] * x1 * y1**2 + a[7] * x1**2 * y1
              + a[8] * x1**2 * y1**2)
        fy = b[0] + b[1] * x1 + b[2] * y1 + b[3] * x1 * y1
        return np.array([fx, fy])

    @property
    def linear_matrix(self) -> np.ndarray:
        return np.array([[self.a[1], self.a[2]], [self.b[1], self.b[2]]])


def taylor_expand(params: ModelParams, base: State) -> TaylorCoefficients:
    """Expansion coefficients of the shifted polynomial field.

    The linear x1-coefficient uses lambda1 (not the composite lambda), which
    is the dimensionally consistent choice; it reproduces the exact Jacobian.
    """
    p = params
    x0, y0 = base.x, base.y
    _check_finite(np.array([x0, y0]))
    a = (
        -p.lambda1 * x0 * (1 + x0) + p.alpha1 * (1 - x0 / p.xc) * x0 * y0**2,
        -p.lambda1 * (1 + 2 * x0) + p.alpha1 * (1 - 2 * x0 / p.xc) * y0**2,
        2 * p.alpha1 * x0 * y0 * (1 - x0 / p.xc),
        -p.lambda1 - p.alpha1 * y0**2 / p.xc,
        p.alpha1 * x0 * (1 - x0 / p.xc),
        2 * p.alpha1 * y0 * (1 - 2 * x0 / p.xc),
        p.alpha1 * (1 - 2 * x0 / p.xc),
        -2 * p.alpha1 * y0 / p.xc,
        -p.alpha1 / p.xc,
    )
    b = (
        p.lambda2 * y0 * (1 + x0) - p.alpha2 * x0,
        p.lambda2 * y0 - p.alpha2,
        p.lambda2 * (1 + x0),
        p.lambda2,
    )
    return TaylorCoefficients(a=a, b=b, base_point=base)


def composite_params(params: ModelParams) -> tuple[float, float]:
    """Return the composite pair (psi, lambda)."""
    return params.psi, params.lam
