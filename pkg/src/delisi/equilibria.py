"""Equilibria of the polynomial system via the catastrophe cubic.

The abscissae of the nontrivial equilibria are the roots of

    x0^2 (1 - x0/xc) - psi (1 + x0)^3 = 0,

and the ordinate follows as y0 = alpha2*x0 / (lambda2*(1+x0)).  The cubic is
solved by companion-matrix eigenvalues (robust near double roots) followed by
one Newton polish per root.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, State, jacobian

__all__ = [
    "EquilibriumKind",
    "Equilibrium",
    "CubicCoefficients",
    "equilibrium_cubic",
    "cubic_real_roots",
    "find_equilibria",
    "discriminant",
    "sample_catastrophe_surface",
    "classify",
]

# |det| below DEGENERACY_TOL * ||J|| counts as degenerate; |trace| below
# HOPF_TOL * ||J|| with det > 0 counts as a center candidate.
DEGENERACY_TOL = 1e-8
HOPF_TOL = 1e-8


class EquilibriumKind(enum.Enum):
    TRIVIAL_SADDLE = "trivial_saddle"
    SADDLE = "saddle"
    STABLE_NODE = "stable_node"
    UNSTABLE_NODE = "unstable_node"
    STABLE_FOCUS = "stable_focus"
    UNSTABLE_FOCUS = "unstable_focus"
    CENTER_CANDIDATE = "center_candidate"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class Equilibrium:
    state: State
    eigenvalues: tuple
    trace: float
    det: float
    kind: EquilibriumKind

    @property
    def x(self) -> float:
        return self.state.x

    @property
    def y(self) -> float:
        return self.state.y


@dataclass(frozen=True)
class CubicCoefficients:
    """Coefficients of c3*x^3 + c2*x^2 + c1*x + c0."""

    c3: float
    c2: float
    c1: float
    c0: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c3, self.c2, self.c1, self.c0])

    def __call__(self, x):
        return ((self.c3 * x + self.c2) * x + self.c1) * x + self.c0

    def deriv(self, x):
        return (3 * self.c3 * x + 2 * self.c2) * x + self.c1


def equilibrium_cubic(params_or_psi, xc: float | None = None) -> CubicCoefficients:
    """Cubic whose roots are the equilibrium abscissae.

    Accepts either a ModelParams or an explicit (psi, xc) pair.
    """
    if isinstance(params_or_psi, ModelParams):
        psi, xc = params_or_psi.psi, params_or_psi.xc
    else:
        psi = float(params_or_psi)
        if xc is None:
            raise TypeError("xc required when passing psi directly")
    return CubicCoefficients(-(1.0 / xc + psi), 1.0 - 3.0 * psi, -3.0 * psi, -psi)


def cubic_real_roots(cubic: CubicCoefficients, imag_tol: float = 1e-7) -> np.ndarray:
    """Real roots of the cubic, companion eigenvalues + one Newton polish.

    Near a double root the companion eigenvalues come back as a conjugate
    pair with small imaginary part; those are accepted when the imaginary
    part is below ``imag_tol`` relative to the root magnitude.
    """
    coeffs = cubic.as_array()
    if abs(coeffs[0]) < 1e-300:
        roots = np.roots(coeffs[1:])
    else:
        roots = np.roots(coeffs)
    out = []
    for r in roots:
        if abs(r.imag) > imag_tol * max(1.0, abs(r)):
            continue
        x = r.real
        # single Newton step; skip when p' is tiny (double root already polished
        # as well as conditioning allows)
        d = cubic.deriv(x)
        if abs(d) > 1e-14:
            x = x - cubic(x) / d
        out.append(x)
    return np.array(sorted(out))


def discriminant(params_or_psi, xc: float | None = None) -> float:
    """Delta = 4*xc^2 - 27*(1+xc)^2*psi; zero on the fold locus."""
    if isinstance(params_or_psi, ModelParams):
        psi, xc = params_or_psi.psi, params_or_psi.xc
    else:
        psi = float(params_or_psi)
    return 4.0 * xc**2 - 27.0 * (1 + xc) ** 2 * psi


def classify(params: ModelParams, s: State, *,
             degeneracy_tol: float = DEGENERACY_TOL,
             hopf_tol: float = HOPF_TOL) -> Equilibrium:
    """Classify an equilibrium from its Jacobian spectrum."""
    J = jacobian(params, s.as_array())
    tr = float(J[0, 0] + J[1, 1])
    det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    norm = float(np.max(np.abs(J))) or 1.0
    disc = tr * tr - 4 * det
    if disc >= 0:
        sq = np.sqrt(disc)
        eig = ((tr - sq) / 2 + 0j, (tr + sq) / 2 + 0j)
    else:
        sq = np.sqrt(-disc)
        eig = (complex(tr / 2, -sq / 2), complex(tr / 2, sq / 2))

    if s.x == 0.0 and s.y == 0.0:
        kind = EquilibriumKind.TRIVIAL_SADDLE
    elif abs(det) < degeneracy_tol * norm**2:
        kind = EquilibriumKind.DEGENERATE
    elif det < 0:
        kind = EquilibriumKind.SADDLE
    elif abs(tr) < hopf_tol * norm:
        kind = EquilibriumKind.CENTER_CANDIDATE
    elif disc >= 0:
        kind = EquilibriumKind.STABLE_NODE if tr < 0 else EquilibriumKind.UNSTABLE_NODE
    else:
        kind = EquilibriumKind.STABLE_FOCUS if tr < 0 else EquilibriumKind.UNSTABLE_FOCUS
    return Equilibrium(state=s, eigenvalues=eig, trace=tr, det=det, kind=kind)


def find_equilibria(params: ModelParams, *, include_negative: bool = False,
                    degeneracy_tol: float = DEGENERACY_TOL,
                    hopf_tol: float = HOPF_TOL,
                    fold_tol: float = DEGENERACY_TOL) -> list[Equilibrium]:
    """All equilibria: the trivial one plus positive real roots of the cubic.

    Sorted by abscissa.  Near-degenerate double roots are kept and flagged
    DEGENERATE rather than dropped; just above the fold (discriminant
    negative but within ``fold_tol`` relative) the lost double root is
    recovered as the stationary point of the cubic and flagged DEGENERATE.
    Negative cubic roots are excluded unless ``include_negative`` is set
    (debug aid).
    """
    cubic = equilibrium_cubic(params)
    eqs = [classify(params, State(0.0, 0.0),
                    degeneracy_tol=degeneracy_tol, hopf_tol=hopf_tol)]

    def add(x0: float, force_degenerate: bool = False):
        y0 = params.alpha2 * x0 / (params.lambda2 * (1 + x0))
        e = classify(params, State(float(x0), float(y0)),
                     degeneracy_tol=degeneracy_tol, hopf_tol=hopf_tol)
        if force_degenerate and e.kind is not EquilibriumKind.TRIVIAL_SADDLE:
            e = Equilibrium(e.state, e.eigenvalues, e.trace, e.det,
                            EquilibriumKind.DEGENERATE)
        eqs.append(e)

    roots = cubic_real_roots(cubic)
    positive = [x for x in roots if x > 0]
    for x0 in roots:
        if x0 == 0.0 or (x0 < 0 and not include_negative):
            continue
        add(x0)
    if not positive:
        delta = discriminant(params)
        if delta < 0 and abs(delta) <= fold_tol * 4.0 * params.xc**2:
            # positive stationary point of the cubic: the shadow double root
            disc = cubic.c2**2 - 3 * cubic.c3 * cubic.c1
            if disc >= 0:
                stat = [(-cubic.c2 + s * np.sqrt(disc)) / (3 * cubic.c3)
                        for s in (+1.0, -1.0)]
                stat = [x for x in stat if x > 0]
                if stat:
                    add(float(min(stat, key=lambda x: abs(cubic(x)))),
                        force_degenerate=True)
    eqs.sort(key=lambda e: e.x)
    return eqs


def sample_catastrophe_surface(xc: float, psi_grid) -> list[tuple[float, float]]:
    """Sheet points (psi, x0) of the catastrophe surface at fixed xc.

    For each psi >= 0 every nonnegative real root of the cubic is emitted;
    sheets merge where the discriminant vanishes.
    """
    pts = []
    for psi in psi_grid:
        psi = float(psi)
        if psi < 0:
            raise ValueError("psi grid values must be >= 0")
        if psi == 0.0:
            # degenerate limit: x0^2 (1 - x0/xc) = 0
            pts.extend([(psi, 0.0), (psi, float(xc))])
            continue
        for r in cubic_real_roots(equilibrium_cubic(psi, xc)):
            if r >= 0:
                pts.append((psi, float(r)))
    return pts
