"""Closed-form bifurcation sets: saddle-node, Takens-Bogdanov, Hopf, Bautin.

Everything here is expressed in the composite parameters

    psi = lambda1*lambda2**2/(alpha1*alpha2**2),   lam = lambda2/lambda1,

with the inverse map to (lambda1, lambda2) fixed by the gauge (alpha1,
alpha2).  The fold locus is psi = 4*xc^2/(27*(1+xc)^2); on it the point with
lam = 2*(3+xc)/(3*(1+xc)) is the Takens-Bogdanov point.  The Hopf/neutral-
saddle surface is a cubic in lam, and the Bautin point is the Hopf point
with vanishing first Lyapunov coefficient at

    lam = (xc-3)/(3*(1+xc)),
    psi = sqrt(xc)*((xc-27)*sqrt(xc) + (9+xc)^(3/2))/(27*(1+xc)^2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import DomainError, ModelParams, State, jacobian
from .equilibria import (Equilibrium, classify, cubic_real_roots,
                         equilibrium_cubic, discriminant)

__all__ = [
    "LocusKind",
    "LocusPoint",
    "fold_psi",
    "bt_lambda",
    "bautin_lambda",
    "bautin_psi",
    "saddle_node_curve",
    "bt_point",
    "bautin_point",
    "hopf_cubic_coefficients",
    "hopf_lambda_roots",
    "hopf_point",
    "trace_zero_solutions",
]

BT_LAMBDA_TOL = 1e-9


class LocusKind(enum.Enum):
    SADDLE_NODE = "saddle_node"
    TAKENS_BOGDANOV = "takens_bogdanov"
    HOPF = "hopf"
    NEUTRAL_SADDLE = "neutral_saddle"
    BAUTIN = "bautin"


@dataclass(frozen=True)
class LocusPoint:
    kind: LocusKind
    params: ModelParams
    equilibrium: Equilibrium
    diagnostics: dict = field(default_factory=dict)


def fold_psi(xc: float) -> float:
    """psi on the fold (saddle-node) locus."""
    return 4.0 * xc**2 / (27.0 * (1 + xc) ** 2)


def bt_lambda(xc: float) -> float:
    """lam at the Takens-Bogdanov point."""
    return 2.0 * (3 + xc) / (3.0 * (1 + xc))


def bautin_lambda(xc: float) -> float:
    """lam at the Bautin (generalized Hopf) point; positive only for xc > 3."""
    return (xc - 3.0) / (3.0 * (1 + xc))


def bautin_psi(xc: float) -> float:
    """psi at the Bautin point."""
    s = np.sqrt(xc)
    return s * ((xc - 27.0) * s + (9.0 + xc) ** 1.5) / (27.0 * (1 + xc) ** 2)


def _fold_equilibrium(params: ModelParams) -> Equilibrium:
    """The positive double root of the cubic, classified (degenerate)."""
    roots = cubic_real_roots(equilibrium_cubic(params))
    pos = roots[roots > 0]
    if len(pos) == 0:
        raise DomainError("no positive equilibrium on the fold locus")
    # the double root minimizes |p'|
    cubic = equilibrium_cubic(params)
    x0 = float(min(pos, key=lambda r: abs(cubic.deriv(r))))
    y0 = params.alpha2 * x0 / (params.lambda2 * (1 + x0))
    return classify(params, State(x0, y0))


def saddle_node_curve(alpha1: float, alpha2: float, xc: float,
                      lambda_grid) -> list[LocusPoint]:
    """Saddle-node curve sampled over a grid of lam = lambda2/lambda1.

    Each output point lies on the fold psi = 4*xc^2/(27*(1+xc)^2); grid
    values hitting the BT lam are tagged TAKENS_BOGDANOV instead.
    """
    psi = fold_psi(xc)
    lam_bt = bt_lambda(xc)
    out = []
    for lam in lambda_grid:
        lam = float(lam)
        if lam <= 0:
            raise DomainError("lambda grid must be positive")
        params = ModelParams.from_composites(psi, lam, alpha1, alpha2, xc)
        eq = _fold_equilibrium(params)
        kind = LocusKind.SADDLE_NODE
        if abs(lam - lam_bt) <= BT_LAMBDA_TOL * lam_bt:
            kind = LocusKind.TAKENS_BOGDANOV
        out.append(LocusPoint(kind, params, eq,
                              {"psi": psi, "lam": lam,
                               "delta": discriminant(params)}))
    return out


def bt_point(alpha1: float, alpha2: float, xc: float) -> LocusPoint:
    """The Takens-Bogdanov point for the given gauge."""
    psi, lam = fold_psi(xc), bt_lambda(xc)
    params = ModelParams.from_composites(psi, lam, alpha1, alpha2, xc)
    eq = _fold_equilibrium(params)
    return LocusPoint(LocusKind.TAKENS_BOGDANOV, params, eq,
                      {"psi": psi, "lam": lam,
                       "trace": eq.trace, "det": eq.det})


def hopf_cubic_coefficients(psi: float, xc: float) -> np.ndarray:
    """Coefficients (descending) of the Hopf/neutral-saddle cubic in lam."""
    return np.array([
        (1 + xc) ** 3 * psi,
        -(psi * xc**3 + (1 - psi) * xc**2 - 5 * psi * xc - 3 * psi),
        (xc**2 + 4 * xc + 3) * psi,
        (1 + xc) ** 2 * (1 + xc * psi) * psi,
    ])


def hopf_surface_residual(psi: float, lam: float, xc: float) -> float:
    c = hopf_cubic_coefficients(psi, xc)
    return float(np.polyval(c, lam))


def _trace_matched_equilibrium(params: ModelParams):
    """The cubic root whose Jacobian trace is closest to zero (det sign free).

    Resolves which equilibrium root pairs with a given root of the Hopf
    cubic: smallest |trace| residual wins, ties broken by smallest x0.
    """
    roots = cubic_real_roots(equilibrium_cubic(params))
    best = None
    for x0 in roots[roots > 0]:
        y0 = params.alpha2 * x0 / (params.lambda2 * (1 + x0))
        eq = classify(params, State(float(x0), float(y0)))
        key = (abs(eq.trace), x0)
        if best is None or key < best[0]:
            best = (key, eq)
    return None if best is None else best[1]


def hopf_lambda_roots(psi: float, xc: float, alpha1: float = 1.0,
                      alpha2: float = 1.0) -> list[tuple[float, LocusKind]]:
    """Positive real roots lam of the Hopf cubic, classified by det sign.

    The cubic mixes genuine Hopf points (det > 0 at the matched equilibrium)
    with neutral saddles (det < 0); the classification is made by
    reconstructing the equilibrium in the (alpha1, alpha2) gauge.
    """
    if psi <= 0:
        raise DomainError("psi must be positive")
    out = []
    for r in np.roots(hopf_cubic_coefficients(psi, xc)):
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)) or r.real <= 0:
            continue
        lam = float(r.real)
        params = ModelParams.from_composites(psi, lam, alpha1, alpha2, xc)
        eq = _trace_matched_equilibrium(params)
        if eq is None:
            continue
        kind = LocusKind.HOPF if eq.det > 0 else LocusKind.NEUTRAL_SADDLE
        out.append((lam, kind))
    out.sort()
    return out


def hopf_point(psi: float, lam: float, alpha1: float, alpha2: float,
               xc: float, *, correct: bool = True) -> LocusPoint:
    """Reconstruct the Hopf locus point at (psi, lam) in the given gauge.

    With ``correct=True`` a one-dimensional Newton iteration on lambda1
    (lambda2 fixed) pushes the Jacobian trace to zero to machine accuracy;
    the (psi, lam) diagnostics are recomputed from the corrected parameters.
    """
    params = ModelParams.from_composites(psi, lam, alpha1, alpha2, xc)
    eq = _trace_matched_equilibrium(params)
    if eq is None:
        raise DomainError("no positive equilibrium at the requested point")
    if correct:
        l1 = params.lambda1
        for _ in range(60):
            eq = _trace_matched_equilibrium(params)
            tr = eq.trace
            norm = max(abs(eq.det), eq.trace**2, params.lambda2**2)
            if abs(tr) < 1e-15 * np.sqrt(norm) + 1e-300:
                break
            h = l1 * 1e-7
            eq_h = _trace_matched_equilibrium(params.replace(lambda1=l1 + h))
            d = (eq_h.trace - tr) / h
            if d == 0:
                break
            step = -tr / d
            step = np.clip(step, -0.2 * l1, 0.2 * l1)
            l1 = l1 + step
            params = params.replace(lambda1=l1)
        eq = _trace_matched_equilibrium(params)
        norm = np.sqrt(max(abs(eq.det), eq.trace**2, params.lambda2**2))
        if abs(eq.trace) > 1e-9 * norm:
            raise DomainError(
                "trace correction did not converge; the requested point "
                "is not on the trace-zero surface")
    kind = LocusKind.HOPF if eq.det > 0 else LocusKind.NEUTRAL_SADDLE
    diags = {"psi": params.psi, "lam": params.lam, "trace": eq.trace,
             "det": eq.det}
    if eq.det > 0:
        diags["omega"] = float(np.sqrt(eq.det))
    return LocusPoint(kind, params, eq, diags)


def bautin_point(alpha1: float, alpha2: float, xc: float) -> LocusPoint:
    """The Bautin point for the given gauge, with omega and ell1 diagnostics."""
    if xc <= 3:
        raise DomainError("Bautin point requires xc > 3 (lam must be positive)")
    lp = hopf_point(bautin_psi(xc), bautin_lambda(xc), alpha1, alpha2, xc)
    from .lyapunov import first_lyapunov  # local import: lyapunov imports loci
    nf = first_lyapunov(lp.params, lp.equilibrium)
    diags = dict(lp.diagnostics)
    diags["ell1"] = nf.ell1
    return LocusPoint(LocusKind.BAUTIN, lp.params, lp.equilibrium, diags)


def trace_zero_solutions(xc: float, n: int, *, alpha1: float = 1.0,
                         alpha2: float = 1.0, seed: int = 0,
                         x0_range=(0.05, None)) -> list[dict]:
    """Newton-oracle solutions of {f = 0, g = 0, trace = 0}.

    Independent of the Hopf cubic: picks random equilibrium abscissae x0,
    derives psi from the equilibrium condition, and solves the two remaining
    equations {psi-definition, trace = 0} for (lambda1, lambda2) by damped
    Newton in log-parameters.  Each solution reports the residual of the
    closed-form Hopf cubic at its (psi, lam).
    """
    rng = np.random.default_rng(seed)
    lo, hi = x0_range
    if hi is None:
        hi = 0.8 * xc
    out = []
    attempts = 0
    while len(out) < n and attempts < 50 * n:
        attempts += 1
        x0 = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        psi = x0**2 * (1 - x0 / xc) / (1 + x0) ** 3
        if psi <= 0:
            continue

        def trace_at(u):
            l1, l2 = np.exp(u)
            y0 = alpha2 * x0 / (l2 * (1 + x0))
            J = jacobian(ModelParams(l1, l2, alpha1, alpha2, xc),
                         np.array([x0, y0]))
            return np.array([l1 * l2**2 / (alpha1 * alpha2**2) - psi,
                             J[0, 0] + J[1, 1]])

        u = rng.normal(np.log([0.01, 0.01]), 1.5)
        ok = False
        for _ in range(80):
            F = trace_at(u)
            if np.max(np.abs(F)) < 1e-14:
                ok = True
                break
            J = np.empty((2, 2))
            for j in range(2):
                du = np.zeros(2)
                du[j] = 1e-7
                J[:, j] = (trace_at(u + du) - F) / 1e-7
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                break
            u = u + np.clip(step, -2.0, 2.0)
        if not ok:
            continue
        l1, l2 = np.exp(u)
        lam = l2 / l1
        res = hopf_surface_residual(psi, lam, xc)
        scale = max(np.max(np.abs(hopf_cubic_coefficients(psi, xc)
                                  * lam ** np.arange(3, -1, -1))), 1e-300)
        out.append({"x0": x0, "psi": psi, "lam": lam,
                    "lambda1": l1, "lambda2": l2,
                    "hopf_residual": res, "hopf_residual_rel": res / scale})
    return out
