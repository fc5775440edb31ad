"""First Lyapunov coefficient at a Hopf candidate.

Pipeline: linear normalization of the Jacobian to the oscillator form
R = [[0, 1], [-omega^2, 2*mu]] via Y = M x with

    M = [[b2, -a2], [a1*b2 - a2*b1, 0]],

complex eigenvectors q0 = (1, i*omega)/(2i*omega), p0 = (-i*omega, 1),
exact multilinear expansion of the polynomial nonlinearity in (z, zbar),
and

    c1(0) = g21/2 + i*g20*g11/(2*omega) - i*|g11|^2/omega - i*|g02|^2/(6*omega),
    ell1(0) = Re(c1(0)) / omega.

The "standard" textbook arrangement
c1(0) = (i/(2*omega))*(g20*g11 - 2|g11|^2 - |g02|^2/3) + g21/2 is offered
behind a flag; the two displays are algebraically identical (the |g11|^2 and
|g02|^2 terms are purely imaginary either way), so ell1 never depends on the
choice.

The g coefficients are extracted by exact polynomial expansion; no numerical
differentiation is involved.  An independent Poincare-return-map oracle for
the sign of ell1 lives in :func:`ell1_sign_oracle`.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .model import DomainError, ModelParams, State, taylor_expand
from .equilibria import Equilibrium

__all__ = [
    "LinearData",
    "NormalFormData",
    "linearize_at_hopf",
    "normal_form_coeffs",
    "first_lyapunov",
    "ell1_sign_oracle",
]


class NotAHopfError(DomainError):
    """The equilibrium does not satisfy the Hopf linear conditions."""


@dataclass(frozen=True)
class LinearData:
    A: np.ndarray
    M: np.ndarray
    omega: float
    mu: float
    q0: np.ndarray
    p0: np.ndarray


@dataclass(frozen=True)
class NormalFormData:
    g20: complex
    g11: complex
    g02: complex
    g21: complex
    c1: complex
    ell1: float


def linearize_from_matrix(A: np.ndarray) -> LinearData:
    """Linear normalization of a 2x2 matrix with det > 0."""
    A = np.asarray(A, dtype=float)
    a1, a2 = A[0]
    b1, b2 = A[1]
    det = a1 * b2 - a2 * b1
    if det <= 0:
        raise NotAHopfError(f"det(A) = {det:g} <= 0: not a Hopf candidate")
    if a2 == 0:
        raise NotAHopfError("a2 = 0: normalizing transform is singular")
    omega = float(np.sqrt(det))
    mu = float((a1 + b2) / 2.0)
    M = np.array([[b2, -a2], [det, 0.0]])
    q0 = np.array([1.0, 1j * omega]) / (2j * omega)
    p0 = np.array([-1j * omega, 1.0])
    return LinearData(A=A, M=M, omega=omega, mu=mu, q0=q0, p0=p0)


def linearize_at_hopf(params: ModelParams, eq: Equilibrium) -> LinearData:
    """Linear data of the polynomial field at a Hopf candidate equilibrium."""
    tc = taylor_expand(params, eq.state)
    return linearize_from_matrix(tc.linear_matrix)


def _poly_mul(p: dict, q: dict) -> dict:
    r = defaultdict(complex)
    for (i1, j1), c1 in p.items():
        for (i2, j2), c2 in q.items():
            r[(i1 + i2, j1 + j2)] += c1 * c2
    return dict(r)


def normal_form_coeffs(params: ModelParams, eq: Equilibrium,
                       lin: LinearData | None = None, *,
                       standard_c1: bool = False) -> NormalFormData:
    """Normal-form coefficients g20, g11, g02, g21, then c1(0) and ell1(0).

    The state is written as (x1, y1) = z*u + zbar*conj(u) with
    u = M^-1 q0, the polynomial nonlinearity is expanded exactly in
    monomials z^i zbar^j, and G(z, zbar) = <p0, M F(x1, y1)>.
    """
    if lin is None:
        lin = linearize_at_hopf(params, eq)
    tc = taylor_expand(params, eq.state)
    a, b = tc.a, tc.b
    om = lin.omega

    u = np.linalg.solve(lin.M, lin.q0)
    X = {(1, 0): u[0], (0, 1): np.conj(u[0])}
    Y = {(1, 0): u[1], (0, 1): np.conj(u[1])}
    X2 = _poly_mul(X, X)
    Y2 = _poly_mul(Y, Y)
    XY = _poly_mul(X, Y)
    XY2 = _poly_mul(X, Y2)
    X2Y = _poly_mul(X2, Y)
    X2Y2 = _poly_mul(X2, Y2)

    # nonlinear part of the shifted field, component-wise
    F1 = defaultdict(complex)
    for poly, c in ((X2, a[3]), (Y2, a[4]), (XY, a[5]),
                    (XY2, a[6]), (X2Y, a[7]), (X2Y2, a[8])):
        for k, v in poly.items():
            F1[k] += c * v
    F2 = {k: b[3] * v for k, v in XY.items()}

    # G = <p0, M F>  (inner product conjugates the first argument)
    pM = np.conj(lin.p0) @ lin.M
    G = defaultdict(complex)
    for k, v in F1.items():
        G[k] += pM[0] * v
    for k, v in F2.items():
        G[k] += pM[1] * v

    g20 = 2 * G[(2, 0)]
    g11 = G[(1, 1)]
    g02 = 2 * G[(0, 2)]
    g21 = 2 * G[(2, 1)]

    if standard_c1:
        c1 = 1j / (2 * om) * (g20 * g11 - 2 * abs(g11) ** 2
                              - abs(g02) ** 2 / 3.0) + g21 / 2
    else:
        c1 = (g21 / 2 + g20 * g11 * 1j * om / (2 * om**2)
              - 1j * g11 * np.conj(g11) / om
              - 1j * g02 * np.conj(g02) / (6 * om))
    ell1 = float(c1.real / om)
    return NormalFormData(g20=complex(g20), g11=complex(g11),
                          g02=complex(g02), g21=complex(g21),
                          c1=complex(c1), ell1=ell1)


def first_lyapunov(params: ModelParams, eq: Equilibrium, *,
                   standard_c1: bool = False) -> NormalFormData:
    """Convenience wrapper: linearize then compute the normal form."""
    lin = linearize_at_hopf(params, eq)
    return normal_form_coeffs(params, eq, lin, standard_c1=standard_c1)


def ell1_sign_oracle(params: ModelParams, eq: Equilibrium, *,
                     radius_factors=(1e-3, 2e-3), n_returns: int = 200,
                     trace_tol: float = 1e-6) -> int:
    """Sign of ell1 from a Poincare return map, independent of the normal form.

    Integrates the polynomial field from small radii on the vertical
    half-line above the equilibrium, collects successive upward returns, and
    fits the cubic drift r -> r + alpha*r^3 by least squares on the radius
    increments.  Returns sign(alpha).

    The caller must have the equilibrium on (or extremely near) the Hopf
    surface: a residual linear trace masks the cubic term.
    """
    from .dynamics import integrate_raw  # deferred: dynamics imports model only

    J_trace = eq.trace
    det = eq.det
    if det <= 0:
        raise NotAHopfError("oracle needs a focus (det > 0)")
    om = np.sqrt(det)
    if abs(J_trace) > trace_tol * om:
        raise NotAHopfError(
            f"trace {J_trace:g} too far from zero for the cubic fit")
    x0, y0 = eq.state.x, eq.state.y
    scale = max(abs(y0), 1e-3)
    period = 2 * np.pi / om

    rs_all, dr_all = [], []
    for f in radius_factors:
        r = f * scale
        state = np.array([x0, y0 + r])
        radii = [r]
        # one return per integration: event = upward crossing of x = x0
        t_budget = 1.5 * period
        for _ in range(n_returns):
            res = integrate_raw(params, state, t_budget,
                                section=("x", x0, +1), rtol=1e-11, atol=1e-13)
            if res is None:
                break
            state = res
            radii.append(state[1] - y0)
        radii = np.array(radii)
        if len(radii) < 10 or np.any(radii <= 0):
            continue
        rs_all.append(radii[:-1])
        dr_all.append(np.diff(radii))
    if not rs_all:
        raise DomainError("oracle inconclusive: trajectory left the section")
    r = np.concatenate(rs_all)
    dr = np.concatenate(dr_all)
    # least squares dr = alpha * r^3
    alpha = float(np.dot(dr, r**3) / np.dot(r**3, r**3))
    return int(np.sign(alpha))
