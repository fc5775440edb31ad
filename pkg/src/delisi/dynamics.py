"""Adaptive integration, events, blow-up at infinity, elimination threshold.

The integrator is an embedded Dormand-Prince 5(4) pair with proportional
step control and cubic-Hermite dense output for event refinement.  It
operates on flat numpy arrays, so the same core drives single trajectories,
Poincare-return computations, and batched multiple-shooting systems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DomainError, ModelParams, State, eval_polynomial_field
from .equilibria import find_equilibria

__all__ = [
    "Terminal",
    "Trajectory",
    "InfinityChartState",
    "ThresholdCurve",
    "integrate",
    "integrate_raw",
    "rk45",
    "infinity_chart_field",
    "infinity_chart_pushforward",
    "origin_sector_flow",
    "threshold_curve",
    "phase_portrait",
]

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                   11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


class StiffnessError(RuntimeError):
    """Step size underflow during adaptive integration."""


class Terminal(enum.Enum):
    TIME_LIMIT = "time_limit"
    LEFT_ROI_Y0 = "left_roi_y0"
    LEFT_ROI_XC = "left_roi_xc"
    ESCAPED_Y = "escaped_y"
    CONVERGED = "converged"
    EVENT = "event"


@dataclass
class Event:
    """Scalar event g(t, y) = 0 with a required crossing direction.

    direction +1 fires on g going negative -> positive, -1 the opposite,
    0 on any sign change.
    """
    fn: Callable[[float, np.ndarray], float]
    direction: int = 0
    terminal: bool = True
    name: str = ""


def _hermite(t0, y0, f0, t1, y1, f1, t):
    """Cubic Hermite interpolation on [t0, t1]."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def rk45(f, t0: float, y0: np.ndarray, t_end: float, *,
         rtol: float = 1e-10, atol: float = 1e-12,
         events: list[Event] | None = None,
         max_step: float = np.inf, first_step: float | None = None,
         step_callback=None, record: bool = False,
         event_refine_tol: float = 1e-10):
    """Adaptive Dormand-Prince 5(4) integration of y' = f(t, y).

    Returns (t, y, fired_event_or_None, history) where history is a
    (times, states) pair when ``record`` is set.  Events are located by
    bisection on the cubic-Hermite interpolant of the accepted step to
    ``event_refine_tol`` absolute accuracy in time.
    """
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    if span == 0:
        return t, y, None, ([t], [y.copy()])
    events = events or []

    fy = f(t, y)
    if first_step is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((fy / scale) ** 2))
        h = 0.01 * d0 / d1 if (d0 > 1e-5 and d1 > 1e-5) else 1e-6 * span
        h = min(h, span, max_step)
    else:
        h = min(first_step, span, max_step)
    h = max(h, 1e-14 * span)

    gvals = [ev.fn(t, y) for ev in events]
    times = [t]
    states = [y.copy()]
    k = [None] * 7

    while (t_end - t) * direction > 0:
        h = min(h, abs(t_end - t), max_step)
        if h < 1e-14 * max(abs(t), 1.0) + 1e-290:
            raise StiffnessError(f"step underflow at t={t:g}")
        hs = h * direction
        k[0] = fy
        for i in range(1, 7):
            yi = y + hs * sum(a * k[j] for j, a in enumerate(_DP_A[i]))
            k[i] = f(t + _DP_C[i] * hs, yi)
        y5 = y + hs * sum(b * ki for b, ki in zip(_DP_B5, k) if b != 0.0)
        y4 = y + hs * sum(b * ki for b, ki in zip(_DP_B4, k) if b != 0.0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = np.sqrt(np.mean(((y5 - y4) / scale) ** 2))
        if err <= 1.0:
            t_new = t + hs
            f_new = k[6]  # FSAL: last stage is f(t+h, y5)
            fired = None
            t_fire = None
            for iev, ev in enumerate(events):
                g_new = ev.fn(t_new, y5)
                g_old = gvals[iev]
                crossed = (g_old < 0 <= g_new) if ev.direction > 0 else \
                          (g_old > 0 >= g_new) if ev.direction < 0 else \
                          (g_old * g_new <= 0 and g_old != g_new and g_old != 0)
                if crossed:
                    lo, hi = t, t_new
                    glo = g_old
                    while abs(hi - lo) > event_refine_tol:
                        mid = 0.5 * (lo + hi)
                        ym = _hermite(t, y, k[0], t_new, y5, f_new, mid)
                        gm = ev.fn(mid, ym)
                        if (glo < 0) == (gm < 0):
                            lo, glo = mid, gm
                        else:
                            hi = mid
                    tf = 0.5 * (lo + hi)
                    if t_fire is None or (tf - t_fire) * direction < 0:
                        t_fire = tf
                        fired = ev
                gvals[iev] = g_new
            if fired is not None and fired.terminal:
                yf = _hermite(t, y, k[0], t_new, y5, f_new, t_fire)
                if record:
                    times.append(t_fire)
                    states.append(yf.copy())
                return t_fire, yf, fired, (times, states)
            t, y, fy = t_new, y5, f_new
            if record:
                times.append(t)
                states.append(y.copy())
            if step_callback is not None and step_callback(t, y):
                return t, y, None, (times, states)
            h *= min(5.0, max(0.2, 0.9 * err ** -0.2)) if err > 0 else 5.0
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    return t, y, None, (times, states)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    terminal: Terminal

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate(params: ModelParams, s0, t_max: float, *,
              rtol: float = 1e-10, atol: float = 1e-12,
              escape_bound: float | None = None,
              converge_tol: float | None = None,
              backward: bool = False, record: bool = True) -> Trajectory:
    """Integrate the polynomial field with the declared ROI exit events.

    Events: downward y = 0 crossing (LEFT_ROI_Y0), upward x = xc crossing
    (LEFT_ROI_XC), y exceeding the escape bound (ESCAPED_Y).  With
    ``converge_tol`` set, integration also stops once the field norm drops
    below it (CONVERGED).
    """
    s0 = np.asarray(s0, dtype=float)
    if not np.all(np.isfinite(s0)):
        raise DomainError("non-finite initial state")
    sgn = -1.0 if backward else 1.0

    def f(t, y):
        return sgn * eval_polynomial_field(params, y)

    if escape_bound is None:
        ys = [abs(e.y) for e in find_equilibria(params)]
        escape_bound = 1e3 * max(1.0, max(ys) if ys else 1.0)

    evs = [
        Event(lambda t, y: y[1], direction=-1, name="y0"),
        Event(lambda t, y: y[0] - params.xc, direction=+1, name="xc"),
        Event(lambda t, y: y[1] - escape_bound, direction=+1, name="escape"),
    ]

    cb = None
    if converge_tol is not None:
        def cb(t, y):
            return bool(np.linalg.norm(eval_polynomial_field(params, y))
                        < converge_tol)

    t, y, fired, (times, states) = rk45(
        f, 0.0, s0, t_max, rtol=rtol, atol=atol, events=evs,
        step_callback=cb, record=record)
    if fired is not None:
        terminal = {"y0": Terminal.LEFT_ROI_Y0, "xc": Terminal.LEFT_ROI_XC,
                    "escape": Terminal.ESCAPED_Y}[fired.name]
    elif converge_tol is not None and abs(t) < t_max:
        terminal = Terminal.CONVERGED
    else:
        terminal = Terminal.TIME_LIMIT
    return Trajectory(times=np.array(times), states=np.array(states),
                      terminal=terminal)


def integrate_raw(params: ModelParams, s0: np.ndarray, t_budget: float, *,
                  section: tuple | None = None,
                  rtol: float = 1e-10, atol: float = 1e-12):
    """One Poincare return: integrate until an oriented section crossing.

    ``section = (coord_name, value, direction)`` with coord_name "x" or "y".
    Returns the refined crossing state, or None when the budget runs out or
    the state leaves the plausible region.
    """
    def f(t, y):
        return eval_polynomial_field(params, y)

    coord, value, direction = section
    idx = 0 if coord == "x" else 1
    other = 1 - idx

    ev = Event(lambda t, y: y[idx] - value, direction=direction,
               name="section")
    # ignore the immediate re-crossing at the start point: offset slightly
    t, y, fired, _ = rk45(f, 0.0, s0, t_budget, rtol=rtol, atol=atol,
                          events=[ev], first_step=1e-6 * t_budget)
    if fired is None or not np.all(np.isfinite(y)):
        return None
    return y


# ---------------------------------------------------------------------------
# blow-up at infinity


@dataclass(frozen=True)
class InfinityChartState:
    """Chart coordinates (x, v = x/y); v = 0 is the line y = infinity."""

    x: float
    v: float


def infinity_chart_field(params: ModelParams, c: InfinityChartState) -> np.ndarray:
    """Chart field in the printed form of the source analysis.

    dx/dt' = -lambda1*x*(1+x)*v^2 + alpha1*x^3*(1 - x/xc)
    dv/dt' = v*x*(alpha1*x*(1 - x/xc) - lambda2) + alpha2*v^2
             - v^3*(lambda1*(1+x) + lambda2)

    Note: the second component disagrees with the exact pushforward of the
    affine field (see :func:`infinity_chart_pushforward`); both are exposed
    and the diagnostics CLI reports both.  The two coincide on v = 0.
    """
    p = params
    x, v = c.x, c.v
    dx = -p.lambda1 * x * (1 + x) * v**2 + p.alpha1 * x**3 * (1 - x / p.xc)
    dv = (v * x * (p.alpha1 * x * (1 - x / p.xc) - p.lambda2)
          + p.alpha2 * v**2 - v**3 * (p.lambda1 * (1 + x) + p.lambda2))
    return np.array([dx, dv])


def infinity_chart_pushforward(params: ModelParams,
                               c: InfinityChartState) -> np.ndarray:
    """Exact pushforward of the polynomial field through (x, v = x/y)
    with the time rescaling dt/dt' = v^2.

    dx/dt' = -lambda1*x*(1+x)*v^2 + alpha1*x^3*(1 - x/xc)
    dv/dt' = alpha1*x^2*v*(1 - x/xc) - (lambda1 + lambda2)*(1+x)*v^3
             + alpha2*v^4
    """
    p = params
    x, v = c.x, c.v
    dx = -p.lambda1 * x * (1 + x) * v**2 + p.alpha1 * x**3 * (1 - x / p.xc)
    dv = (p.alpha1 * x**2 * v * (1 - x / p.xc)
          - (p.lambda1 + p.lambda2) * (1 + x) * v**3 + p.alpha2 * v**4)
    return np.array([dx, dv])


def infinity_chart_linearization(params: ModelParams,
                                 c: InfinityChartState | None = None) -> np.ndarray:
    """Analytic Jacobian of the printed chart field, by default at the
    attractor (xc, 0) where it reduces to diag(-alpha1*xc^2, -lambda2*xc)."""
    p = params
    if c is None:
        c = InfinityChartState(p.xc, 0.0)
    x, v = c.x, c.v
    return np.array([
        [-p.lambda1 * (1 + 2 * x) * v**2
         + p.alpha1 * (3 * x**2 - 4 * x**3 / p.xc),
         -2 * p.lambda1 * x * (1 + x) * v],
        [v * (p.alpha1 * (2 * x - 3 * x**2 / p.xc) - p.lambda2)
         - v**3 * p.lambda1,
         p.alpha1 * x**2 * (1 - x / p.xc) - p.lambda2 * x
         + 2 * p.alpha2 * v - 3 * v**2 * (p.lambda1 * (1 + x) + p.lambda2)],
    ])


def origin_sector_flow(params: ModelParams, theta_grid) -> np.ndarray:
    """Angular velocity dtheta/dt on r = 0 of the polar blow-up at the
    chart origin: -lambda2*cos(theta)*sin(theta), strictly negative on the
    open quadrant (hyperbolic sector)."""
    th = np.asarray(theta_grid, dtype=float)
    if np.any((th <= 0) | (th >= np.pi / 2)):
        raise DomainError("theta grid must lie in the open interval (0, pi/2)")
    return -params.lambda2 * np.cos(th) * np.sin(th)


# ---------------------------------------------------------------------------
# elimination threshold


@dataclass
class ThresholdCurve:
    """Graph y = h(x) of the origin's stable manifold over (0, xc]."""

    xs: np.ndarray  # increasing
    ys: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)

    @property
    def y_c(self) -> float:
        """Threshold ordinate h(xc)."""
        return float(self.ys[-1])


def threshold_curve(params: ModelParams, *, offset: float = 1e-7,
                    rtol: float = 1e-10, atol: float = 1e-13) -> ThresholdCurve:
    """Stable manifold of the origin saddle, grown backward in time.

    Requires the origin to be the only equilibrium in the closed ROI (large
    lambda1 regime).  Seeds at ``offset`` along the stable eigenvector
    (lambda1+lambda2, alpha2) and integrates the time-reversed field until
    x reaches xc.  The result is validated as a single-valued graph.
    """
    interior = [e for e in find_equilibria(params)
                if 0 < e.x <= params.xc and e.y > 0]
    if interior:
        raise DomainError(
            "threshold curve undefined: interior equilibria present "
            f"(first at x0={interior[0].x:g})")
    w = np.array([params.lambda1 + params.lambda2, params.alpha2])
    w /= np.linalg.norm(w)
    s0 = offset * w

    def f(t, y):
        return -eval_polynomial_field(params, y)

    ev = Event(lambda t, y: y[0] - params.xc, direction=+1, name="xc")
    t, y, fired, (times, states) = rk45(
        f, 0.0, s0, 1e9, rtol=rtol, atol=atol, events=[ev], record=True)
    if fired is None:
        raise DomainError("backward orbit failed to reach x = xc")
    pts = np.array(states)
    xs, ys = pts[:, 0], pts[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise DomainError("threshold curve folded over in x: not a graph")
    return ThresholdCurve(xs=xs, ys=ys)


# ---------------------------------------------------------------------------
# phase portraits


@dataclass
class PhasePortrait:
    params: ModelParams
    trajectories: list
    equilibria: list
    cycles: list
    threshold: ThresholdCurve | None
    infinity_markers: list


def phase_portrait(params: ModelParams, seeds, t_max: float, *,
                   cycles=None, threshold: bool = False,
                   rtol: float = 1e-8, atol: float = 1e-10) -> PhasePortrait:
    """Bundle trajectories, equilibria, cycles and boundary markers."""
    trajs = [integrate(params, np.asarray(s, dtype=float), t_max,
                       rtol=rtol, atol=atol) for s in seeds]
    eqs = find_equilibria(params)
    thr = None
    if threshold:
        thr = threshold_curve(params)
    # attractor of the chart at infinity, drawn on the frame boundary
    markers = [("infinity_attractor", params.xc)]
    return PhasePortrait(params=params, trajectories=trajs, equilibria=eqs,
                         cycles=list(cycles or []), threshold=thr,
                         infinity_markers=markers)
