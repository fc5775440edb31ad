"""Pseudo-arclength continuation for equilibria, codim-1 curves and cycles.

Predictor: secant.  Corrector: Newton with an arclength hyperplane
constraint.  Steps adapt by a factor of two: grow on convergence in at most
four iterations, shrink above eight or on failure.  Parameters are continued
in log scale (lambda1, lambda2 span orders of magnitude).

Limit cycles use multiple shooting with ``N_SEGMENTS`` segments.  The
shooting Jacobian is assembled from variational equations integrated
alongside the states, so one batched integration per Newton iteration
provides residuals, monodromy and parameter sensitivities.  The nontrivial
Floquet multiplier is tracked two ways: as the monodromy determinant and as
exp of the divergence integral along the orbit (exact for planar fields).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, State, eval_polynomial_field, jacobian
from .equilibria import classify, find_equilibria
from .loci import LocusPoint, bautin_point
from .lyapunov import first_lyapunov
from .dynamics import rk45

__all__ = [
    "Branch",
    "BranchPoint",
    "LimitCycle",
    "CyclePoint",
    "continue_equilibria",
    "continue_fold_curve",
    "continue_hopf_curve",
    "continue_cycles",
    "lpc_curve",
]

CORRECTOR_TOL = 1e-9
N_SEGMENTS = 20
PERIOD_CAP = 1e4
BISECT_MAX = 60


class ContinuationError(RuntimeError):
    pass


@dataclass
class BranchPoint:
    u: np.ndarray
    params: ModelParams
    values: dict


@dataclass
class Branch:
    kind: str
    points: list = field(default_factory=list)
    special_points: list = field(default_factory=list)  # (index, tag)
    diagnostics: dict = field(default_factory=dict)

    def tagged(self, tag: str):
        return [self.points[i] for i, t in self.special_points if t == tag]


# ---------------------------------------------------------------------------
# generic corrector machinery


def _fd_jacobian(F, u, f0=None, h: float = 1e-7):
    if f0 is None:
        f0 = F(u)
    m, n = len(f0), len(u)
    J = np.empty((m, n))
    for j in range(n):
        du = np.zeros(n)
        du[j] = h * max(1.0, abs(u[j]))
        J[:, j] = (F(u + du) - f0) / du[j]
    return J


def _corrector(F, u_pred, normal, rhs_offset, *, tol=CORRECTOR_TOL,
               max_iter=12, jac=None):
    """Solve F(u) = 0 subject to normal . u = rhs_offset (Newton).

    ``normal=None`` solves the square system without the arclength row.
    Returns (u, converged, n_iter, residual_norm).
    """
    u = u_pred.copy()
    for it in range(1, max_iter + 1):
        try:
            f = F(u)
        except ContinuationError:
            return u, False, it, np.inf
        res = np.max(np.abs(f))
        con = 0.0 if normal is None else normal @ u - rhs_offset
        if res < tol and abs(con) < tol:
            return u, True, it, res
        try:
            J = jac(u, f) if jac is not None else _fd_jacobian(F, u, f)
        except ContinuationError:
            return u, False, it, res
        if normal is None:
            A, b = J, -f
        else:
            A = np.vstack([J, normal])
            b = -np.concatenate([f, [con]])
        try:
            if A.shape[0] == A.shape[1]:
                du = np.linalg.solve(A, b)
            else:  # minimum-norm Newton for the unconstrained first point
                du = np.linalg.lstsq(A, b, rcond=None)[0]
        except np.linalg.LinAlgError:
            return u, False, it, res
        if not np.all(np.isfinite(du)):
            return u, False, it, res
        u = u + du
    try:
        f = F(u)
    except ContinuationError:
        return u, False, max_iter, np.inf
    res = np.max(np.abs(f))
    con = 0.0 if normal is None else normal @ u - rhs_offset
    ok = res < tol and abs(con) < tol
    return u, ok, max_iter, res


def _initial_tangent(F, u0, prefer=None):
    """Unit nullspace vector of dF at u0; oriented along ``prefer``."""
    J = _fd_jacobian(F, u0)
    _, _, vh = np.linalg.svd(J)
    t = vh[-1]
    if prefer is not None and t @ prefer < 0:
        t = -t
    return t / np.linalg.norm(t)


def _continue_curve(F, u0, *, tangent0=None, prefer=None, n_steps=400,
                    step0=1e-3, min_step=1e-9, max_step=0.05,
                    tests=None, tag_rules=None, stop=None,
                    make_values=None, tol=CORRECTOR_TOL, jac=None):
    """Core pseudo-arclength loop.

    ``tests``: {name: fn(u) -> float} evaluated at every accepted point.
    ``tag_rules``: {test_name: (tag, validator(u) -> bool)}; a sign change
    of the test between consecutive points is refined by bisection and
    tagged when the validator accepts the refined point.
    ``stop``: fn(u, values) -> str|None; truncates the branch with a
    diagnostic when it returns a reason.
    """
    tests = tests or {}
    tag_rules = tag_rules or {}
    u, ok, _, res = _corrector(F, u0, None, 0.0, tol=tol, jac=jac)
    if not ok:
        raise ContinuationError(f"initial corrector failed (residual {res:g})")
    tangent = tangent0 if tangent0 is not None else _initial_tangent(F, u, prefer)
    tangent = tangent / np.linalg.norm(tangent)

    def values_at(u):
        v = {name: fn(u) for name, fn in tests.items()}
        if make_values is not None:
            v.update(make_values(u))
        return v

    branch = Branch(kind="", points=[BranchPoint(u, None, values_at(u))])
    branch.diagnostics["residuals"] = [res]
    step = step0
    for _ in range(n_steps):
        u_prev = branch.points[-1].u
        pred = u_prev + step * tangent
        u_new, ok, n_it, res = _corrector(F, pred, tangent,
                                          tangent @ pred, tol=tol, jac=jac)
        if not ok or (len(branch.points) > 1
                      and (u_new - u_prev) @ tangent < 0):
            if step <= min_step:
                branch.diagnostics["truncated"] = \
                    f"corrector failure at minimum step (residual {res:g})"
                break
            step = max(step / 2, min_step)
            continue
        vals = values_at(u_new)
        branch.points.append(BranchPoint(u_new, None, vals))
        branch.diagnostics["residuals"].append(res)
        i1 = len(branch.points) - 1
        prev_vals = branch.points[i1 - 1].values
        for name, (tag, validator) in tag_rules.items():
            a, b = prev_vals.get(name), vals.get(name)
            if a is None or b is None or not (np.isfinite(a) and np.isfinite(b)):
                continue
            if a * b < 0:
                u_star = _refine_sign_change(F, branch.points[i1 - 1].u,
                                             u_new, tests[name], tol=tol,
                                             jac=jac)
                if u_star is not None and (validator is None or validator(u_star)):
                    sv = values_at(u_star)
                    branch.points.insert(i1, BranchPoint(u_star, None, sv))
                    branch.diagnostics["residuals"].insert(
                        i1, float(np.max(np.abs(F(u_star)))))
                    branch.special_points.append((i1, tag))
                    i1 += 1
        if stop is not None:
            reason = stop(u_new, vals)
            if reason:
                branch.diagnostics["stopped"] = reason
                break
        new_tan = u_new - u_prev
        nt = np.linalg.norm(new_tan)
        if nt > 0:
            tangent = new_tan / nt
        if n_it <= 4:
            step = min(step * 2, max_step)
        elif n_it > 8:
            step = max(step / 2, min_step)
    return branch


def _refine_sign_change(F, u_a, u_b, test_fn, *, tol=CORRECTOR_TOL, jac=None):
    """Bisection for test_fn = 0 between two accepted points."""
    du = u_b - u_a
    normal = du / np.linalg.norm(du)

    def at(frac):
        pred = u_a + frac * du
        u, ok, _, _ = _corrector(F, pred, normal, normal @ pred, tol=tol,
                                 jac=jac)
        return (u if ok else None)

    fa = test_fn(u_a)
    lo, hi = 0.0, 1.0
    u_star = None
    for _ in range(BISECT_MAX):
        mid = 0.5 * (lo + hi)
        u_mid = at(mid)
        if u_mid is None:
            return None
        fm = test_fn(u_mid)
        if (fa < 0) == (fm < 0):
            lo, fa = mid, fm
        else:
            hi = mid
        u_star = u_mid
        if (hi - lo) * np.linalg.norm(du) < 1e-10:
            break
    return u_star


# ---------------------------------------------------------------------------
# equilibrium and codim-1 curves

_PARAM_IDS = ("lambda1", "lambda2", "alpha1", "alpha2", "xc")


def _params_with(base: ModelParams, names, logvals) -> ModelParams:
    return base.replace(**{n: float(np.exp(q)) for n, q in zip(names, logvals)})


def _jac_entries(params, xy):
    J = jacobian(params, xy)
    return J, float(J[0, 0] + J[1, 1]), float(np.linalg.det(J))


def continue_equilibria(params: ModelParams, free: str, window, *,
                        start_x0: float | None = None, n_steps: int = 600,
                        step0: float = 1e-3, max_step: float = 0.05) -> Branch:
    """One-parameter equilibrium branch with SN and H test functions.

    ``free`` is one of lambda1/lambda2/alpha1/alpha2; ``window`` the
    parameter interval.  Unknowns are (x, y, log p).
    """
    if free not in _PARAM_IDS:
        raise ValueError(f"unknown parameter id {free!r}")
    lo, hi = window
    p0 = getattr(params, free)
    if not (lo <= p0 <= hi):
        raise ValueError("initial parameter outside the window")

    eqs = [e for e in find_equilibria(params) if e.x > 0]
    if not eqs:
        raise ContinuationError("no positive equilibrium at the start")
    if start_x0 is None:
        start = max(eqs, key=lambda e: e.x)
    else:
        start = min(eqs, key=lambda e: abs(e.x - start_x0))

    def F(u):
        pp = _params_with(params, [free], [u[2]])
        return eval_polynomial_field(pp, u[:2])

    def det_test(u):
        pp = _params_with(params, [free], [u[2]])
        return _jac_entries(pp, u[:2])[2]

    def trace_test(u):
        pp = _params_with(params, [free], [u[2]])
        return _jac_entries(pp, u[:2])[1]

    def hopf_valid(u):
        return det_test(u) > 0

    def make_values(u):
        pp = _params_with(params, [free], [u[2]])
        return {"x": u[0], "y": u[1], free: float(np.exp(u[2])),
                "psi": pp.psi, "lam": pp.lam}

    def stop(u, vals):
        p = np.exp(u[2])
        if not (lo <= p <= hi):
            return f"{free} left the window at {p:g}"
        if u[0] <= 0 or u[1] <= 0:
            return "branch left the positive quadrant"
        return None

    u0 = np.array([start.x, start.y, np.log(p0)])
    halves = []
    for sign in (+1.0, -1.0):
        prefer = np.zeros(3)
        prefer[2] = sign
        halves.append(_continue_curve(
            F, u0, prefer=prefer, n_steps=n_steps, step0=step0,
            max_step=max_step,
            tests={"det": det_test, "trace": trace_test},
            tag_rules={"det": ("SN", None), "trace": ("H", hopf_valid)},
            make_values=make_values, stop=stop))
    branch = _merge_halves(halves)
    branch.kind = "equilibrium"
    return branch


def _merge_halves(halves):
    """Join the two directed half-branches into one ordered branch."""
    a, b = halves
    pts = list(reversed(a.points[1:]))
    off = len(pts)
    merged = Branch(kind="", points=pts + b.points)
    for i, tag in a.special_points:
        merged.special_points.append((off - i, tag))
    for i, tag in b.special_points:
        merged.special_points.append((off + i, tag))
    merged.special_points.sort()
    merged.diagnostics.update(a.diagnostics)
    merged.diagnostics.update(b.diagnostics)
    if "residuals" in a.diagnostics and "residuals" in b.diagnostics:
        merged.diagnostics["residuals"] = (
            list(reversed(a.diagnostics["residuals"][1:]))
            + b.diagnostics["residuals"])
    return merged


def continue_fold_curve(start: LocusPoint, *, n_steps: int = 400,
                        step0: float = 1e-3, max_step: float = 0.05,
                        lam_window=(0.05, 2.0)) -> Branch:
    """Two-parameter fold curve in (lambda1, lambda2); BT tagged on it."""
    params = start.params

    def F(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        f = eval_polynomial_field(pp, u[:2])
        return np.array([f[0], f[1], _jac_entries(pp, u[:2])[2]])

    def trace_test(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        return _jac_entries(pp, u[:2])[1]

    def make_values(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        return {"x": u[0], "y": u[1], "lambda1": pp.lambda1,
                "lambda2": pp.lambda2, "psi": pp.psi, "lam": pp.lam}

    def stop(u, vals):
        if not (lam_window[0] <= vals["lam"] <= lam_window[1]):
            return f"lam left the window at {vals['lam']:g}"
        return None

    eq = start.equilibrium
    u0 = np.array([eq.x, eq.y, np.log(params.lambda1), np.log(params.lambda2)])
    prefer = np.array([0.0, 0.0, 0.0, 1.0])
    halves = []
    for sign in (+1.0, -1.0):
        halves.append(_continue_curve(
            F, u0, prefer=sign * prefer, n_steps=n_steps, step0=step0,
            max_step=max_step, tests={"trace": trace_test},
            tag_rules={"trace": ("BT", None)},
            make_values=make_values, stop=stop))
    branch = _merge_halves(halves)
    branch.kind = "fold_curve"
    return branch


def continue_hopf_curve(start: LocusPoint, *, n_steps: int = 400,
                        step0: float = 1e-3, max_step: float = 0.05,
                        lam_window=(0.02, None)) -> Branch:
    """Two-parameter Hopf curve in (lambda1, lambda2); GH tagged by ell1.

    The curve is truncated where det J crosses zero (transition to the
    neutral-saddle sheet of the trace-zero surface).
    """
    params = start.params

    def F(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        f = eval_polynomial_field(pp, u[:2])
        return np.array([f[0], f[1], _jac_entries(pp, u[:2])[1]])

    def det_test(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        return _jac_entries(pp, u[:2])[2]

    def ell1_test(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        if det_test(u) <= 0:
            return np.nan
        eq = classify(pp, State(float(u[0]), float(u[1])))
        return first_lyapunov(pp, eq).ell1

    def make_values(u):
        pp = _params_with(params, ["lambda1", "lambda2"], u[2:])
        return {"x": u[0], "y": u[1], "lambda1": pp.lambda1,
                "lambda2": pp.lambda2, "psi": pp.psi, "lam": pp.lam}

    def stop(u, vals):
        if det_test(u) <= 0:
            return "det J reached zero (neutral-saddle transition)"
        lo, hi = lam_window
        if lo is not None and vals["lam"] < lo:
            return f"lam left the window at {vals['lam']:g}"
        if hi is not None and vals["lam"] > hi:
            return f"lam left the window at {vals['lam']:g}"
        return None

    eq = start.equilibrium
    u0 = np.array([eq.x, eq.y, np.log(params.lambda1), np.log(params.lambda2)])
    prefer = np.array([0.0, 0.0, 0.0, 1.0])
    halves = []
    for sign in (+1.0, -1.0):
        halves.append(_continue_curve(
            F, u0, prefer=sign * prefer, n_steps=n_steps, step0=step0,
            max_step=max_step, tests={"ell1": ell1_test, "det": det_test},
            tag_rules={"ell1": ("GH", lambda u: det_test(u) > 0)},
            make_values=make_values, stop=stop))
    branch = _merge_halves(halves)
    branch.kind = "hopf_curve"
    return branch


# ---------------------------------------------------------------------------
# limit cycles by multiple shooting


@dataclass
class LimitCycle:
    samples: np.ndarray       # (m, 2), closed: last == first
    period: float
    nontrivial_floquet: float
    stability: str            # "stable" | "unstable"

    @property
    def amplitude(self) -> float:
        return float(np.max(self.samples[:, 1]) - np.min(self.samples[:, 1]))


@dataclass
class CyclePoint:
    nodes: np.ndarray         # (N, 2) shooting nodes
    period: float
    params: ModelParams
    multiplier: float
    monodromy_multiplier: float
    values: dict

    def to_limit_cycle(self, *, n_samples: int = 200) -> LimitCycle:
        samples = _resample_cycle(self.params, self.nodes, self.period,
                                  n_samples)
        stab = "stable" if abs(self.multiplier) < 1 else "unstable"
        return LimitCycle(samples=samples, period=self.period,
                          nontrivial_floquet=self.multiplier, stability=stab)


def _field_div(params, xy):
    x, y = xy[..., 0], xy[..., 1]
    p = params
    return (-p.lambda1 * (1 + 2 * x) + p.alpha1 * (1 - 2 * x / p.xc) * y * y
            + p.lambda2 * (1 + x))


def _div_grad(params, xy):
    x, y = xy[..., 0], xy[..., 1]
    p = params
    ddx = -2 * p.lambda1 - 2 * p.alpha1 * y * y / p.xc + p.lambda2
    ddy = 2 * p.alpha1 * (1 - 2 * x / p.xc) * y
    return np.stack([ddx, ddy], axis=-1)


def _field_dparam(params, xy, name):
    x, y = xy[..., 0], xy[..., 1]
    z = np.zeros_like(x)
    if name == "lambda1":
        return np.stack([-x * (1 + x), z], axis=-1)
    if name == "lambda2":
        return np.stack([z, (1 + x) * y], axis=-1)
    raise ValueError(name)


def _div_dparam(params, xy, name):
    x = xy[..., 0]
    if name == "lambda1":
        return -(1 + 2 * x)
    if name == "lambda2":
        return 1 + x
    raise ValueError(name)


class _ShootingSystem:
    """Batched segment propagation with variational and divergence data.

    Per segment the augmented state is
    [x(2), Phi(4), xi_p(2m), q(1), dq/ds(2), dq/dp(m)]   (D = 9 + 3m)
    where m is the number of free (log-scaled) parameters.
    """

    def __init__(self, base_params: ModelParams, free_names,
                 n_seg: int = N_SEGMENTS, rtol: float = 1e-9,
                 atol: float = 1e-12):
        self.base = base_params
        self.free = list(free_names)
        self.m = len(self.free)
        self.n_seg = n_seg
        self.D = 9 + 3 * self.m
        self.rtol, self.atol = rtol, atol

    def params_at(self, logp) -> ModelParams:
        return _params_with(self.base, self.free, logp)

    def propagate(self, nodes: np.ndarray, period: float, logp):
        """Integrate every segment over T/N; returns a dict of blocks."""
        n, D, m = self.n_seg, self.D, self.m
        if not np.isfinite(period) or not 0 < period < 10 * PERIOD_CAP:
            raise ContinuationError(f"period out of range: {period:g}")
        pp = self.params_at(logp)
        pvals = np.array([getattr(pp, nm) for nm in self.free])
        z0 = np.zeros((n, D))
        z0[:, 0:2] = nodes
        z0[:, 2] = 1.0   # Phi = I, row-major [2,3;4,5]
        z0[:, 5] = 1.0

        def rhs(t, z):
            z = z.reshape(n, D)
            xy = z[:, 0:2]
            x, y = xy[:, 0], xy[:, 1]
            J = jacobian(pp, xy)           # (n, 2, 2)
            out = np.empty_like(z)
            out[:, 0:2] = eval_polynomial_field(pp, xy)
            Phi = z[:, 2:6].reshape(n, 2, 2)
            out[:, 2:6] = (J @ Phi).reshape(n, 4)
            for k, nm in enumerate(self.free):
                xi = z[:, 6 + 2 * k: 8 + 2 * k]
                dfp = pvals[k] * _field_dparam(pp, xy, nm)
                out[:, 6 + 2 * k: 8 + 2 * k] = \
                    np.einsum("nij,nj->ni", J, xi) + dfp
            base = 6 + 2 * m
            g = _div_grad(pp, xy)          # (n, 2)
            out[:, base] = _field_div(pp, xy)
            out[:, base + 1: base + 3] = np.einsum("nj,njk->nk", g, Phi)
            for k, nm in enumerate(self.free):
                xi = z[:, 6 + 2 * k: 8 + 2 * k]
                out[:, base + 3 + k] = (np.einsum("nj,nj->n", g, xi)
                                        + pvals[k] * _div_dparam(pp, xy, nm))
            return out.ravel()

        h = period / n
        _, zf, _, _ = rk45(rhs, 0.0, z0.ravel(), h, rtol=self.rtol,
                           atol=self.atol)
        zf = zf.reshape(n, D)
        ends = zf[:, 0:2]
        Phi = zf[:, 2:6].reshape(n, 2, 2)
        xi = [zf[:, 6 + 2 * k: 8 + 2 * k] for k in range(m)]
        base = 6 + 2 * m
        q = zf[:, base]
        dq_ds = zf[:, base + 1: base + 3]
        dq_dp = [zf[:, base + 3 + k] for k in range(m)]
        f_end = eval_polynomial_field(pp, ends)
        div_end = _field_div(pp, ends)
        return {"ends": ends, "Phi": Phi, "xi": xi, "q": q,
                "dq_ds": dq_ds, "dq_dp": dq_dp, "f_end": f_end,
                "div_end": div_end, "params": pp}


def _unpack(sys: _ShootingSystem, u):
    n = sys.n_seg
    nodes = u[:2 * n].reshape(n, 2)
    period = float(np.exp(u[2 * n]))  # period continued in log scale
    logp = u[2 * n + 1:]
    return nodes, period, logp


def _cycle_residual_and_jac(sys: _ShootingSystem, u, phase_ref,
                            extra_rows=()):
    """Residual and Jacobian of the shooting system.

    Rows: 2N matching, 1 phase, then extra rows; columns ordered as
    (nodes, T, logp).  ``extra_rows`` entries are callables receiving the
    propagation blocks and returning (residual, gradient_row).
    """
    n = sys.n_seg
    nodes, period, logp = _unpack(sys, u)
    blk = sys.propagate(nodes, period, logp)
    n_unk = len(u)
    n_eq = 2 * n + 1 + len(extra_rows)
    Fv = np.empty(n_eq)
    J = np.zeros((n_eq, n_unk))
    for i in range(n):
        nxt = (i + 1) % n
        r = slice(2 * i, 2 * i + 2)
        Fv[r] = blk["ends"][i] - nodes[nxt]
        J[r, 2 * i: 2 * i + 2] = blk["Phi"][i]
        J[r, 2 * nxt: 2 * nxt + 2] -= np.eye(2)
        J[r, 2 * n] = blk["f_end"][i] * period / n
        for k in range(sys.m):
            J[r, 2 * n + 1 + k] = blk["xi"][k][i]
    f_ref, s_ref = phase_ref
    Fv[2 * n] = f_ref @ (nodes[0] - s_ref)
    J[2 * n, 0:2] = f_ref
    for j, row_fn in enumerate(extra_rows):
        Fv[2 * n + 1 + j], J[2 * n + 1 + j] = row_fn(blk, u)
    return Fv, J, blk


def _multipliers(blk):
    """Nontrivial Floquet multiplier from the divergence integral and from
    the monodromy determinant (the trivial multiplier is exactly 1)."""
    mu_div = float(np.exp(np.sum(blk["q"])))
    M = np.eye(2)
    for P in blk["Phi"]:
        M = P @ M
    mu_det = float(np.linalg.det(M))
    return mu_div, mu_det


def _resample_cycle(params, nodes, period, n_samples):
    """Dense closed orbit through node 0."""
    def f(t, y):
        return eval_polynomial_field(params, y)
    ts = np.linspace(0.0, period, n_samples)
    out = [nodes[0].copy()]
    y = nodes[0].copy()
    for t0, t1 in zip(ts[:-1], ts[1:]):
        _, y, _, _ = rk45(f, t0, y, t1, rtol=1e-10, atol=1e-12)
        out.append(y.copy())
    out[-1] = out[0]  # closed by corrector tolerance; pin exactly
    return np.array(out)


def _hopf_initial_cycle(sys: _ShootingSystem, lp: LocusPoint, radius):
    """Seed nodes on the linear center ellipse and converge with the
    amplitude pinned (parameter free)."""
    eq = lp.equilibrium
    pp = lp.params
    J = jacobian(pp, np.array([eq.x, eq.y]))
    det = float(np.linalg.det(J))
    om = float(np.sqrt(det))
    T0 = 2 * np.pi / om
    n = sys.n_seg
    r0 = np.array([0.0, radius])
    # trace-zero 2x2: expm(J t) = cos(om t) I + sin(om t)/om J
    nodes = np.empty((n, 2))
    center = np.array([eq.x, eq.y])
    for j in range(n):
        t = j * T0 / n
        nodes[j] = center + (np.cos(om * t) * np.eye(2)
                             + np.sin(om * t) / om * J) @ r0
    logp0 = np.array([np.log(getattr(pp, nm)) for nm in sys.free])
    u = np.concatenate([nodes.ravel(), [np.log(T0)], logp0])

    pin_target = center + r0

    def FJ(uu):
        nds, per, lgp = _unpack(sys, uu)
        blk = sys.propagate(nds, per, lgp)
        res = np.empty(2 * n + 2)
        Jm = np.zeros((2 * n + 2, len(uu)))
        for i in range(n):
            nxt = (i + 1) % n
            r = slice(2 * i, 2 * i + 2)
            res[r] = blk["ends"][i] - nds[nxt]
            Jm[r, 2 * i: 2 * i + 2] = blk["Phi"][i]
            Jm[r, 2 * nxt: 2 * nxt + 2] -= np.eye(2)
            Jm[r, 2 * n] = blk["f_end"][i] * per / n
            for k in range(sys.m):
                Jm[r, 2 * n + 1 + k] = blk["xi"][k][i]
        res[2 * n: 2 * n + 2] = nds[0] - pin_target
        Jm[2 * n: 2 * n + 2, 0:2] = np.eye(2)
        return res, Jm

    f, Jm = FJ(u)
    for _ in range(40):
        nf = np.max(np.abs(f))
        if nf < CORRECTOR_TOL:
            return u
        try:
            du = np.linalg.solve(Jm, -f)
        except np.linalg.LinAlgError:
            raise ContinuationError("initial cycle corrector singular")
        # backtracking line search; the pinned-amplitude system is touchy
        for _bt in range(16):
            try:
                f_new, J_new = FJ(u + du)
            except ContinuationError:
                du = du / 2
                continue
            if np.max(np.abs(f_new)) < max(nf * 0.9, CORRECTOR_TOL):
                break
            du = du / 2
        u = u + du
        f, Jm = f_new, J_new
    raise ContinuationError("initial cycle did not converge")


def continue_cycles(start_hopf: LocusPoint, free: str, *,
                    n_steps: int = 300, step0: float = 1e-3,
                    max_step: float = 0.2, min_step: float = 1e-10,
                    n_seg: int = N_SEGMENTS, radius_factor: float = 0.03,
                    period_cap: float = PERIOD_CAP, window=None,
                    rtol: float = 1e-9) -> Branch:
    """Family of limit cycles from a Hopf point, continued in ``free``.

    LPC is tagged at parameter turning points (the nontrivial multiplier
    crosses 1 there); period growth beyond ``period_cap`` ends the branch
    with a HOM_APPROX tag (large-period homoclinic proxy).
    """
    sys = _ShootingSystem(start_hopf.params, [free], n_seg=n_seg, rtol=rtol)
    eq = start_hopf.equilibrium
    radius = radius_factor * max(abs(eq.y), 1e-3)
    u = _hopf_initial_cycle(sys, start_hopf, radius)
    n = sys.n_seg

    nodes, period, logp = _unpack(sys, u)
    pp0 = sys.params_at(logp)
    f_ref = eval_polynomial_field(pp0, nodes[0])
    phase_ref = (f_ref / np.linalg.norm(f_ref), nodes[0].copy())

    def F_only(uu):
        Fv, _, _ = _cycle_residual_and_jac(sys, uu, phase_ref)
        return Fv

    def jac_fn(uu, f0):
        _, J, _ = _cycle_residual_and_jac(sys, uu, phase_ref)
        return J

    branch = Branch(kind="cycle_family")

    def accept(uu):
        nds, per, lgp = _unpack(sys, uu)
        blk = sys.propagate(nds, per, lgp)
        mu_div, mu_det = _multipliers(blk)
        pp = blk["params"]
        amp = float(np.max(nds[:, 1]) - np.min(nds[:, 1]))
        cp = CyclePoint(nodes=nds.copy(), period=float(per), params=pp,
                        multiplier=mu_div, monodromy_multiplier=mu_det,
                        values={free: getattr(pp, free), "period": float(per),
                                "amplitude": amp, "multiplier": mu_div})
        branch.points.append(BranchPoint(uu.copy(), pp, cp.values))
        branch.diagnostics.setdefault("cycles", []).append(cp)
        branch.diagnostics.setdefault("residuals", []).append(
            float(np.max(np.abs(F_only(uu)))))
        return cp

    u_cur, ok, _, res = _corrector(F_only, u, None, 0.0,
                                   jac=jac_fn)
    if not ok:
        raise ContinuationError(f"cycle start corrector failed ({res:g})")
    accept(u_cur)

    # initial tangent: increase amplitude (move away from the Hopf point)
    tangent = None
    step = step0
    prev_dp_sign = None
    for _ in range(n_steps):
        if tangent is None:
            J = jac_fn(u_cur, None)
            _, _, vh = np.linalg.svd(J)
            tangent = vh[-1]
            # orient toward growing period (away from the degenerate Hopf)
            if tangent[2 * n] < 0:
                tangent = -tangent
            tangent = tangent / np.linalg.norm(tangent)
        pred = u_cur + step * tangent
        u_new, ok, n_it, res = _corrector(F_only, pred, tangent,
                                          tangent @ pred, jac=jac_fn)
        if not ok:
            if step <= min_step:
                branch.diagnostics["truncated"] = \
                    f"corrector failure at minimum step (residual {res:g})"
                break
            step = max(step / 2, min_step)
            continue
        cp = accept(u_new)
        # LPC: fold of the branch in the free parameter; refine by releasing
        # the parameter against the multiplier-one condition and insert the
        # refined cycle as the tagged point
        dp = u_new[2 * n + 1] - u_cur[2 * n + 1]
        if prev_dp_sign is not None and dp * prev_dp_sign < 0 \
                and abs(cp.multiplier - 1) < 0.5:
            try:
                u_lpc, cp_lpc = _lpc_solve(sys, u_cur.copy())
                i_tag = len(branch.points) - 1
                branch.points.insert(i_tag, BranchPoint(
                    u_lpc, cp_lpc.params, cp_lpc.values))
                branch.diagnostics["cycles"].insert(i_tag, cp_lpc)
                # the refined cycle carries its own phase anchor; judge it
                # by the phase-independent matching rows
                branch.diagnostics["residuals"].insert(
                    i_tag, float(np.max(np.abs(F_only(u_lpc)[:2 * n]))))
                branch.special_points.append((i_tag, "LPC"))
            except ContinuationError:
                branch.special_points.append((len(branch.points) - 2, "LPC"))
        if abs(dp) > 1e-14:
            prev_dp_sign = np.sign(dp)
        if cp.period > period_cap:
            branch.special_points.append((len(branch.points) - 1,
                                          "HOM_APPROX"))
            branch.diagnostics["stopped"] = "period cap reached"
            break
        if window is not None:
            pv = cp.values[free]
            if not (window[0] <= pv <= window[1]):
                branch.diagnostics["stopped"] = \
                    f"{free} left the window at {pv:g}"
                break
        new_tan = u_new - u_cur
        new_tan = new_tan / np.linalg.norm(new_tan)
        tangent = new_tan
        u_cur = u_new
        if n_it <= 4:
            step = min(step * 2, max_step)
        elif n_it > 8:
            step = max(step / 2, min_step)
        # keep the phase anchor near the current cycle to avoid drift
        nodes_c, _, logp_c = _unpack(sys, u_cur)
        ppc = sys.params_at(logp_c)
        f_ref = eval_polynomial_field(ppc, nodes_c[0])
        phase_ref = (f_ref / np.linalg.norm(f_ref), nodes_c[0].copy())
    return branch


def _lpc_solve(sys: _ShootingSystem, u: np.ndarray):
    """Square Newton solve of shooting + (divergence integral = 0) with the
    free parameter released; returns (u_refined, CyclePoint)."""
    n = sys.n_seg
    nodes, period, logp = _unpack(sys, u)
    pp = sys.params_at(logp)
    f_ref = eval_polynomial_field(pp, nodes[0])
    phase_ref = (f_ref / np.linalg.norm(f_ref), nodes[0].copy())

    def lpc_row(blk, uu):
        grad = np.zeros(len(uu))
        for i in range(n):
            grad[2 * i: 2 * i + 2] = blk["dq_ds"][i]
        grad[2 * n] = np.exp(uu[2 * n]) * np.sum(blk["div_end"]) / n
        for k in range(sys.m):
            grad[2 * n + 1 + k] = np.sum(blk["dq_dp"][k])
        return float(np.sum(blk["q"])), grad

    def F(uu):
        Fv, _, _ = _cycle_residual_and_jac(sys, uu, phase_ref,
                                           extra_rows=(lpc_row,))
        return Fv

    def jac_fn(uu, f0):
        _, J, _ = _cycle_residual_and_jac(sys, uu, phase_ref,
                                          extra_rows=(lpc_row,))
        return J

    u_ref, ok, _, res = _corrector(F, u, None, 0.0, jac=jac_fn)
    if not ok:
        raise ContinuationError(f"LPC refinement failed (residual {res:g})")
    nds, per, lgp = _unpack(sys, u_ref)
    blk = sys.propagate(nds, per, lgp)
    mu_div, mu_det = _multipliers(blk)
    ppf = blk["params"]
    amp = float(np.max(nds[:, 1]) - np.min(nds[:, 1]))
    vals = {"period": float(per), "amplitude": amp, "multiplier": mu_div}
    for nm in sys.free:
        vals[nm] = getattr(ppf, nm)
    cp = CyclePoint(nodes=nds, period=float(per), params=ppf,
                    multiplier=mu_div, monodromy_multiplier=mu_det,
                    values=vals)
    return u_ref, cp


def refine_lpc(branch: Branch, sys_params: ModelParams, free: str, *,
               n_seg: int = N_SEGMENTS, rtol: float = 1e-9):
    """Sharpen an LPC tag: solve shooting + (divergence integral = 0) with
    the free parameter released.  Returns (CyclePoint, unknown vector)."""
    lpc_pts = [branch.points[i] for i, t in branch.special_points
               if t == "LPC"]
    if not lpc_pts:
        raise ContinuationError("no LPC tag on the branch")
    sys = _ShootingSystem(sys_params, [free], n_seg=n_seg, rtol=rtol)
    u_ref, cp = _lpc_solve(sys, lpc_pts[0].u.copy())
    return cp, u_ref


def lpc_curve(start_u: np.ndarray, base_params: ModelParams, *,
              n_steps: int = 200, step0: float = 1e-3, max_step: float = 0.1,
              min_step: float = 1e-10, n_seg: int = N_SEGMENTS,
              rtol: float = 1e-9, amplitude_floor: float = 1e-3,
              gh_hint=None) -> Branch:
    """Fold-of-cycles curve in (lambda1, lambda2).

    ``start_u`` is a refined LPC unknown vector with ONE free parameter
    (lambda1); lambda2 is appended here as the second free parameter.  The
    curve terminates when the cycle amplitude shrinks below
    ``amplitude_floor`` (approach to the Bautin point, where the fold of
    cycles collapses onto the Hopf curve).
    """
    sys = _ShootingSystem(base_params, ["lambda1", "lambda2"], n_seg=n_seg,
                          rtol=rtol)
    n = n_seg
    u = np.concatenate([start_u, [np.log(base_params.lambda2)]])
    nodes, period, logp = _unpack(sys, u)
    pp = sys.params_at(logp)
    f_ref = eval_polynomial_field(pp, nodes[0])
    phase_ref = [f_ref / np.linalg.norm(f_ref), nodes[0].copy()]

    def lpc_row(blk, uu):
        grad = np.zeros(len(uu))
        for i in range(n):
            grad[2 * i: 2 * i + 2] = blk["dq_ds"][i]
        grad[2 * n] = np.exp(uu[2 * n]) * np.sum(blk["div_end"]) / n
        grad[2 * n + 1] = np.sum(blk["dq_dp"][0])
        grad[2 * n + 2] = np.sum(blk["dq_dp"][1])
        return float(np.sum(blk["q"])), grad

    def F(uu):
        Fv, _, _ = _cycle_residual_and_jac(sys, uu, tuple(phase_ref),
                                           extra_rows=(lpc_row,))
        return Fv

    def jac_fn(uu, f0):
        _, J, _ = _cycle_residual_and_jac(sys, uu, tuple(phase_ref),
                                          extra_rows=(lpc_row,))
        return J

    branch = Branch(kind="lpc_curve")

    def accept(uu):
        nds, per, lgp = _unpack(sys, uu)
        blk = sys.propagate(nds, per, lgp)
        mu_div, mu_det = _multipliers(blk)
        ppx = blk["params"]
        amp = float(np.max(nds[:, 1]) - np.min(nds[:, 1]))
        vals = {"lambda1": ppx.lambda1, "lambda2": ppx.lambda2,
                "period": float(per), "amplitude": amp,
                "multiplier": mu_div}
        branch.points.append(BranchPoint(uu.copy(), ppx, vals))
        branch.diagnostics.setdefault("residuals", []).append(
            float(np.max(np.abs(F(uu)))))
        return vals

    u_cur, ok, _, res = _corrector(F, u, None, 0.0, jac=jac_fn)
    if not ok:
        raise ContinuationError(f"LPC curve start failed (residual {res:g})")
    vals = accept(u_cur)

    # move toward shrinking amplitude (toward the Bautin point) when a GH
    # hint is given, otherwise toward decreasing lambda2
    J0 = jac_fn(u_cur, None)
    _, _, vh = np.linalg.svd(J0)
    tangent = vh[-1]
    if gh_hint is not None:
        d = np.array([np.log(gh_hint[0]) - u_cur[2 * n + 1],
                      np.log(gh_hint[1]) - u_cur[2 * n + 2]])
        if tangent[2 * n + 1] * d[0] + tangent[2 * n + 2] * d[1] < 0:
            tangent = -tangent
    elif tangent[2 * n + 2] > 0:
        tangent = -tangent
    tangent = tangent / np.linalg.norm(tangent)

    step = step0
    amp0 = vals["amplitude"]
    amp_min = amp0
    for _ in range(n_steps):
        pred = u_cur + step * tangent
        u_new, ok, n_it, res = _corrector(F, pred, tangent, tangent @ pred,
                                          jac=jac_fn)
        if not ok:
            if step <= min_step:
                branch.diagnostics["truncated"] = \
                    f"corrector failure at minimum step (residual {res:g})"
                break
            step = max(step / 2, min_step)
            continue
        vals = accept(u_new)
        if vals["amplitude"] < amplitude_floor:
            branch.diagnostics["stopped"] = "amplitude floor (Bautin approach)"
            break
        # the curve degenerates at the Bautin point; when the corrector
        # bounces off it and the amplitude rebounds, stop at closest approach
        amp_min = min(amp_min, vals["amplitude"])
        if amp_min < 0.2 * amp0 and vals["amplitude"] > 1.25 * amp_min:
            keep = int(np.argmin(
                [p.values["amplitude"] for p in branch.points])) + 1
            del branch.points[keep:]
            del branch.diagnostics["residuals"][keep:]
            branch.diagnostics["stopped"] = \
                "amplitude rebound (Bautin approach)"
            break
        new_tan = u_new - u_cur
        tangent = new_tan / np.linalg.norm(new_tan)
        u_cur = u_new
        if n_it <= 4:
            step = min(step * 2, max_step)
        elif n_it > 8:
            step = max(step / 2, min_step)
        nodes_c, _, logp_c = _unpack(sys, u_cur)
        ppc = sys.params_at(logp_c)
        f_ref = eval_polynomial_field(ppc, nodes_c[0])
        phase_ref = [f_ref / np.linalg.norm(f_ref), nodes_c[0].copy()]
    return branch
