import numpy as np
import pytest

from delisi.model import ModelParams
from delisi.equilibria import discriminant, equilibrium_cubic
from delisi import loci


A1, A2, XC = 0.297312, 0.00318, 2500.0


def test_fold_psi_zeroes_discriminant():
    for xc in (10.0, 300.0, 2500.0):
        psi = loci.fold_psi(xc)
        p = ModelParams.from_composites(psi, 0.4, A1, A2, xc)
        assert abs(discriminant(p)) <= 1e-10 * 4 * xc**2


def test_bt_point_has_double_zero_eigenvalue():
    lp = loci.bt_point(A1, A2, XC)
    assert abs(lp.equilibrium.trace) <= 1e-8
    assert abs(lp.equilibrium.det) <= 1e-8


def test_saddle_node_curve_double_root():
    pts = loci.saddle_node_curve(A1, A2, XC, np.linspace(0.1, 1.0, 20))
    assert len(pts) == 20
    for lp in pts:
        cubic = equilibrium_cubic(lp.params)
        x0 = lp.equilibrium.x
        c = [cubic.c3, cubic.c2, cubic.c1, cubic.c0]
        scale = max(1.0, abs(np.polyval(c, 2 * x0)))
        assert abs(np.polyval(c, x0)) <= 1e-9 * scale
        assert abs(np.polyval(np.polyder(c), x0)) <= 1e-9 * scale


def test_saddle_node_curve_rejects_bad_grid():
    with pytest.raises(Exception):
        loci.saddle_node_curve(A1, A2, XC, [-0.1])


def test_bautin_point_is_on_hopf_surface():
    lp = loci.bautin_point(A1, A2, XC)
    res = loci.hopf_surface_residual(lp.diagnostics["psi"],
                                     lp.diagnostics["lam"], XC)
    coeffs = loci.hopf_cubic_coefficients(lp.diagnostics["psi"], XC)
    scale = max(np.max(np.abs(coeffs)), 1.0)
    assert abs(res) <= 1e-10 * scale
    from delisi.lyapunov import first_lyapunov
    nf = first_lyapunov(lp.params, lp.equilibrium)
    assert abs(nf.ell1) <= 1e-6 * max(1.0, abs(nf.c1))


def test_bautin_closed_forms():
    assert loci.bautin_lambda(XC) == pytest.approx((XC - 3) / (3 * (XC + 1)),
                                                   rel=1e-14)
    s = np.sqrt(XC)
    psi = s * ((XC - 27) * s + (9 + XC) ** 1.5) / (27 * (1 + XC) ** 2)
    assert loci.bautin_psi(XC) == pytest.approx(psi, rel=1e-14)


def test_hopf_point_newton_corrects_trace():
    lp = loci.hopf_point(0.0677, 0.3144, A1, A2, XC)
    assert lp.kind is loci.LocusKind.HOPF
    assert abs(lp.equilibrium.trace) <= 1e-12
    assert lp.diagnostics["omega"] > 0


def test_hopf_lambda_roots_classification():
    psi = 0.0677
    roots = loci.hopf_lambda_roots(psi, XC)
    assert roots
    kinds = {k for _, k in roots}
    assert loci.LocusKind.HOPF in kinds


def test_trace_zero_solutions_land_on_hopf_cubic():
    sols = loci.trace_zero_solutions(XC, 25, alpha1=A1, alpha2=A2, seed=5)
    assert len(sols) == 25
    for s in sols:
        assert abs(s["hopf_residual_rel"]) < 1e-8
