import numpy as np
import pytest

from delisi import loci
from delisi.lyapunov import (
    NotAHopfError,
    ell1_sign_oracle,
    first_lyapunov,
    linearize_from_matrix,
    normal_form_coeffs,
)

A1, A2, XC = 0.297312, 0.00318, 2500.0


def test_linearization_oscillator_form():
    rng = np.random.default_rng(2)
    for _ in range(25):
        A = rng.normal(size=(2, 2))
        if np.linalg.det(A) <= 0 or A[0, 1] == 0:
            continue
        lin = linearize_from_matrix(A)
        R = lin.M @ A @ np.linalg.inv(lin.M)
        target = np.array([[0.0, 1.0], [-lin.omega**2, 2 * lin.mu]])
        assert np.max(np.abs(R - target)) <= 1e-10 * max(
            1.0, np.max(np.abs(target)))


def test_linearization_rejects_negative_det():
    with pytest.raises(NotAHopfError):
        linearize_from_matrix(np.array([[1.0, 1.0], [2.0, 1.0]]))


def test_eigenvector_relations():
    lin = linearize_from_matrix(np.array([[0.5, -2.0], [1.0, -0.5]]))
    R = np.array([[0.0, 1.0], [-lin.omega**2, 2 * lin.mu]])
    # q0 is the eigenvector of R for i*omega at mu = 0
    lhs = R @ lin.q0
    rhs = (lin.mu + 1j * lin.omega) * lin.q0
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    # normalization <p0, q0> = 1
    assert np.vdot(lin.p0, lin.q0) == pytest.approx(1.0, abs=1e-12)


def test_c1_displays_agree_on_real_part():
    lp = loci.hopf_point(0.0677, 0.3144, A1, A2, XC)
    nf_a = first_lyapunov(lp.params, lp.equilibrium)
    nf_b = normal_form_coeffs(lp.params, lp.equilibrium, standard_c1=True)
    assert nf_a.ell1 == pytest.approx(nf_b.ell1, rel=1e-12)


def test_ell1_sign_flips_across_bautin():
    lam_gh = loci.bautin_lambda(XC)
    bt = loci.bt_point(1.0, 1.0, XC)
    from delisi import continuation as cont
    br = cont.continue_hopf_curve(bt)
    lo = min(br.points, key=lambda p: abs(p.values["lam"] - 0.30))
    hi = min(br.points, key=lambda p: abs(p.values["lam"] - 0.36))
    for pt, sign in ((lo, +1), (hi, -1)):
        lp = loci.hopf_point(pt.values["psi"], pt.values["lam"], 1.0, 1.0, XC)
        nf = first_lyapunov(lp.params, lp.equilibrium)
        assert np.sign(nf.ell1) == sign
    assert 0.30 < lam_gh < 0.36


def test_oracle_matches_normal_form_sign():
    bt = loci.bt_point(1.0, 1.0, XC)
    from delisi import continuation as cont
    br = cont.continue_hopf_curve(bt)
    pt = min(br.points, key=lambda p: abs(p.values["lam"] - 0.30))
    lp = loci.hopf_point(pt.values["psi"], pt.values["lam"], 1.0, 1.0, XC)
    nf = first_lyapunov(lp.params, lp.equilibrium)
    assert ell1_sign_oracle(lp.params, lp.equilibrium) == np.sign(nf.ell1)


def test_oracle_at_anchor_gauge_with_wider_radii():
    # increments at the anchor gauge sit below integrator noise at the
    # default radii; wider radii recover the sign
    lp = loci.hopf_point(0.0677, 0.3144, A1, A2, XC)
    nf = first_lyapunov(lp.params, lp.equilibrium)
    sign = ell1_sign_oracle(lp.params, lp.equilibrium,
                            radius_factors=(0.01, 0.02), n_returns=80)
    assert sign == np.sign(nf.ell1)
