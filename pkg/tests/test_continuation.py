import numpy as np
import pytest

from delisi.model import ModelParams, State, eval_polynomial_field
from delisi.equilibria import classify, cubic_real_roots, equilibrium_cubic
from delisi import continuation as cont
from delisi import dynamics as dyn
from delisi import loci
from conftest import hopf_locus_point

A1, A2, XC = 0.297312, 0.00318, 2500.0


@pytest.fixture(scope="module")
def base_params():
    return ModelParams(0.0127, 0.0040, A1, A2, XC)


@pytest.fixture(scope="module")
def eq_branch(base_params):
    return cont.continue_equilibria(base_params, "lambda1", (0.005, 0.05))


def _trace_det_at(base, lambda1):
    """Independent closed-form oracle: equilibrium spectrum at lambda1."""
    p = base.replace(lambda1=lambda1)
    roots = cubic_real_roots(equilibrium_cubic(p))
    out = []
    for x0 in roots[roots > 0]:
        y0 = p.alpha2 * x0 / (p.lambda2 * (1 + x0))
        out.append(classify(p, State(float(x0), float(y0))))
    return out


def test_equilibrium_branch_points_are_equilibria(base_params, eq_branch):
    for pt in eq_branch.points[::25]:
        p = base_params.replace(lambda1=pt.values["lambda1"])
        f = eval_polynomial_field(p, [pt.values["x"], pt.values["y"]])
        assert np.max(np.abs(f)) <= 1e-8


def test_hopf_tag_matches_bisection_oracle(base_params, eq_branch):
    hp = eq_branch.tagged("H")[0]
    lam1 = hp.values["lambda1"]
    # bracket the trace zero with the closed-form oracle and bisect
    def trace_near(l1):
        eqs = _trace_det_at(base_params, l1)
        cands = [e.trace for e in eqs if e.det > 0]
        return min(cands, key=abs)
    lo, hi = 0.99 * lam1, 1.01 * lam1
    assert trace_near(lo) * trace_near(hi) < 0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if trace_near(lo) * trace_near(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert lam1 == pytest.approx(0.5 * (lo + hi), rel=1e-7)


def test_fold_tag_matches_discriminant(base_params, eq_branch):
    sn = eq_branch.tagged("SN")[0]
    p = base_params.replace(lambda1=sn.values["lambda1"])
    from delisi.equilibria import discriminant
    assert abs(discriminant(p)) <= 1e-5 * 4 * p.xc**2


def test_corrector_residuals_recorded(eq_branch):
    res = eq_branch.diagnostics["residuals"]
    assert len(res) == len(eq_branch.points)
    assert max(res) <= 1e-9


def test_fold_curve_stays_on_fold():
    bt = loci.bt_point(A1, A2, XC)
    br = cont.continue_fold_curve(bt)
    psi_f = loci.fold_psi(XC)
    for pt in br.points:
        assert pt.values["psi"] == pytest.approx(psi_f, rel=1e-8)
    tag = br.tagged("BT")[0]
    assert tag.values["lambda1"] == pytest.approx(bt.params.lambda1,
                                                  rel=1e-6)
    assert tag.values["lambda2"] == pytest.approx(bt.params.lambda2,
                                                  rel=1e-6)
    assert max(br.diagnostics["residuals"]) <= 1e-9


def test_hopf_curve_tags_bautin():
    bt = loci.bt_point(A1, A2, XC)
    br = cont.continue_hopf_curve(bt)
    gh_tag = br.tagged("GH")[0]
    gh = loci.bautin_point(A1, A2, XC)
    assert gh_tag.values["lambda1"] == pytest.approx(gh.params.lambda1,
                                                     rel=1e-5)
    assert gh_tag.values["lambda2"] == pytest.approx(gh.params.lambda2,
                                                     rel=1e-5)
    assert max(br.diagnostics["residuals"]) <= 1e-9


@pytest.fixture(scope="module")
def small_cycle_branch(base_params):
    start = hopf_locus_point(base_params)
    return cont.continue_cycles(start, "lambda1", n_steps=12)


def test_cycle_closure_and_monodromy(small_cycle_branch, base_params):
    cp = small_cycle_branch.diagnostics["cycles"][-1]
    # closure: integrating one period returns to the starting node
    t, y, fired, _ = dyn.rk45(
        lambda t, s: eval_polynomial_field(cp.params, s),
        0.0, cp.nodes[0].copy(), cp.period, rtol=1e-11, atol=1e-13)
    scale = max(1.0, float(np.max(np.abs(cp.nodes))))
    assert np.max(np.abs(y - cp.nodes[0])) <= 1e-5 * scale
    # the two independent multiplier computations agree
    assert cp.multiplier == pytest.approx(cp.monodromy_multiplier,
                                          rel=1e-5, abs=1e-8)


def test_cycle_residuals_and_limit_cycle(small_cycle_branch):
    assert max(small_cycle_branch.diagnostics["residuals"]) <= 1e-9
    cp = small_cycle_branch.diagnostics["cycles"][-1]
    lc = cp.to_limit_cycle()
    assert lc.samples.shape[0] >= 100
    assert lc.period == pytest.approx(cp.period)
    assert lc.amplitude > 0


def test_cycles_start_unstable_on_subcritical_side(small_cycle_branch):
    # lambda2 = 0.0040 sits on the subcritical Hopf sheet
    first = small_cycle_branch.diagnostics["cycles"][0]
    assert first.multiplier > 1.0


def test_continue_cycles_window_stop(base_params):
    start = hopf_locus_point(base_params)
    lo = start.params.lambda1 * (1 - 1e-4)
    hi = start.params.lambda1 * (1 + 1e-4)
    br = cont.continue_cycles(start, "lambda1", n_steps=40,
                              window=(lo, hi))
    assert "stopped" in br.diagnostics


def test_equilibrium_branch_window_endpoints(base_params, eq_branch):
    l1 = [p.values["lambda1"] for p in eq_branch.points]
    assert min(l1) >= 0.005 * (1 - 0.05)
    assert max(l1) <= 0.05 * (1 + 0.05)
