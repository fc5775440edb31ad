import numpy as np
import pytest

from delisi.model import DomainError, ModelParams
from delisi import dynamics as dyn


A1, A2, XC = 0.297312, 0.00318, 2500.0


def test_rk45_harmonic_oscillator_accuracy():
    f = lambda t, y: np.array([y[1], -y[0]])
    t_end = 2 * np.pi
    t, y, fired, _ = dyn.rk45(f, 0.0, np.array([1.0, 0.0]), t_end,
                              rtol=1e-10, atol=1e-12)
    assert fired is None
    assert np.max(np.abs(y - [1.0, 0.0])) <= 1e-8


def test_rk45_event_refinement():
    f = lambda t, y: np.array([1.0])
    ev = dyn.Event(lambda t, y: y[0] - 2.5, direction=+1, name="cross")
    t, y, fired, _ = dyn.rk45(f, 0.0, np.array([0.0]), 10.0,
                              rtol=1e-10, atol=1e-12, events=[ev])
    assert fired is not None and fired.name == "cross"
    assert abs(y[0] - 2.5) <= 1e-10


def test_integrate_elimination_exit():
    p = ModelParams(0.1, 0.006672, A1, A2, XC)
    tr = dyn.integrate(p, [1.0, 1e-4], 1e4)
    assert tr.terminal is dyn.Terminal.LEFT_ROI_Y0
    assert abs(tr.final[1]) <= 1e-8


def test_integrate_escape_event():
    p = ModelParams(0.1, 0.006672, A1, A2, XC)
    tr = dyn.integrate(p, [1.0, 5.0], 1e5, escape_bound=50.0, rtol=1e-8,
                       atol=1e-10)
    assert tr.terminal is dyn.Terminal.ESCAPED_Y
    assert tr.final[1] >= 50.0 - 1e-6


def test_integrate_rejects_nonfinite_start():
    p = ModelParams(0.1, 0.006672, A1, A2, XC)
    with pytest.raises(DomainError):
        dyn.integrate(p, [np.nan, 1.0], 10.0)


def test_integrate_raw_section_crossing():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)
    s = dyn.integrate_raw(p, np.array([0.5, 0.4]), 5e3,
                          section=("x", 0.5, -1))
    assert s is not None
    assert abs(s[0] - 0.5) <= 1e-8


def test_infinity_chart_attractor():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)
    c = dyn.InfinityChartState(p.xc, 0.0)
    assert np.max(np.abs(dyn.infinity_chart_field(p, c))) == 0.0
    assert np.max(np.abs(dyn.infinity_chart_pushforward(p, c))) == 0.0
    J = dyn.infinity_chart_linearization(p)
    assert J[0, 0] == pytest.approx(-p.xc**2 * p.alpha1, rel=1e-14)
    assert J[1, 1] == pytest.approx(-p.xc * p.lambda2, rel=1e-14)
    assert J[0, 1] == 0.0 and J[1, 0] == 0.0


def test_chart_forms_agree_on_v_zero_line():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)
    for x in np.linspace(1.0, 2 * XC, 7):
        c = dyn.InfinityChartState(x, 0.0)
        a = dyn.infinity_chart_field(p, c)
        b = dyn.infinity_chart_pushforward(p, c)
        assert np.max(np.abs(a - b)) == 0.0


def test_origin_sector_flow_values():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)
    assert dyn.origin_sector_flow(p, [np.pi / 4])[0] == pytest.approx(
        -p.lambda2 / 2, rel=1e-14)
    flows = dyn.origin_sector_flow(p, np.linspace(0.01, np.pi / 2 - 0.01, 50))
    assert np.all(flows < 0)
    with pytest.raises(DomainError):
        dyn.origin_sector_flow(p, [0.0])
    with pytest.raises(DomainError):
        dyn.origin_sector_flow(p, [np.pi / 2])


def test_threshold_curve_is_monotone_graph():
    p = ModelParams(0.1, 0.006672, A1, A2, XC)
    curve = dyn.threshold_curve(p)
    assert np.all(np.diff(curve.xs) > 0)
    assert curve.y_c > 0
    mid = 0.5 * (curve.xs[0] + curve.xs[-1])
    assert curve(mid) > 0


def test_threshold_requires_unique_origin():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)  # interior equilibria exist
    with pytest.raises(DomainError):
        dyn.threshold_curve(p)


def test_phase_portrait_bundles():
    p = ModelParams(0.0127, 0.0040, A1, A2, XC)
    pp = dyn.phase_portrait(p, [(0.5, 0.3), (1.0, 0.25)], 500.0)
    assert len(pp.trajectories) == 2
    assert pp.equilibria
    for tr in pp.trajectories:
        assert tr.states.shape[1] == 2
