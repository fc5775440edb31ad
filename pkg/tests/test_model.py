import numpy as np
import pytest

from delisi.model import (
    DomainError,
    ModelParams,
    State,
    composite_params,
    eval_original_field,
    eval_polynomial_field,
    jacobian,
    taylor_expand,
)


@pytest.fixture
def params():
    return ModelParams(0.01, 0.006672, 0.297312, 0.00318, 2500.0)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(-1.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, float("nan"), 1.0, 1.0, 1.0)


def test_params_round_trip(params):
    assert ModelParams.from_json(params.to_json()) == params
    assert params.replace(lambda1=0.02).lambda1 == 0.02


def test_composites_invert(params):
    psi, lam = composite_params(params)
    back = ModelParams.from_composites(psi, lam, params.alpha1,
                                       params.alpha2, params.xc)
    assert back.lambda1 == pytest.approx(params.lambda1, rel=1e-14)
    assert back.lambda2 == pytest.approx(params.lambda2, rel=1e-14)


def test_polynomial_matches_original_field(params):
    # pull the original field back through y = ybar^(1/3) and the
    # time rescaling dt = (1+x) dt'
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.uniform(1e-3, 0.9 * params.xc)
        y = 10.0 ** rng.uniform(-2, 1)
        fp = eval_polynomial_field(params, [x, y])
        fo = eval_original_field(params, [x, y**3])
        pred = np.array([(1 + x) * fo[0], (1 + x) * fo[1] / y**2])
        assert np.max(np.abs(fp - pred)) <= 1e-12 * max(1.0,
                                                        np.max(np.abs(fp)))


def test_original_field_rejects_nonpositive_y(params):
    with pytest.raises(DomainError):
        eval_original_field(params, [1.0, 0.0])


def test_jacobian_matches_finite_differences(params):
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(50):
        s = np.array([rng.uniform(0.1, 100.0), rng.uniform(0.01, 2.0)])
        J = jacobian(params, s)
        J_fd = np.empty((2, 2))
        for j in range(2):
            d = np.zeros(2)
            d[j] = h
            J_fd[:, j] = (eval_polynomial_field(params, s + d)
                          - eval_polynomial_field(params, s - d)) / (2 * h)
        scale = max(1.0, np.max(np.abs(J)))
        assert np.max(np.abs(J - J_fd)) <= 1e-6 * scale


def test_taylor_reconstruction_exact(params):
    # the field is polynomial, so the finite expansion is exact
    rng = np.random.default_rng(3)
    for _ in range(50):
        base = State(rng.uniform(0.1, 10.0), rng.uniform(0.05, 1.0))
        tc = taylor_expand(params, base)
        dx, dy = rng.uniform(-0.5, 0.5, 2)
        truth = eval_polynomial_field(params, [base.x + dx, base.y + dy])
        approx = tc.evaluate(dx, dy)
        assert np.max(np.abs(truth - approx)) <= 1e-12 * max(
            1.0, np.max(np.abs(truth)))


def test_taylor_linear_matrix_is_jacobian(params):
    base = State(2.0, 0.3)
    tc = taylor_expand(params, base)
    J = jacobian(params, base.as_array())
    assert np.max(np.abs(tc.linear_matrix - J)) <= 1e-14 * np.max(np.abs(J))


def test_state_roi(params):
    assert State(1.0, 0.5).in_roi(params)
    assert not State(-1.0, 0.5).in_roi(params)
    assert not State(1.0, 0.0).in_roi(params)
    assert not State(params.xc + 1, 0.5).in_roi(params)
