import numpy as np
import pytest

from delisi.model import ModelParams, State, eval_polynomial_field
from delisi.equilibria import (
    EquilibriumKind,
    classify,
    cubic_real_roots,
    discriminant,
    equilibrium_cubic,
    find_equilibria,
    sample_catastrophe_surface,
)
from delisi.loci import fold_psi


def params_at(psi, lam, xc=2500.0):
    return ModelParams.from_composites(psi, lam, 0.297312, 0.00318, xc)


def test_cubic_roots_satisfy_cubic():
    p = params_at(0.05, 0.4)
    cubic = equilibrium_cubic(p)
    roots = cubic_real_roots(cubic)
    for x0 in roots:
        scale = max(abs(cubic.c3 * x0**3), abs(cubic.c0), 1.0)
        assert abs(np.polyval([cubic.c3, cubic.c2, cubic.c1, cubic.c0],
                              x0)) <= 1e-9 * scale


def test_equilibria_zero_the_field():
    p = params_at(0.05, 0.4)
    for e in find_equilibria(p):
        f = eval_polynomial_field(p, [e.x, e.y])
        scale = 1.0 + np.max(np.abs(
            eval_polynomial_field(p, [max(e.x, 1.0), max(e.y, 1.0)])))
        assert np.max(np.abs(f)) <= 1e-10 * scale


def test_origin_is_trivial_saddle():
    p = params_at(0.05, 0.4)
    eqs = find_equilibria(p)
    assert eqs[0].x == 0.0
    assert eqs[0].kind is EquilibriumKind.TRIVIAL_SADDLE
    assert eqs[0].det < 0


def test_root_count_across_the_fold():
    # below the fold psi there are two interior equilibria, above none
    xc = 2500.0
    psi_f = fold_psi(xc)
    below = find_equilibria(params_at(0.8 * psi_f, 0.4, xc))
    above = find_equilibria(params_at(1.2 * psi_f, 0.4, xc))
    assert len(below) == 3  # origin + two interior
    assert len(above) == 1  # origin only


def test_fold_recovery_flags_degenerate():
    xc = 2500.0
    psi_f = fold_psi(xc)
    eqs = find_equilibria(params_at(psi_f * (1 + 1e-12), 0.4, xc))
    kinds = {e.kind for e in eqs}
    assert EquilibriumKind.DEGENERATE in kinds


def test_discriminant_sign_tracks_root_count():
    xc = 2500.0
    psi_f = fold_psi(xc)
    assert discriminant(params_at(0.8 * psi_f, 0.4, xc)) > 0
    assert discriminant(params_at(1.2 * psi_f, 0.4, xc)) < 0


def test_classification_of_interior_saddle_and_focus():
    p = params_at(0.05, 0.4)
    interior = find_equilibria(p)[1:]
    kinds = [e.kind for e in interior]
    assert EquilibriumKind.SADDLE in kinds
    focus_like = {EquilibriumKind.STABLE_FOCUS, EquilibriumKind.UNSTABLE_FOCUS,
                  EquilibriumKind.STABLE_NODE, EquilibriumKind.UNSTABLE_NODE}
    assert any(k in focus_like for k in kinds)


def test_catastrophe_surface_sheets_merge_at_fold():
    xc = 2500.0
    psi_f = fold_psi(xc)
    grid = np.linspace(0.5 * psi_f, 1.5 * psi_f, 41)
    pts = sample_catastrophe_surface(xc, grid)
    counts = []
    for psi in grid:
        counts.append(len([x0 for p, x0 in pts
                           if p == psi and x0 > 0]))
    assert counts[0] == 2       # two sheets below the fold
    assert counts[-1] == 0      # none above it


def test_classify_rejects_nonfinite():
    p = params_at(0.05, 0.4)
    with pytest.raises(Exception):
        classify(p, State(float("nan"), 1.0))
