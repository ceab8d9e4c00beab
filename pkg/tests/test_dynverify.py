import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from lepage.dynverify import (FunctionalSpec, LeavesPseudofiber, NoCrossing, UnverifiedCurve, charge_form,
                              cubic_obstruction, free_field_family, functional_integral, is_dynamical, j0,
                              pseudobracket_scalar, pseudofiber_invariance, psi_obstruction, pullback,
                              verify_dynamics_law)
from lepage.exterior import interior_mv_form
from lepage.hamflow import curve_from_exprs, integrate_ddw, trivial_family_discrete
from lepage.legendre import example, hamiltonian
from lepage.observ import xi_of
from lepage.symcore import normalize, var

x1, x2 = var("x1"), var("x2")


@pytest.fixture(scope="module")
def scalar_curve():
    res = hamiltonian(example("scalar", m2=1))
    init = {"y": (lambda x: np.sin(x) + 0.3 * np.cos(2 * x), lambda x: 0.5 * np.cos(x))}
    return res, integrate_ddw(res, init, grid=(64, 64), t_max=1.0)


def test_charge_is_dynamical_for_any_potential():
    res = hamiltonian(example("cscalar"))
    F = charge_form(res.space)
    v = is_dynamical(res.space, res.H, F)
    assert v.dynamical
    assert (v.xi - j0(res.space)).map(normalize).is_zero() or (v.xi + j0(res.space)).map(normalize).is_zero()


def test_momentum_density_dynamical_field_momentum_not():
    res = hamiltonian(example("scalar"))
    S, H = res.space, res.H
    Px = interior_mv_form(S.chart.partial("x2"), S.theta)
    Py = interior_mv_form(S.chart.partial("y"), S.theta)
    assert is_dynamical(S, H, Px).dynamical
    v = is_dynamical(S, H, Py)
    assert not v.dynamical
    V = res.spec.params["potential"]
    # H carries -V(y), so dH(d_y) = -V'(y)
    assert normalize(v.defect + sp.diff(V(var("y")), var("y"))) == 0


def test_free_family_and_obstructions():
    fam = free_field_family()
    assert fam.verified
    cub, expected = cubic_obstruction()
    assert cub.closure.map(normalize).is_zero()
    assert normalize(cub.defect - expected) == 0 and expected != 0
    v, exp_psi = psi_obstruction()
    assert normalize(v.defect - exp_psi) == 0 and exp_psi != 0


@pytest.mark.parametrize("n", [3])
def test_free_family_in_three_dimensions(n):
    assert free_field_family(n=n).verified


def test_pseudobracket_scalar_with_time_form():
    res = hamiltonian(example("scalar"))
    S = res.space
    assert pseudobracket_scalar(S, res.H, S.chart.form({("x2",): x1})) == 1
    with pytest.raises(ValueError):
        pseudobracket_scalar(S, res.H, S.chart.scalar(x1))


def test_slice_integral_against_closed_form():
    """y dx2 on {x1 = c} over a periodic x2: integral is 2 pi sin(c)."""
    S = hamiltonian(example("scalar", m2=0)).space
    coords = {nm: sp.Integer(0) for nm in S.chart.names}
    coords.update(x1=x1, x2=x2, y=sp.sin(x1) + sp.cos(x2))
    t = np.linspace(0, 1, 41)
    x = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    c = curve_from_exprs(S, coords, [t, x], ["fixed", "periodic"])
    F = S.chart.form({("x2",): var("y")})
    for level in (0.3, 0.7123):
        got = functional_integral(c, S, FunctionalSpec(F, x1, level))
        want = 2 * math.pi * math.sin(level)
        assert abs(got - want) < 1e-3 * abs(want)
    with pytest.raises(NoCrossing):
        functional_integral(c, S, FunctionalSpec(F, x1, 5.0))


def test_dynamics_law_on_integrated_curve(scalar_curve):
    res, c = scalar_curve
    rep = verify_dynamics_law(c, res.space, res.H, res.space.chart.scalar(var("y")), require_residual=1e-1)
    assert rep.residual < 1e-2 * rep.scale
    with pytest.raises(UnverifiedCurve):
        verify_dynamics_law(c, res.space, res.H, res.space.chart.scalar(var("y")), require_residual=1e-14)


_GS = [("x2", "x1"), ("x1", "x2"), ("x2", "y")]


@settings(max_examples=8)
@given(st.sampled_from(_GS), st.sampled_from(_GS), st.integers(1, 3), st.integers(-3, 3))
def test_dynamics_law_swap_antisymmetry(scalar_curve, fa, ga, cf, cg):
    """The law for (F, G) is the negative of the law for (G, F)."""
    res, c = scalar_curve
    S = res.space
    F = S.chart.form({(fa[0],): var(fa[1]) * cf})
    G = S.chart.form({(ga[0],): var(ga[1]) + cg})
    a = verify_dynamics_law(c, S, res.H, F, G)
    b = verify_dynamics_law(c, S, res.H, G, F)
    assert math.isclose(a.residual, b.residual, rel_tol=1e-12, abs_tol=1e-14)


def test_pullback_of_volume_is_one(scalar_curve):
    res, c = scalar_curve
    vol = pullback(c, res.space, res.space.volume())[(0, 1)]
    assert np.allclose(vol, 1.0)


def test_pseudofiber_invariance_and_rejection():
    res = hamiltonian(example("trivial2x2"))
    S, H = res.space, res.H
    from lepage.hamflow import pseudofiber_direction
    zeta = pseudofiber_direction(S, H)[0]
    c = trivial_family_discrete(x1 ** 2 - x2, x1 * x2 + x2 ** 2, 2 + x1, 0, grid=24)
    F = interior_mv_form(S.chart.partial("y1"), S.theta)
    rep = pseudofiber_invariance(c, S, H, F, zeta, FunctionalSpec(F, x1, 0.5), samples=2, steps=5)
    assert rep.drift < 1e-9 and rep.max_residual < 1e-8
    with pytest.raises(LeavesPseudofiber):
        pseudofiber_invariance(c, S, H, F, S.chart.vector({"p1_1": 1}), FunctionalSpec(F, x1, 0.5))
